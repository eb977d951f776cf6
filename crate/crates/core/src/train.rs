//! The training loop: warmup, forward-corrected main phase, periodic
//! noisy-sample identification with mixup re-refinement, checkpoints, and
//! prediction.
//!
//! Determinism contract: a single ChaCha8 stream seeded from the config
//! drives initialization, shuffling, and mixup draws in a fixed order;
//! collections that influence iteration order are B-trees; run artifacts
//! contain no timestamps. Two runs with the same config and data are
//! byte-identical.

use crate::config::{Mode, TrainConfig};
use crate::data::MultiViewDataset;
use crate::error::{Error, Result};
use crate::graph::{build_view_graph, ViewGraph};
use crate::identify::{
    fuse_consistencies, per_instance_divergence, separate_noisy, view_consistency,
};
use crate::loss::annealing_factor;
use crate::net::{NetGrads, ViewNet};
use crate::noise::{fill_identity, NoiseMatrixBank};
use crate::objective::{sample_loss_grad, PhaseWeights, SampleInput};
use crate::opinion::{combine_many, Evidence, Opinion};
use crate::optim::{adam_step_slice, AdamParams, AdamState};
use crate::refine::{pseudo_label, refine_dataset};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

/// Epochs between identification/re-refinement rounds in the full mode.
pub const REFINE_CADENCE: usize = 10;

/// Bump when the checkpoint layout changes.
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed for inference plus the artifacts of training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub config: TrainConfig,
    pub classes: usize,
    pub view_dims: Vec<usize>,
    pub nets: Vec<ViewNet>,
    /// Per-instance noise matrices; absent in the frozen-identity mode and
    /// in inference-only checkpoints.
    pub bank: Option<NoiseMatrixBank>,
    pub noisy_set: BTreeSet<usize>,
    pub epochs_run: usize,
}

/// One fused test-time prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// argmax of `probabilities`, ties toward the lower class.
    pub class: usize,
    /// Expected class probabilities of the fused Dirichlet.
    pub probabilities: Vec<f64>,
    /// C / S of the fused opinion.
    pub uncertainty: f64,
    pub per_view: Vec<Opinion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
}

/// Per-sample outcome of one identification round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundEntry {
    pub index: usize,
    pub pseudo_class: usize,
    pub partner: usize,
    pub lambda: f64,
    /// pseudo_class vs ground truth, when corruption records were supplied.
    pub was_correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyEntry {
    pub index: usize,
    pub score: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    /// 1-based refinement round counter.
    pub round: usize,
    /// Epoch at whose end the round ran.
    pub epoch: usize,
    pub newly_flagged: usize,
    pub total_flagged: usize,
    /// Flagged samples whose pseudo-label matches ground truth.
    pub corrected: Option<usize>,
    pub still_wrong: Option<usize>,
    pub entries: Vec<RoundEntry>,
    pub scores: Vec<ConsistencyEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub state: TrainState,
    pub epoch_losses: Vec<EpochLog>,
    pub rounds: Vec<RoundLog>,
}

/// Optimizer moments for the bank, with one lazily advanced step counter
/// per matrix so bias correction matches how often each matrix was touched.
struct BankOptimizer {
    m: Vec<f64>,
    v: Vec<f64>,
    t: Vec<u64>,
    mat: usize,
    views: usize,
}

impl BankOptimizer {
    fn new(instances: usize, views: usize, classes: usize) -> BankOptimizer {
        let mat = classes * classes;
        BankOptimizer {
            m: vec![0.0; instances * views * mat],
            v: vec![0.0; instances * views * mat],
            t: vec![0; instances * views],
            mat,
            views,
        }
    }

    fn step(
        &mut self,
        bank: &mut NoiseMatrixBank,
        instance: usize,
        view: usize,
        grad: &[f64],
        hp: &AdamParams,
    ) {
        let slot = instance * self.views + view;
        let off = slot * self.mat;
        self.t[slot] += 1;
        adam_step_slice(
            bank.matrix_mut(instance, view),
            grad,
            &mut self.m[off..off + self.mat],
            &mut self.v[off..off + self.mat],
            self.t[slot],
            hp,
        );
    }
}

/// Adam buffers for one view network's four tensors.
struct NetOptimizer {
    w1: AdamState,
    b1: AdamState,
    w2: AdamState,
    b2: AdamState,
}

impl NetOptimizer {
    fn new(net: &ViewNet) -> NetOptimizer {
        NetOptimizer {
            w1: AdamState::new(net.w1.len()),
            b1: AdamState::new(net.b1.len()),
            w2: AdamState::new(net.w2.len()),
            b2: AdamState::new(net.b2.len()),
        }
    }

    fn step(&mut self, net: &mut ViewNet, grads: &NetGrads, hp: &AdamParams) {
        self.w1.step(&mut net.w1, &grads.w1, hp);
        self.b1.step(&mut net.b1, &grads.b1, hp);
        self.w2.step(&mut net.w2, &grads.w2, hp);
        self.b2.step(&mut net.b2, &grads.b2, hp);
    }
}

struct Trainer {
    config: TrainConfig,
    data: MultiViewDataset,
    classes: usize,
    views: usize,
    nets: Vec<ViewNet>,
    net_opt: Vec<NetOptimizer>,
    bank: Option<NoiseMatrixBank>,
    bank_opt: Option<BankOptimizer>,
    graphs: Option<Vec<ViewGraph>>,
    identity_t: Vec<f64>,
    noisy: BTreeSet<usize>,
    rng: ChaCha8Rng,
    hp: AdamParams,
    t_hp: AdamParams,
    /// Ground-truth class per instance when corruption records are known.
    truth: Option<Vec<usize>>,
    epoch_losses: Vec<EpochLog>,
    rounds: Vec<RoundLog>,
}

/// Trains on `dataset` under `config`. `truth` maps instance index to the
/// pre-corruption class for scoring pseudo-labels in the round logs; pass
/// None when unknown (logging then omits correctness). Ground truth never
/// influences training itself.
pub fn train(
    dataset: &MultiViewDataset,
    config: &TrainConfig,
    truth: Option<&BTreeMap<usize, usize>>,
) -> Result<TrainOutput> {
    config.validate()?;
    let n = dataset.instances();
    if n == 0 {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    let classes = dataset.classes();
    let views = dataset.view_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let hidden = config.resolved_hidden_dim(classes);
    let nets: Vec<ViewNet> = (0..views)
        .map(|v| {
            ViewNet::init(
                dataset.view(v).cols(),
                hidden,
                classes,
                config.evidence_activation,
                &mut rng,
            )
        })
        .collect();
    let net_opt = nets.iter().map(NetOptimizer::new).collect();
    let (bank, bank_opt) = if config.mode.trains_matrices() {
        let bank = NoiseMatrixBank::identity(n, views, classes, config.max_bank_bytes)?;
        let opt = BankOptimizer::new(n, views, classes);
        (Some(bank), Some(opt))
    } else {
        (None, None)
    };
    let mut identity_t = vec![0.0; classes * classes];
    fill_identity(&mut identity_t, classes);

    let start_hard = dataset.hard_labels();
    let truth = truth.map(|map| {
        (0..n)
            .map(|i| map.get(&i).copied().unwrap_or(start_hard[i]))
            .collect::<Vec<usize>>()
    });

    let mut trainer = Trainer {
        config: config.clone(),
        data: dataset.clone(),
        classes,
        views,
        nets,
        net_opt,
        bank,
        bank_opt,
        graphs: None,
        identity_t,
        noisy: BTreeSet::new(),
        rng,
        hp: AdamParams::with_lr(config.lr),
        t_hp: AdamParams::with_lr(config.lr * config.t_lr_multiplier),
        truth,
        epoch_losses: Vec::new(),
        rounds: Vec::new(),
    };
    trainer.run()?;

    let Trainer {
        config,
        nets,
        bank,
        noisy,
        epoch_losses,
        rounds,
        data,
        ..
    } = trainer;
    let epochs_run = config.max_epochs;
    Ok(TrainOutput {
        state: TrainState {
            config,
            classes,
            view_dims: (0..views).map(|v| data.view(v).cols()).collect(),
            nets,
            bank,
            noisy_set: noisy,
            epochs_run,
        },
        epoch_losses,
        rounds,
    })
}

impl Trainer {
    fn run(&mut self) -> Result<()> {
        for epoch in 0..self.config.max_epochs {
            let warm = epoch < self.config.warmup_epochs;
            if !warm && self.graphs.is_none() && self.config.mode.trains_matrices() {
                self.build_graphs()?;
            }
            let pw = self.phase_weights(epoch, warm);
            let mean_loss = self.run_epoch(&pw, warm)?;
            self.epoch_losses.push(EpochLog { epoch, mean_loss });
            if self.config.mode.identifies_noise()
                && !warm
                && (epoch - self.config.warmup_epochs).is_multiple_of(REFINE_CADENCE)
            {
                self.identification_round(epoch)?;
            }
        }
        Ok(())
    }

    fn phase_weights(&self, epoch: usize, warm: bool) -> PhaseWeights {
        if warm {
            return PhaseWeights::warmup();
        }
        let trains_t = self.config.mode.trains_matrices();
        PhaseWeights {
            delta: annealing_factor(epoch, self.config.resolved_anneal_epochs()),
            beta: if trains_t { self.config.beta } else { 0.0 },
            gamma: if trains_t { self.config.gamma } else { 0.0 },
            include_mse: false,
        }
    }

    fn run_epoch(&mut self, pw: &PhaseWeights, warm: bool) -> Result<f64> {
        let n = self.data.instances();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(self.config.batch_size) {
            loss_sum += self.run_batch(batch, pw, warm)? * batch.len() as f64;
        }
        Ok(loss_sum / n as f64)
    }

    /// Corrected-opinion uncertainty of one sample in one view under the
    /// current weights and matrices.
    fn corrected_uncertainty(&self, index: usize, view: usize, use_bank: bool) -> f64 {
        let e = self.nets[view].forward(self.data.view(view).row(index)).e;
        let c = self.classes;
        let mut s_tilde = c as f64;
        if use_bank {
            let t = self.bank.as_ref().unwrap().matrix(index, view);
            for (row, &ev) in e.iter().enumerate() {
                for j in 0..c {
                    s_tilde += t[row * c + j] * ev;
                }
            }
        } else {
            s_tilde += e.iter().sum::<f64>();
        }
        c as f64 / s_tilde
    }

    fn run_batch(&mut self, batch: &[usize], pw: &PhaseWeights, warm: bool) -> Result<f64> {
        let views = self.views;
        let classes = self.classes;
        let update_bank = !warm && self.config.mode.trains_matrices();
        let use_bank = update_bank && self.bank.is_some();

        // First pass: per-view, per-class mean corrected uncertainty over
        // the batch, a detached input of the diagonal constraint.
        let batch_mean_u: Vec<Vec<Option<f64>>> = if pw.beta != 0.0 {
            let mut sums = vec![vec![0.0; classes]; views];
            let mut counts = vec![vec![0usize; classes]; views];
            for &i in batch {
                let label = self.data.label(i).hard();
                for v in 0..views {
                    sums[v][label] += self.corrected_uncertainty(i, v, use_bank);
                    counts[v][label] += 1;
                }
            }
            (0..views)
                .map(|v| {
                    (0..classes)
                        .map(|c| {
                            if counts[v][c] > 0 {
                                Some(sums[v][c] / counts[v][c] as f64)
                            } else {
                                None
                            }
                        })
                        .collect()
                })
                .collect()
        } else {
            vec![vec![None; classes]; views]
        };

        // Second pass: per-sample gradients, averaged over the batch.
        let mut net_grads: Vec<NetGrads> = self.nets.iter().map(NetGrads::zeros).collect();
        let mut t_grads: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        let mut total = 0.0;
        for &i in batch {
            let neighbor_lists: Vec<Vec<(usize, f64)>> = if pw.beta != 0.0 {
                let graphs = self
                    .graphs
                    .as_ref()
                    .expect("graphs exist when beta is active");
                (0..views)
                    .map(|v| -> Result<Vec<(usize, f64)>> {
                        Ok(graphs[v]
                            .neighbors_of(i)?
                            .iter()
                            .map(|nb| (nb.index, nb.similarity))
                            .collect())
                    })
                    .collect::<Result<Vec<_>>>()?
            } else {
                vec![Vec::new(); views]
            };
            let bank = self.bank.as_ref();
            let own_t: Vec<&[f64]> = (0..views)
                .map(|v| {
                    if use_bank {
                        bank.unwrap().matrix(i, v)
                    } else {
                        self.identity_t.as_slice()
                    }
                })
                .collect();
            let neighbor_t: Vec<Vec<(&[f64], f64)>> = (0..views)
                .map(|v| {
                    neighbor_lists[v]
                        .iter()
                        .map(|&(k, sim)| {
                            let t: &[f64] = if use_bank {
                                bank.unwrap().matrix(k, v)
                            } else {
                                self.identity_t.as_slice()
                            };
                            (t, sim)
                        })
                        .collect()
                })
                .collect();
            let input = SampleInput {
                features: (0..views).map(|v| self.data.view(v).row(i)).collect(),
                label: self.data.label(i),
                own_t,
                neighbor_t,
                batch_mean_u: batch_mean_u.clone(),
            };
            let w = if self.config.mode.identifies_noise() && self.noisy.contains(&i) {
                PhaseWeights {
                    include_mse: true,
                    ..*pw
                }
            } else {
                *pw
            };
            let (losses, grads) = sample_loss_grad(&self.nets, &input, &w)?;
            drop(input);
            total += losses.total;
            for (acc, g) in net_grads.iter_mut().zip(&grads.nets) {
                acc.add(g);
            }
            if update_bank {
                for (v, (own_g, nbr_gs)) in grads.own_t.iter().zip(&grads.neighbor_t).enumerate() {
                    accumulate(&mut t_grads, (i, v), own_g);
                    for (&(k, _), g) in neighbor_lists[v].iter().zip(nbr_gs) {
                        accumulate(&mut t_grads, (k, v), g);
                    }
                }
            }
        }

        let scale = 1.0 / batch.len() as f64;
        for g in net_grads.iter_mut() {
            g.scale(scale);
        }
        for ((opt, net), g) in self.net_opt.iter_mut().zip(&mut self.nets).zip(&net_grads) {
            opt.step(net, g, &self.hp);
        }
        if update_bank {
            let bank = self.bank.as_mut().unwrap();
            let opt = self.bank_opt.as_mut().unwrap();
            for ((inst, view), mut grad) in t_grads {
                for g in grad.iter_mut() {
                    *g *= scale;
                }
                opt.step(bank, inst, view, &grad, &self.t_hp);
                bank.project(inst, view);
            }
        }
        Ok(total * scale)
    }

    fn build_graphs(&mut self) -> Result<()> {
        let k = self.config.k_neighbors;
        let mut graphs = Vec::with_capacity(self.views);
        for v in 0..self.views {
            let features = self.data.view(v);
            let cached = match &self.config.graph_cache_dir {
                Some(dir) => {
                    let path = dir.join(format!("graph_k{k}_{}.json", features.content_hash()));
                    ViewGraph::load_cache(&path, features, k)?
                }
                None => None,
            };
            let graph = match cached {
                Some(g) => g,
                None => {
                    let g = build_view_graph(features, k)?;
                    if let Some(dir) = &self.config.graph_cache_dir {
                        fs::create_dir_all(dir).map_err(|e| Error::io(dir.clone(), e))?;
                        let path = dir.join(format!("graph_k{k}_{}.json", features.content_hash()));
                        g.save_cache(&path)?;
                    }
                    g
                }
            };
            graphs.push(graph);
        }
        self.graphs = Some(graphs);
        Ok(())
    }

    fn identification_round(&mut self, epoch: usize) -> Result<()> {
        let n = self.data.instances();
        let graphs = self.graphs.as_ref().expect("graphs exist in refine mode");

        // Clean (uncorrected) evidence over the whole set, per view.
        let evidences: Vec<Vec<Vec<f64>>> = (0..self.views)
            .map(|v| {
                (0..n)
                    .map(|i| self.nets[v].forward(self.data.view(v).row(i)).e)
                    .collect()
            })
            .collect();

        let mut blended = Vec::with_capacity(self.views);
        for v in 0..self.views {
            let div = per_instance_divergence(self.data.labels(), &evidences[v]);
            blended.push(view_consistency(&div, &graphs[v])?);
        }
        let (eta, fused) = fuse_consistencies(&blended)?;
        let found = separate_noisy(&fused, self.config.epsilon);
        let newly_flagged = found.iter().filter(|i| !self.noisy.contains(i)).count();
        self.noisy.extend(found);
        let total_flagged = self.noisy.len();
        if total_flagged > n - total_flagged {
            return Err(Error::Config(format!(
                "identification flagged {total_flagged} of {n} samples as noisy; more flagged \
                 than clean partners — raise epsilon or lower the noise rate"
            )));
        }

        let flagged: Vec<usize> = self.noisy.iter().copied().collect();
        let mut pseudo = Vec::with_capacity(flagged.len());
        for &i in &flagged {
            pseudo.push(pseudo_label(i, &evidences, &eta, graphs)?);
        }
        let mixes = refine_dataset(
            &mut self.data,
            &flagged,
            &pseudo,
            self.config.partner_strategy,
            &mut self.rng,
        )?;

        let entries: Vec<RoundEntry> = mixes
            .iter()
            .map(|m| RoundEntry {
                index: m.noisy_index,
                pseudo_class: m.pseudo_class,
                partner: m.clean_index,
                lambda: m.lambda,
                was_correct: self
                    .truth
                    .as_ref()
                    .map(|t| m.pseudo_class == t[m.noisy_index]),
            })
            .collect();
        let corrected = self.truth.as_ref().map(|_| {
            entries
                .iter()
                .filter(|e| e.was_correct == Some(true))
                .count()
        });
        let still_wrong = corrected.map(|c| entries.len() - c);
        let scores: Vec<ConsistencyEntry> = fused
            .iter()
            .enumerate()
            .map(|(i, &score)| ConsistencyEntry {
                index: i,
                score,
                flagged: self.noisy.contains(&i),
            })
            .collect();
        self.rounds.push(RoundLog {
            round: self.rounds.len() + 1,
            epoch,
            newly_flagged,
            total_flagged,
            corrected,
            still_wrong,
            entries,
            scores,
        });
        Ok(())
    }
}

fn accumulate(map: &mut BTreeMap<(usize, usize), Vec<f64>>, key: (usize, usize), grad: &[f64]) {
    match map.get_mut(&key) {
        Some(acc) => {
            for (a, &g) in acc.iter_mut().zip(grad) {
                *a += g;
            }
        }
        None => {
            map.insert(key, grad.to_vec());
        }
    }
}

/// Fuses the clean per-view opinions for one instance; noise matrices are
/// never applied at test time.
pub fn predict(state: &TrainState, features: &[&[f64]]) -> Result<Prediction> {
    if features.len() != state.nets.len() {
        return Err(Error::DimensionMismatch(format!(
            "expected features for {} views, got {}",
            state.nets.len(),
            features.len()
        )));
    }
    let mut per_view = Vec::with_capacity(features.len());
    for (net, &x) in state.nets.iter().zip(features) {
        if x.len() != net.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "view expects {} features, got {}",
                net.input_dim,
                x.len()
            )));
        }
        per_view.push(Evidence::new(net.forward(x).e)?.to_opinion());
    }
    let fused = combine_many(&per_view)?;
    let probabilities = fused.to_dirichlet()?.expected_probabilities();
    let class = argmax(&probabilities);
    Ok(Prediction {
        class,
        probabilities,
        uncertainty: fused.uncertainty(),
        per_view,
    })
}

/// Index of the largest value, ties toward the lower index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl TrainState {
    /// Serializes the state as JSON. `include_bank` distinguishes the full
    /// checkpoint from the inference-only model file.
    pub fn save(&self, path: &Path, include_bank: bool) -> Result<()> {
        let mut copy = self.clone();
        if !include_bank {
            copy.bank = None;
        }
        let file = Checkpoint {
            format_version: CHECKPOINT_VERSION,
            state: copy,
        };
        let text = serde_json::to_string(&file)
            .map_err(|e| Error::Data(format!("cannot serialize checkpoint: {e}")))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<TrainState> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: invalid checkpoint: {e}", path.display())))?;
        if file.format_version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!(
                "{}: checkpoint format {} unsupported (expected {})",
                path.display(),
                file.format_version,
                CHECKPOINT_VERSION
            )));
        }
        if let Some(bank) = &file.state.bank {
            bank.validate_shape()?;
        }
        let state = file.state;
        if state.nets.len() != state.view_dims.len() {
            return Err(Error::Data(format!(
                "{}: checkpoint has {} networks for {} views",
                path.display(),
                state.nets.len(),
                state.view_dims.len()
            )));
        }
        Ok(state)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    state: TrainState,
}

/// Per-run summary persisted as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub mode: Mode,
    pub instances: usize,
    pub views: usize,
    pub classes: usize,
    pub epochs_run: usize,
    pub final_noisy_count: usize,
    pub epoch_losses: Vec<EpochLog>,
    pub correction_curve: Vec<RoundSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub epoch: usize,
    pub newly_flagged: usize,
    pub total_flagged: usize,
    pub corrected: Option<usize>,
    pub still_wrong: Option<usize>,
}

/// Trains and writes the run directory: `checkpoint.json` (with bank),
/// `model.json` (inference-only), `summary.json`, and per-round
/// `consistency_round_R.csv` / `refine_round_R.csv` logs.
pub fn run_training(
    dataset: &MultiViewDataset,
    config: &TrainConfig,
    truth: Option<&BTreeMap<usize, usize>>,
    out_dir: &Path,
) -> Result<TrainOutput> {
    let output = train(dataset, config, truth)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    output.state.save(&out_dir.join("checkpoint.json"), true)?;
    output.state.save(&out_dir.join("model.json"), false)?;

    let summary = TrainSummary {
        mode: config.mode,
        instances: dataset.instances(),
        views: dataset.view_count(),
        classes: dataset.classes(),
        epochs_run: output.state.epochs_run,
        final_noisy_count: output.state.noisy_set.len(),
        epoch_losses: output.epoch_losses.clone(),
        correction_curve: output
            .rounds
            .iter()
            .map(|r| RoundSummary {
                round: r.round,
                epoch: r.epoch,
                newly_flagged: r.newly_flagged,
                total_flagged: r.total_flagged,
                corrected: r.corrected,
                still_wrong: r.still_wrong,
            })
            .collect(),
    };
    let path = out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Data(format!("cannot serialize summary: {e}")))?;
    fs::write(&path, text).map_err(|e| Error::io(path, e))?;

    for round in &output.rounds {
        write_consistency_csv(out_dir, round)?;
        write_refine_csv(out_dir, round)?;
    }
    Ok(output)
}

fn write_consistency_csv(dir: &Path, round: &RoundLog) -> Result<()> {
    let path = dir.join(format!("consistency_round_{}.csv", round.round));
    let mut out = String::from("index,score,flagged\n");
    for e in &round.scores {
        out.push_str(&format!("{},{},{}\n", e.index, e.score, e.flagged));
    }
    write_text(&path, &out)
}

fn write_refine_csv(dir: &Path, round: &RoundLog) -> Result<()> {
    let path = dir.join(format!("refine_round_{}.csv", round.round));
    let mut out = String::from("index,pseudo_class,partner,lambda,was_correct\n");
    for e in &round.entries {
        let correct = match e.was_correct {
            Some(true) => "true",
            Some(false) => "false",
            None => "",
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.index, e.pseudo_class, e.partner, e.lambda, correct
        ));
    }
    write_text(&path, &out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
