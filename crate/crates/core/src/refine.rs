//! Relabeling and mixup refinement of flagged noisy samples.
//!
//! A flagged sample gets a pseudo-label from neighbor-aggregated evidence,
//! then is blended with a clean partner; the blend always keeps at least
//! half of the noisy sample (lambda' >= 0.5) so the pseudo-label dominates
//! the mixed label. The refined sample overwrites the noisy one in place,
//! keeping the dataset size constant.

use crate::data::MultiViewDataset;
use crate::error::{Error, Result};
use crate::graph::ViewGraph;
use crate::loss::SoftLabel;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

/// How a clean mixup partner is chosen for each flagged sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PartnerStrategy {
    /// Uniform over unflagged samples, without replacement.
    #[default]
    Uniform,
    /// Closest unflagged sample in concatenated feature space, without
    /// replacement, flagged samples processed in ascending index order.
    Nearest,
}

/// Beta distribution shape for the mixup coefficient.
pub const MIXUP_BETA_SHAPE: f64 = 0.3;

/// One refined sample: provenance plus the blended features and label.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSample {
    pub noisy_index: usize,
    pub clean_index: usize,
    pub pseudo_class: usize,
    pub lambda: f64,
    pub features: Vec<Vec<f64>>,
    pub label: SoftLabel,
}

/// Pseudo-label of instance n from evidence aggregated over views and graph
/// neighbors: argmax_c sum_v eta_v (e_n^v[c] + sum_k s_nk e_{m_k}^v[c]),
/// ties toward the lowest class index.
pub fn pseudo_label(
    n: usize,
    evidences: &[Vec<Vec<f64>>],
    eta: &[f64],
    graphs: &[ViewGraph],
) -> Result<usize> {
    let views = evidences.len();
    if eta.len() != views || graphs.len() != views || views == 0 {
        return Err(Error::DimensionMismatch(
            "pseudo_label needs evidences, weights and graphs for the same views".into(),
        ));
    }
    let classes = evidences[0][n].len();
    let mut agg = vec![0.0; classes];
    for v in 0..views {
        let ev = &evidences[v];
        let mut viewsum = ev[n].clone();
        for nb in graphs[v].neighbors_of(n)? {
            for (a, &e) in viewsum.iter_mut().zip(&ev[nb.index]) {
                *a += nb.similarity * e;
            }
        }
        for (a, s) in agg.iter_mut().zip(&viewsum) {
            *a += eta[v] * s;
        }
    }
    let mut best = 0;
    for (c, &val) in agg.iter().enumerate().skip(1) {
        if val > agg[best] {
            best = c;
        }
    }
    Ok(best)
}

/// Blends a flagged sample with a clean partner. The raw lambda is folded to
/// lambda' = max(lambda, 1 - lambda); the same lambda' is applied to every
/// view and to the label.
pub fn mixup_pair(
    noisy_index: usize,
    clean_index: usize,
    noisy_features: &[&[f64]],
    clean_features: &[&[f64]],
    pseudo_class: usize,
    clean_label: &SoftLabel,
    lambda_raw: f64,
) -> Result<MixedSample> {
    if noisy_features.len() != clean_features.len() {
        return Err(Error::DimensionMismatch(
            "mixup needs the same views on both samples".into(),
        ));
    }
    let lambda = lambda_raw.max(1.0 - lambda_raw);
    let features = noisy_features
        .iter()
        .zip(clean_features)
        .map(|(nf, cf)| {
            nf.iter()
                .zip(cf.iter())
                .map(|(&a, &b)| lambda * a + (1.0 - lambda) * b)
                .collect()
        })
        .collect();
    let pseudo = SoftLabel::one_hot(pseudo_class, clean_label.class_count())?;
    let label = pseudo.mix(clean_label, lambda);
    Ok(MixedSample {
        noisy_index,
        clean_index,
        pseudo_class,
        lambda,
        features,
        label,
    })
}

/// Refines every flagged sample in place. Partners are clean (unflagged)
/// samples drawn without replacement; there must be at least as many clean
/// samples as flagged ones. Returns the applied mixes in flagged order.
pub fn refine_dataset<R: Rng>(
    dataset: &mut MultiViewDataset,
    noisy: &[usize],
    pseudo: &[usize],
    strategy: PartnerStrategy,
    rng: &mut R,
) -> Result<Vec<MixedSample>> {
    if noisy.len() != pseudo.len() {
        return Err(Error::DimensionMismatch(
            "one pseudo-label per flagged sample".into(),
        ));
    }
    let n = dataset.instances();
    for &i in noisy {
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "flagged index {i} out of range for {n} instances"
            )));
        }
    }
    let flagged: std::collections::BTreeSet<usize> = noisy.iter().copied().collect();
    let mut pool: Vec<usize> = (0..n).filter(|i| !flagged.contains(i)).collect();
    if noisy.len() > pool.len() {
        return Err(Error::Config(format!(
            "{} flagged samples but only {} clean partners; lower epsilon flags too much",
            noisy.len(),
            pool.len()
        )));
    }

    let beta = Beta::new(MIXUP_BETA_SHAPE, MIXUP_BETA_SHAPE)
        .expect("fixed beta shape parameters are valid");
    let mut mixes = Vec::with_capacity(noisy.len());
    for (&i, &p) in noisy.iter().zip(pseudo) {
        let slot = match strategy {
            PartnerStrategy::Uniform => rng.random_range(0..pool.len()),
            PartnerStrategy::Nearest => {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (s, &j) in pool.iter().enumerate() {
                    let mut d = 0.0;
                    for v in 0..dataset.view_count() {
                        let a = dataset.view(v).row(i);
                        let b = dataset.view(v).row(j);
                        d += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
                    }
                    if d < best_d {
                        best_d = d;
                        best = s;
                    }
                }
                best
            }
        };
        let partner = pool.swap_remove(slot);
        let lambda_raw = beta.sample(rng);

        let noisy_rows: Vec<&[f64]> = (0..dataset.view_count())
            .map(|v| dataset.view(v).row(i))
            .collect();
        let clean_rows: Vec<&[f64]> = (0..dataset.view_count())
            .map(|v| dataset.view(v).row(partner))
            .collect();
        let mix = mixup_pair(
            i,
            partner,
            &noisy_rows,
            &clean_rows,
            p,
            dataset.label(partner),
            lambda_raw,
        )?;
        drop(noisy_rows);
        drop(clean_rows);
        for (v, feats) in mix.features.iter().enumerate() {
            dataset.view_mut(v).row_mut(i).copy_from_slice(feats);
        }
        dataset.set_label(i, mix.label.clone())?;
        mixes.push(mix);
    }
    Ok(mixes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureMatrix;
    use crate::graph::build_view_graph;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lambda_is_folded_above_half() {
        let nf = [1.0, 0.0];
        let cf = [0.0, 1.0];
        let y = SoftLabel::one_hot(1, 2).unwrap();
        let mix = mixup_pair(0, 1, &[&nf], &[&cf], 0, &y, 0.3).unwrap();
        assert_abs_diff_eq!(mix.lambda, 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(mix.features[0][0], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(mix.features[0][1], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(mix.label.values()[0], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(mix.label.values()[1], 0.3, epsilon = 1e-15);
        // The pseudo-label side always dominates the mixed label.
        assert_eq!(mix.label.hard(), 0);
    }

    #[test]
    fn pseudo_label_aggregates_neighbor_evidence() {
        // Two instances, one view. Instance 0 has weak class-1 evidence but
        // its close neighbor has strong class-0 evidence.
        let f = FeatureMatrix::new(3, 1, vec![0.0, 0.1, 50.0]).unwrap();
        let g = build_view_graph(&f, 1).unwrap();
        let s = g.neighbors_of(0).unwrap()[0].similarity;
        let ev = vec![vec![vec![0.0, 1.0], vec![10.0, 0.0], vec![0.0, 0.0]]];
        let got = pseudo_label(0, &ev, &[1.0], std::slice::from_ref(&g)).unwrap();
        // Aggregated: class 0 gets s * 10, class 1 gets 1.
        assert_eq!(got, if s * 10.0 > 1.0 { 0 } else { 1 });
        assert_eq!(got, 0);
    }

    #[test]
    fn pseudo_label_breaks_ties_low() {
        let f = FeatureMatrix::new(2, 1, vec![0.0, 100.0]).unwrap();
        let g = build_view_graph(&f, 1).unwrap();
        let ev = vec![vec![vec![2.0, 2.0], vec![0.0, 0.0]]];
        assert_eq!(
            pseudo_label(0, &ev, &[1.0], std::slice::from_ref(&g)).unwrap(),
            0
        );
    }

    fn toy_dataset(n: usize) -> MultiViewDataset {
        let v0 = FeatureMatrix::new(n, 2, (0..2 * n).map(|x| x as f64).collect()).unwrap();
        let v1 = FeatureMatrix::new(n, 1, (0..n).map(|x| -(x as f64)).collect()).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        MultiViewDataset::from_hard_labels("toy", 3, vec![v0, v1], &labels).unwrap()
    }

    #[test]
    fn refinement_overwrites_in_place_without_replacement() {
        let mut ds = toy_dataset(10);
        let before = ds.clone();
        let noisy = vec![2, 5];
        let pseudo = vec![0, 1];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mixes =
            refine_dataset(&mut ds, &noisy, &pseudo, PartnerStrategy::Uniform, &mut rng).unwrap();
        assert_eq!(ds.instances(), 10);
        assert_eq!(mixes.len(), 2);
        assert_ne!(mixes[0].clean_index, mixes[1].clean_index);
        for mix in &mixes {
            assert!(!noisy.contains(&mix.clean_index));
            assert!(mix.lambda >= 0.5);
            // Flagged rows changed, partner rows untouched.
            assert_ne!(
                ds.view(0).row(mix.noisy_index),
                before.view(0).row(mix.noisy_index)
            );
            assert_eq!(
                ds.view(0).row(mix.clean_index),
                before.view(0).row(mix.clean_index)
            );
            // Mixed features interpolate noisy toward partner.
            let expect = mix.lambda * before.view(0).row(mix.noisy_index)[0]
                + (1.0 - mix.lambda) * before.view(0).row(mix.clean_index)[0];
            assert_abs_diff_eq!(ds.view(0).row(mix.noisy_index)[0], expect, epsilon = 1e-12);
        }
        // Unflagged labels untouched.
        assert_eq!(ds.label(0), before.label(0));
    }

    #[test]
    fn nearest_strategy_picks_closest_clean_sample() {
        let mut ds = toy_dataset(6);
        let noisy = vec![3];
        let pseudo = vec![2];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mixes =
            refine_dataset(&mut ds, &noisy, &pseudo, PartnerStrategy::Nearest, &mut rng).unwrap();
        // Features are on a line, so the nearest unflagged neighbors of
        // index 3 are 2 and 4; both at equal distance, the scan order picks
        // the first (lower index).
        assert_eq!(mixes[0].clean_index, 2);
    }

    #[test]
    fn too_many_flagged_samples_is_a_config_error() {
        let mut ds = toy_dataset(5);
        let noisy = vec![0, 1, 2];
        let pseudo = vec![0, 0, 0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = refine_dataset(&mut ds, &noisy, &pseudo, PartnerStrategy::Uniform, &mut rng);
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
