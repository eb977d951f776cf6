//! Per-sample objective and its analytic gradients.
//!
//! One sample's loss couples every piece of the model: each view's evidence
//! passes through its noise matrix, the corrected opinions fuse across
//! views, and Dirichlet losses apply to both the fused and per-view
//! parameters, plus matrix constraints tied to uncertainty, graph neighbors
//! and cross-view agreement. Gradients are derived by hand and verified
//! against central finite differences in the acceptance suite, so forward
//! and backward share the cached intermediate state defined here.

use crate::error::Result;
use crate::loss::{
    ace_loss, consistency_loss, diag_constraint, kl_regularizer, masked_alpha, mse_mixed_loss,
    offdiag_constraint, SoftLabel,
};
use crate::net::{ForwardCache, NetGrads, ViewNet};
use crate::opinion::combine_raw;
use crate::special::trigamma_unchecked;

/// Loss-term switches for the current training phase. Warmup uses all-zero
/// weights (pure fused + per-view evidence fit); the mixup regression term
/// applies only to samples flagged as noisy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseWeights {
    /// Annealing factor on the KL regularizer.
    pub delta: f64,
    /// Weight of the diagonal/off-diagonal matrix constraints.
    pub beta: f64,
    /// Weight of the cross-view consistency term.
    pub gamma: f64,
    /// Adds the label/probability regression term for refined samples.
    pub include_mse: bool,
}

impl PhaseWeights {
    pub fn warmup() -> PhaseWeights {
        PhaseWeights {
            delta: 0.0,
            beta: 0.0,
            gamma: 0.0,
            include_mse: false,
        }
    }
}

/// Borrowed view of everything one sample's loss depends on.
pub struct SampleInput<'a> {
    /// Per-view feature rows.
    pub features: Vec<&'a [f64]>,
    pub label: &'a SoftLabel,
    /// Per-view noise matrices of this instance (row-major C x C).
    pub own_t: Vec<&'a [f64]>,
    /// Per-view graph neighbors: (neighbor matrix, similarity).
    pub neighbor_t: Vec<Vec<(&'a [f64], f64)>>,
    /// Per-view, per-class mean uncertainty of same-labeled batch samples;
    /// None marks classes absent from the batch.
    pub batch_mean_u: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    /// Dirichlet loss on the fused parameters.
    pub fused: f64,
    /// Sum of per-view Dirichlet losses.
    pub per_view: f64,
    /// Sum of per-view diagonal constraints (unweighted).
    pub diag: f64,
    /// Sum of per-view off-diagonal constraints (unweighted).
    pub offdiag: f64,
    /// Cross-view consistency (unweighted).
    pub consistency: f64,
    /// Mixup regression term (zero when not included).
    pub mse: f64,
}

/// Gradients of one sample's total loss.
pub struct SampleGradients {
    pub nets: Vec<NetGrads>,
    /// Per-view gradient on this instance's noise matrix.
    pub own_t: Vec<Vec<f64>>,
    /// Per-view, per-neighbor gradients, aligned with `SampleInput::neighbor_t`.
    pub neighbor_t: Vec<Vec<Vec<f64>>>,
}

struct ViewState {
    cache: ForwardCache,
    s_tilde: f64,
    b_tilde: Vec<f64>,
    u_tilde: f64,
    alpha_tilde: Vec<f64>,
    /// Clean expected probabilities, filled only when the mse term is on.
    p_clean: Vec<f64>,
    s_clean: f64,
}

struct SampleState {
    views: Vec<ViewState>,
    /// Partial fused opinions: accs[i] folds views 0..=i.
    acc_b: Vec<Vec<f64>>,
    acc_u: Vec<f64>,
    /// Denominator of the combination producing accs[i] (unused at i = 0).
    denom: Vec<f64>,
    fused_alpha: Vec<f64>,
}

fn forward(nets: &[ViewNet], input: &SampleInput, w: &PhaseWeights) -> Result<SampleState> {
    let views = nets.len();
    let classes = nets[0].classes;
    let mut states = Vec::with_capacity(views);
    for ((net, &feats), &t) in nets.iter().zip(&input.features).zip(&input.own_t) {
        let cache = net.forward(feats);
        let mut e_tilde = vec![0.0; classes];
        for c in 0..classes {
            let ev = cache.e[c];
            if ev != 0.0 {
                let row = &t[c * classes..(c + 1) * classes];
                for (o, &tcj) in e_tilde.iter_mut().zip(row) {
                    *o += tcj * ev;
                }
            }
        }
        let s_tilde: f64 = e_tilde.iter().sum::<f64>() + classes as f64;
        let b_tilde: Vec<f64> = e_tilde.iter().map(|&x| x / s_tilde).collect();
        let u_tilde = classes as f64 / s_tilde;
        let alpha_tilde: Vec<f64> = e_tilde.iter().map(|&x| x + 1.0).collect();
        let (p_clean, s_clean) = if w.include_mse {
            let s: f64 = cache.e.iter().sum::<f64>() + classes as f64;
            (cache.e.iter().map(|&x| (x + 1.0) / s).collect(), s)
        } else {
            (Vec::new(), 0.0)
        };
        states.push(ViewState {
            cache,
            s_tilde,
            b_tilde,
            u_tilde,
            alpha_tilde,
            p_clean,
            s_clean,
        });
    }

    let mut acc_b = Vec::with_capacity(views);
    let mut acc_u = Vec::with_capacity(views);
    let mut denom = Vec::with_capacity(views);
    acc_b.push(states[0].b_tilde.clone());
    acc_u.push(states[0].u_tilde);
    denom.push(1.0);
    for st in states.iter().skip(1) {
        let (b, u, d) = combine_raw(
            acc_b.last().unwrap(),
            *acc_u.last().unwrap(),
            &st.b_tilde,
            st.u_tilde,
        )?;
        acc_b.push(b);
        acc_u.push(u);
        denom.push(d);
    }
    let fb = acc_b.last().unwrap();
    let fu = *acc_u.last().unwrap();
    let strength = classes as f64 / fu;
    let fused_alpha = fb.iter().map(|&b| b * strength + 1.0).collect();
    Ok(SampleState {
        views: states,
        acc_b,
        acc_u,
        denom,
        fused_alpha,
    })
}

fn breakdown(state: &SampleState, input: &SampleInput, w: &PhaseWeights) -> LossBreakdown {
    let classes = state.fused_alpha.len();
    let yh = input.label.hard();
    let fused = ace_loss(&state.fused_alpha, input.label)
        + w.delta * kl_regularizer(&state.fused_alpha, yh);
    let mut per_view = 0.0;
    let mut diag = 0.0;
    let mut offdiag = 0.0;
    for (v, st) in state.views.iter().enumerate() {
        per_view +=
            ace_loss(&st.alpha_tilde, input.label) + w.delta * kl_regularizer(&st.alpha_tilde, yh);
        if w.beta != 0.0 {
            diag += diag_constraint(
                input.own_t[v],
                classes,
                st.u_tilde,
                yh,
                &input.batch_mean_u[v],
            );
            offdiag += offdiag_constraint(input.own_t[v], classes, &input.neighbor_t[v]);
        }
    }
    let consistency = if w.gamma != 0.0 {
        consistency_loss(&input.own_t, classes)
    } else {
        0.0
    };
    let mse = if w.include_mse {
        let probs: Vec<Vec<f64>> = state.views.iter().map(|st| st.p_clean.clone()).collect();
        mse_mixed_loss(input.label, &probs)
    } else {
        0.0
    };
    LossBreakdown {
        total: fused + per_view + w.beta * (diag + offdiag) + w.gamma * consistency + mse,
        fused,
        per_view,
        diag,
        offdiag,
        consistency,
        mse,
    }
}

/// Forward-only evaluation of one sample's loss.
pub fn sample_loss(
    nets: &[ViewNet],
    input: &SampleInput,
    w: &PhaseWeights,
) -> Result<LossBreakdown> {
    let state = forward(nets, input, w)?;
    Ok(breakdown(&state, input, w))
}

/// Adds d(ace)/d(alpha) to `out`.
fn ace_grad(alpha: &[f64], label: &[f64], out: &mut [f64]) {
    let s: f64 = alpha.iter().sum();
    let ts = trigamma_unchecked(s);
    for ((o, &a), &y) in out.iter_mut().zip(alpha).zip(label) {
        *o += ts - y * trigamma_unchecked(a);
    }
}

/// Adds delta * d(KL to uniform after masking)/d(alpha) to `out`. The masked
/// component carries no gradient.
fn kl_grad(alpha: &[f64], hard_label: usize, delta: f64, out: &mut [f64]) {
    if delta == 0.0 {
        return;
    }
    let masked = masked_alpha(alpha, hard_label);
    let total: f64 = masked.iter().sum();
    let excess = total - masked.len() as f64;
    let tg_total = trigamma_unchecked(total);
    for (j, (o, &a)) in out.iter_mut().zip(&masked).enumerate() {
        if j == hard_label {
            continue;
        }
        *o += delta * ((a - 1.0) * trigamma_unchecked(a) - excess * tg_total);
    }
}

/// Backward through one combination step. Given gradients on the output
/// opinion, returns gradients on both operands.
#[allow(clippy::too_many_arguments)]
fn combine_backward(
    b1: &[f64],
    u1: f64,
    b2: &[f64],
    u2: f64,
    out_b: &[f64],
    out_u: f64,
    denom: f64,
    gb: &[f64],
    gu: f64,
) -> (Vec<f64>, f64, Vec<f64>, f64) {
    let sum1: f64 = b1.iter().sum();
    let sum2: f64 = b2.iter().sum();
    let g_conflict = (gb.iter().zip(out_b).map(|(&g, &b)| g * b).sum::<f64>() + gu * out_u) / denom;
    let mut db1 = vec![0.0; b1.len()];
    let mut db2 = vec![0.0; b2.len()];
    let mut dot_gb_b2 = 0.0;
    let mut dot_gb_b1 = 0.0;
    for i in 0..b1.len() {
        db1[i] = gb[i] * (b2[i] + u2) / denom + g_conflict * (sum2 - b2[i]);
        db2[i] = gb[i] * (b1[i] + u1) / denom + g_conflict * (sum1 - b1[i]);
        dot_gb_b2 += gb[i] * b2[i];
        dot_gb_b1 += gb[i] * b1[i];
    }
    let du1 = (dot_gb_b2 + gu * u2) / denom;
    let du2 = (dot_gb_b1 + gu * u1) / denom;
    (db1, du1, db2, du2)
}

/// One sample's loss and analytic gradients with respect to every network
/// weight, this instance's matrices, and its neighbors' matrices.
pub fn sample_loss_grad(
    nets: &[ViewNet],
    input: &SampleInput,
    w: &PhaseWeights,
) -> Result<(LossBreakdown, SampleGradients)> {
    let views = nets.len();
    let classes = nets[0].classes;
    let yh = input.label.hard();
    let state = forward(nets, input, w)?;
    let losses = breakdown(&state, input, w);

    let mut grads = SampleGradients {
        nets: nets.iter().map(NetGrads::zeros).collect(),
        own_t: vec![vec![0.0; classes * classes]; views],
        neighbor_t: input
            .neighbor_t
            .iter()
            .map(|nbs| vec![vec![0.0; classes * classes]; nbs.len()])
            .collect(),
    };

    // Fused Dirichlet loss -> fused alpha -> fused opinion.
    let mut d_alpha = vec![0.0; classes];
    ace_grad(&state.fused_alpha, input.label.values(), &mut d_alpha);
    kl_grad(&state.fused_alpha, yh, w.delta, &mut d_alpha);
    let fused_b = state.acc_b.last().unwrap();
    let fused_u = *state.acc_u.last().unwrap();
    let strength = classes as f64 / fused_u;
    let mut gb: Vec<f64> = d_alpha.iter().map(|&g| g * strength).collect();
    let mut gu: f64 = -(strength / fused_u)
        * d_alpha
            .iter()
            .zip(fused_b)
            .map(|(&g, &b)| g * b)
            .sum::<f64>();

    // Unfold the combination right to left; d_views collects per-view
    // opinion gradients.
    let mut d_views: Vec<(Vec<f64>, f64)> = vec![(vec![0.0; classes], 0.0); views];
    for i in (1..views).rev() {
        let (db1, du1, db2, du2) = combine_backward(
            &state.acc_b[i - 1],
            state.acc_u[i - 1],
            &state.views[i].b_tilde,
            state.views[i].u_tilde,
            &state.acc_b[i],
            state.acc_u[i],
            state.denom[i],
            &gb,
            gu,
        );
        d_views[i] = (db2, du2);
        gb = db1;
        gu = du1;
    }
    d_views[0] = (gb, gu);

    // Consistency term touches every view's own matrix jointly.
    if w.gamma != 0.0 && views > 0 {
        let vf = views as f64;
        for idx in 0..classes * classes {
            let mean = input.own_t.iter().map(|t| t[idx]).sum::<f64>() / vf;
            let sign_sum: f64 = input
                .own_t
                .iter()
                .map(|t| (t[idx] - mean).signum_or_zero())
                .sum();
            for (v, t) in input.own_t.iter().enumerate() {
                let sign = (t[idx] - mean).signum_or_zero();
                grads.own_t[v][idx] += w.gamma * (sign - sign_sum / vf) / vf;
            }
        }
    }

    for v in 0..views {
        let st = &state.views[v];
        let (view_gb, mut view_gu) = std::mem::take(&mut d_views[v]);

        // Diagonal constraint: label class couples u and t_yy, other
        // classes couple their diagonal to the batch mean u.
        if w.beta != 0.0 {
            let t = input.own_t[v];
            let tyy = t[yh * classes + yh];
            let resid = (1.0 - st.u_tilde) - tyy;
            view_gu += w.beta * (-2.0) * resid;
            grads.own_t[v][yh * classes + yh] += w.beta * (-2.0) * resid;
            for c in 0..classes {
                if c == yh {
                    continue;
                }
                if let Some(mean_u) = input.batch_mean_u[v][c] {
                    let r = (1.0 - mean_u) - t[c * classes + c];
                    grads.own_t[v][c * classes + c] += w.beta * (-2.0) * r;
                }
            }

            // Off-diagonal smoothness toward neighbor matrices.
            for (k, &(tk, sim)) in input.neighbor_t[v].iter().enumerate() {
                for r in 0..classes {
                    for j in 0..classes {
                        if r == j {
                            continue;
                        }
                        let idx = r * classes + j;
                        let diff = t[idx] - tk[idx];
                        grads.own_t[v][idx] += w.beta * 2.0 * sim * diff;
                        grads.neighbor_t[v][k][idx] -= w.beta * 2.0 * sim * diff;
                    }
                }
            }
        }

        // Per-view Dirichlet loss acts on alpha~ = e~ + 1 directly.
        let mut d_e_tilde = vec![0.0; classes];
        ace_grad(&st.alpha_tilde, input.label.values(), &mut d_e_tilde);
        kl_grad(&st.alpha_tilde, yh, w.delta, &mut d_e_tilde);

        // Opinion path: b~ = e~/S, u~ = C/S.
        let dot_gb_b: f64 = view_gb.iter().zip(&st.b_tilde).map(|(&g, &b)| g * b).sum();
        for j in 0..classes {
            d_e_tilde[j] += (view_gb[j] - dot_gb_b - view_gu * st.u_tilde) / st.s_tilde;
        }

        // e~ = T^t e: gradient splits between the evidence and the matrix.
        let mut d_e = vec![0.0; classes];
        let t = input.own_t[v];
        for c in 0..classes {
            let row = &t[c * classes..(c + 1) * classes];
            let mut acc = 0.0;
            for (j, &dj) in d_e_tilde.iter().enumerate() {
                acc += row[j] * dj;
                grads.own_t[v][c * classes + j] += st.cache.e[c] * dj;
            }
            d_e[c] = acc;
        }

        // Mixup regression on the clean expected probabilities.
        if w.include_mse {
            let vf = views as f64;
            let mut dp = vec![0.0; classes];
            for ((d, &y), &p) in dp.iter_mut().zip(input.label.values()).zip(&st.p_clean) {
                *d = -(2.0 / vf) * (y - p);
            }
            let dot: f64 = dp.iter().zip(&st.p_clean).map(|(&d, &p)| d * p).sum();
            for j in 0..classes {
                d_e[j] += (dp[j] - dot) / st.s_clean;
            }
        }

        nets[v].backward(input.features[v], &st.cache, &d_e, &mut grads.nets[v]);
    }

    Ok((losses, grads))
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    /// signum with sign(0) = 0, the subgradient choice for |x| at the kink.
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}
