//! Trusted multi-view evidential classification under instance-dependent
//! label noise.
//!
//! The library models each view's classifier output as Dirichlet evidence,
//! converts it to subjective-logic opinions, and fuses views with a
//! conflict-renormalized combination rule. Label noise is handled by
//! per-instance, per-view transition matrices that forward-correct the
//! evidence during training, regularized so their diagonals track model
//! uncertainty and their off-diagonals stay smooth over a feature-space
//! neighbor graph. Suspect samples are flagged by a graph-blended
//! divergence score and rebuilt by mixing them with trusted partners.
//!
//! Modules are layered bottom-up:
//!
//! * [`special`] — digamma / log-gamma / trigamma primitives.
//! * [`opinion`] — evidence, Dirichlet parameters, opinions, fusion.
//! * [`noise`] — transition matrices, the per-instance bank, projection.
//! * [`loss`] — individual loss terms and soft labels.
//! * [`data`] — multi-view datasets, on-disk format, splitting.
//! * [`graph`] — k-nearest-neighbor similarity graphs per view.
//! * [`identify`] — divergence scoring and noisy-sample separation.
//! * [`refine`] — pseudo-labeling and mixup re-refinement.
//! * [`net`] — per-view evidence networks.
//! * [`optim`] — Adam.
//! * [`objective`] — the assembled per-sample loss and its gradients.
//! * [`config`] — training configuration and mode selection.
//! * [`synthetic`] — synthetic multi-view dataset generation.
//! * [`noisegen`] — instance-dependent label corruption.
//! * [`train`] — the full training loop, checkpoints, prediction.
//! * [`metrics`] — evaluation reports.
//! * [`report`] — run-summary assembly.

pub mod config;
pub mod data;
pub mod error;
pub mod graph;
pub mod identify;
pub mod loss;
pub mod metrics;
pub mod net;
pub mod noise;
pub mod noisegen;
pub mod objective;
pub mod opinion;
pub mod optim;
pub mod refine;
pub mod report;
pub mod special;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
