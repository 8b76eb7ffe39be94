//! Numerical laboratory for sharpness-aware minimization (SAM) on L-layer
//! diagonal linear networks trained with the logistic loss.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: loss, gradient, perturbation and predictor kernels.
//! * [`dynamics`]: discrete SAM steps, explicit-Euler flows (original and
//!   rescaled time) and the reduced balanced ℓ2 flow in log domain.
//! * [`linf`]: closed-form coordinate solutions of the rescaled ℓ∞-SAM flow.
//! * [`l2`]: moment machinery, thresholds, `I(t)` bounds, amplification lower
//!   bounds, the staircase and the depth-L effective scales for ℓ2-SAM.
//! * [`maxmargin`]: exact small-instance ℓ1 / ℓ2 hard-margin solvers.
//! * [`datagen`]: deterministic datasets and initializations.
//! * [`experiments`]: heatmap sweeps, amplification curves and file export.
//!
//! Coordinates are indexed from zero in the API; exported files and the CLI
//! use one-based indices.

pub mod datagen;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod l2;
pub mod linf;
pub mod maxmargin;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod selftest;

pub use dynamics::{
    balanced_l2_flow, balancedness_gap, integrate, sam_step, FlowKind, SimConfig,
    TrajectoryOutcome, TrajectoryRecord,
};
pub use error::{Error, Result};
pub use model::{
    dataset_loss, logistic_loss, loss_slope, param_gradient, perturbation, predictor, Example,
    FeatureVector, Label, LabeledDataset, LayeredVector, NetworkState, PerturbationKind,
};
