//! ℓ2-SAM analysis on the balanced two-layer manifold and its depth-L
//! extension.

mod bounds;
mod depth;
mod moments;
mod regime;
mod thresholds;

pub use bounds::{i_bounds, i_of_trajectory, IBounds};
pub use depth::{depth_l_effective_scale, phi, DepthScale};
pub use moments::{moments, moments_log, MomentState};
pub use regime::{
    estimate_alpha1, growth_rates, growth_rates_at, regime_certificate, regime_classify,
    Alpha1Config, Alpha1Estimate, ProbeOutcome, ProbeRecord, RegimeCertificate, RegimeLabel,
};
pub use thresholds::{
    amplification_time, lb_amplification, lb_amplification_checked, lb_formula, phi_r, staircase,
    thresholds, LbValue, StaircaseStep, ThresholdReport,
};
