use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;

/// Moment summary of `p_j ∝ μ_j² β_j` at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub p: Vec<f64>,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub m_l: f64,
    pub m_h: f64,
    /// `Γ₂ / (2Γ₁)`, `+∞` when `degenerate`.
    pub m_d: f64,
    pub degenerate: bool,
    pub n_theta: f64,
    pub m_c: f64,
}

impl MomentState {
    /// `ṁ_c = M₁ (m_c - m_H)` in rescaled time.
    pub fn mc_rate(&self) -> f64 {
        self.m1 * (self.m_c - self.m_h)
    }

    /// `ṁ_H = (2 m_c Γ₁ - Γ₂) / (2 M₁² m_c)` in rescaled time.
    pub fn mh_rate(&self) -> f64 {
        (2.0 * self.m_c * self.gamma1 - self.gamma2) / (2.0 * self.m1 * self.m1 * self.m_c)
    }
}

/// Moments at a strictly positive β.
pub fn moments(mu: &[f64], beta: &[f64], rho: f64) -> Result<MomentState> {
    if let Some(b) = beta.iter().find(|b| !(**b > 0.0)) {
        return Err(Error::Domain(format!("moments need beta > 0, found {b}")));
    }
    let log_beta: Vec<f64> = beta.iter().map(|b| b.ln()).collect();
    moments_log(mu, &log_beta, rho)
}

/// Moments from log β (stable when entries of β under- or overflow).
pub fn moments_log(mu: &[f64], log_beta: &[f64], rho: f64) -> Result<MomentState> {
    if mu.len() != log_beta.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: log_beta.len(),
        });
    }
    if mu.is_empty() || mu.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::Domain("mu must be nonempty and positive".into()));
    }
    if log_beta.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(Error::Domain("log beta must be finite or -inf".into()));
    }
    let w: Vec<f64> = mu
        .iter()
        .zip(log_beta)
        .map(|(m, lb)| 2.0 * m.ln() + lb)
        .collect();
    let lse = log_sum_exp(&w);
    if !lse.is_finite() {
        return Err(Error::Domain("beta is identically zero".into()));
    }
    let p: Vec<f64> = w.iter().map(|x| (x - lse).exp()).collect();
    let moment = |r: i32| -> f64 { p.iter().zip(mu).map(|(pj, m)| pj * m.powi(r)).sum() };
    let (m1, m2, m3, m4) = (moment(1), moment(2), moment(3), moment(4));
    // Pairwise forms of M₁M₃ - M₂² and M₁M₄ - M₂M₃ avoid cancellation.
    let mut gamma1 = 0.0;
    let mut gamma2 = 0.0;
    for j in 0..mu.len() {
        for k in (j + 1)..mu.len() {
            let diff = mu[j] - mu[k];
            let common = p[j] * p[k] * mu[j] * mu[k] * diff * diff;
            gamma1 += common;
            gamma2 += common * (mu[j] + mu[k]);
        }
    }
    let degenerate = gamma1 < 1e-300;
    let m_d = if degenerate {
        f64::INFINITY
    } else {
        gamma2 / (2.0 * gamma1)
    };
    let n_theta = std::f64::consts::SQRT_2 * (0.5 * lse).exp();
    let mu_min = mu.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MomentState {
        p,
        m1,
        m2,
        m3,
        m4,
        gamma1,
        gamma2,
        m_l: mu_min / 2.0,
        m_h: m2 / (2.0 * m1),
        m_d,
        degenerate,
        n_theta,
        m_c: n_theta / (2.0 * rho),
    })
}
