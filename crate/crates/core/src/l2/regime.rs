use serde::{Deserialize, Serialize};

use crate::dynamics::BalancedL2;
use crate::error::{Error, Result};
use crate::model::FeatureVector;
use crate::numeric::{argmax, log_sum_exp};

use super::moments::moments;
use super::thresholds::thresholds;

/// `r_j = 2 μ_j (1 - ρ μ_j / n_θ)` with `n_θ = √(2 Σ μ² β)`.
pub fn growth_rates(mu: &[f64], beta: &[f64], rho: f64) -> Result<(Vec<f64>, usize)> {
    let m = moments(mu, beta, rho)?;
    Ok(growth_rates_at(mu, m.n_theta, rho))
}

/// Growth rates for a given `n_θ`; argmax uses the smallest index on ties.
pub fn growth_rates_at(mu: &[f64], n_theta: f64, rho: f64) -> (Vec<f64>, usize) {
    let r: Vec<f64> = mu
        .iter()
        .map(|m| 2.0 * m * (1.0 - rho * m / n_theta))
        .collect();
    let j = argmax(&r).unwrap_or(0);
    (r, j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeLabel {
    Regime1a,
    Regime1b,
    Regime2a,
    Regime2b,
    Regime3,
}

impl RegimeLabel {
    pub fn name(self) -> &'static str {
        match self {
            RegimeLabel::Regime1a => "1a",
            RegimeLabel::Regime1b => "1b",
            RegimeLabel::Regime2a => "2a",
            RegimeLabel::Regime2b => "2b",
            RegimeLabel::Regime3 => "3",
        }
    }
}

/// Interval lookup against `(α₀, α₁, α_HB, α₂)`; boundaries go to the lower
/// regime.
pub fn regime_classify(mu: &FeatureVector, rho: f64, alpha: f64, alpha1: f64) -> Result<RegimeLabel> {
    let t = thresholds(mu, rho)?;
    Ok(if alpha <= t.alpha0 {
        RegimeLabel::Regime1a
    } else if alpha <= alpha1 {
        RegimeLabel::Regime1b
    } else if alpha <= t.alpha_hb {
        RegimeLabel::Regime2a
    } else if alpha <= t.alpha2 {
        RegimeLabel::Regime2b
    } else {
        RegimeLabel::Regime3
    })
}

/// The initial-time levels that decide the regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeCertificate {
    pub label: RegimeLabel,
    pub m_c0: f64,
    pub m_l: f64,
    pub m_h0: f64,
    /// `(μ_{d-1} + μ_d)/2`.
    pub m_top: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha_hb: f64,
    pub alpha2: f64,
}

pub fn regime_certificate(
    mu: &FeatureVector,
    rho: f64,
    alpha: f64,
    alpha1: f64,
) -> Result<RegimeCertificate> {
    let t = thresholds(mu, rho)?;
    let v = mu.values();
    let m = moments(v, &vec![alpha * alpha; v.len()], rho)?;
    Ok(RegimeCertificate {
        label: regime_classify(mu, rho, alpha, alpha1)?,
        m_c0: m.m_c,
        m_l: m.m_l,
        m_h0: m.m_h,
        m_top: (v[v.len() - 2] + v[v.len() - 1]) / 2.0,
        alpha0: t.alpha0,
        alpha1,
        alpha_hb: t.alpha_hb,
        alpha2: t.alpha2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha1Config {
    pub dt: f64,
    pub t_max: f64,
    pub tol: f64,
    /// Stop when the bracket is narrower than `rel_width · α_HB`.
    pub rel_width: f64,
}

impl Default for Alpha1Config {
    fn default() -> Self {
        Alpha1Config {
            dt: 1e-4,
            t_max: 20.0,
            tol: 1e-9,
            rel_width: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeOutcome {
    /// `m_c` reached `m_L` first: the run collapses.
    FloorFirst,
    /// `m_c` reached `m_H` first: amplification regime.
    CeilingFirst,
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub alpha: f64,
    pub outcome: ProbeOutcome,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alpha1Estimate {
    pub alpha1: f64,
    pub bracket: (f64, f64),
    pub probes: Vec<ProbeRecord>,
    pub unresolved: usize,
}

/// Integrates the balanced flow until `m_c` meets the floor `m_L` or the
/// ceiling `m_H`.
fn probe(mu: &[f64], rho: f64, alpha: f64, cfg: &Alpha1Config, t_max: f64) -> Result<ProbeRecord> {
    let d = mu.len();
    let mut flow = BalancedL2::new(mu, &vec![alpha; d], rho, cfg.dt, true)?;
    let m_l = mu[0] / 2.0;
    let log_mu2: Vec<f64> = mu.iter().map(|m| 2.0 * m.ln()).collect();
    let mut w = vec![0.0; d];
    let n_steps = (t_max / cfg.dt).ceil() as usize;
    for _ in 0..=n_steps {
        let log_n = flow.log_ntheta();
        let m_c = log_n.exp() / (2.0 * rho);
        for ((wj, lm), lb) in w.iter_mut().zip(&log_mu2).zip(flow.raw_state()) {
            *wj = lm + lb;
        }
        let lse = log_sum_exp(&w);
        let (mut m1, mut m2) = (0.0, 0.0);
        for (wj, m) in w.iter().zip(mu) {
            let p = (wj - lse).exp();
            m1 += p * m;
            m2 += p * m * m;
        }
        let m_h = m2 / (2.0 * m1);
        let outcome = if m_c <= m_l + cfg.tol {
            Some(ProbeOutcome::FloorFirst)
        } else if m_c >= m_h - cfg.tol {
            Some(ProbeOutcome::CeilingFirst)
        } else {
            None
        };
        if let Some(outcome) = outcome {
            return Ok(ProbeRecord {
                alpha,
                outcome,
                time: flow.t(),
            });
        }
        if flow.advance().is_err() {
            break;
        }
    }
    Ok(ProbeRecord {
        alpha,
        outcome: ProbeOutcome::Unresolved,
        time: flow.t(),
    })
}

fn probe_widening(mu: &[f64], rho: f64, alpha: f64, cfg: &Alpha1Config) -> Result<ProbeRecord> {
    let first = probe(mu, rho, alpha, cfg, cfg.t_max)?;
    if first.outcome != ProbeOutcome::Unresolved {
        return Ok(first);
    }
    probe(mu, rho, alpha, cfg, 4.0 * cfg.t_max)
}

/// Locates the boundary α₁ between collapse and amplification by bisection
/// on `(α₀, α_HB)`.
pub fn estimate_alpha1(mu: &FeatureVector, rho: f64, cfg: &Alpha1Config) -> Result<Alpha1Estimate> {
    let th = thresholds(mu, rho)?;
    if !(cfg.dt > 0.0 && cfg.t_max > cfg.dt && cfg.rel_width > 0.0) {
        return Err(Error::Domain(format!("invalid alpha1 config {cfg:?}")));
    }
    let v = mu.values();
    let (mut lo, mut hi) = (th.alpha0, th.alpha_hb);
    let width = cfg.rel_width * th.alpha_hb;
    let mut probes = Vec::new();
    let mut unresolved = 0;
    // Fallback probe positions inside the bracket when the midpoint stalls.
    const FRACTIONS: [f64; 5] = [0.5, 0.25, 0.75, 0.125, 0.875];
    'outer: while hi - lo > width {
        for frac in FRACTIONS {
            let a = lo + frac * (hi - lo);
            let rec = probe_widening(v, rho, a, cfg)?;
            probes.push(rec);
            match rec.outcome {
                ProbeOutcome::FloorFirst => {
                    lo = a;
                    continue 'outer;
                }
                ProbeOutcome::CeilingFirst => {
                    hi = a;
                    continue 'outer;
                }
                ProbeOutcome::Unresolved => unresolved += 1,
            }
        }
        break;
    }
    Ok(Alpha1Estimate {
        alpha1: 0.5 * (lo + hi),
        bracket: (lo, hi),
        probes,
        unresolved,
    })
}
