//! Closed-form coordinate solutions of the rescaled ℓ∞-SAM flow under
//! uniform-layer initialization `w⁽ⁱ⁾(0) = α`.
//!
//! Each coordinate follows the scalar ODE `ẇ = μ (w - ρ sign(w^{L-1}))^{L-1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative half-width of the guard band around a blow-up time.
const BLOWUP_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinfCoordinateCase {
    Below,
    At,
    Above,
}

impl LinfCoordinateCase {
    /// Exact comparison on the stored values.
    pub fn classify(alpha: f64, rho: f64) -> Self {
        if alpha < rho {
            LinfCoordinateCase::Below
        } else if alpha == rho {
            LinfCoordinateCase::At
        } else {
            LinfCoordinateCase::Above
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LinfLimit {
    ConvergeZero,
    /// Coordinates with `α_j > 0` settle at `β_j = value = ρ^L`.
    FixedPoint { value: f64 },
    LimitDirection(usize),
    NoUniqueMaximizer(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinfPrediction {
    pub limit: LinfLimit,
    pub blowup_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupPrediction {
    pub time: f64,
    /// Coordinates attaining the minimum blow-up time.
    pub indices: Vec<usize>,
}

fn check_scalar(mu: f64, rho: f64, alpha: f64, depth: usize) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha must be >= 0, got {alpha}")));
    }
    if depth == 0 {
        return Err(Error::Domain("depth must be >= 1".into()));
    }
    Ok(())
}

/// Blow-up time of one coordinate with `α > ρ` and `L > 2`.
fn coordinate_blowup(mu: f64, rho: f64, alpha: f64, depth: usize) -> f64 {
    let k = (depth - 2) as f64;
    1.0 / (k * mu * (alpha - rho).powf(k))
}

/// Exact `w_j(t)` of the rescaled ℓ∞ flow for one coordinate.
pub fn linf_w(mu: f64, rho: f64, alpha: f64, depth: usize, t: f64) -> Result<f64> {
    check_scalar(mu, rho, alpha, depth)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be finite and >= 0, got {t}")));
    }
    if depth == 1 {
        return Ok(alpha + mu * t);
    }
    if alpha == 0.0 || alpha == rho {
        return Ok(alpha);
    }
    if let Some(t_abs) = linf_absorption_time(mu, rho, alpha, depth) {
        if t >= t_abs {
            return Ok(0.0);
        }
    }
    if depth == 2 {
        return Ok(rho + (alpha - rho) * (mu * t).exp());
    }
    let k = (depth - 2) as f64;
    if alpha > rho {
        let t_blow = coordinate_blowup(mu, rho, alpha, depth);
        if t >= t_blow * (1.0 - BLOWUP_GUARD) {
            return Err(Error::BlowUp { time: t_blow });
        }
        let base = (alpha - rho).powf(-k) - k * mu * t;
        Ok(rho + base.powf(-1.0 / k))
    } else if depth % 2 == 0 {
        let base = (rho - alpha).powf(-k) - k * mu * t;
        Ok(rho - base.powf(-1.0 / k))
    } else {
        let base = (rho - alpha).powf(-k) + k * mu * t;
        Ok(rho - base.powf(-1.0 / k))
    }
}

/// Time at which a coordinate starting in `(0, ρ)` is absorbed at zero
/// (even depth only).
pub fn linf_absorption_time(mu: f64, rho: f64, alpha: f64, depth: usize) -> Option<f64> {
    if !(alpha > 0.0 && alpha < rho) || depth % 2 != 0 || depth < 2 {
        return None;
    }
    if depth == 2 {
        return Some((rho / (rho - alpha)).ln() / mu);
    }
    let k = (depth - 2) as f64;
    Some(((rho - alpha).powf(-k) - rho.powf(-k)) / (k * mu))
}

/// Earliest blow-up time over coordinates with `α_j > ρ` (depth `L > 2`).
pub fn linf_blowup_time(
    mu: &[f64],
    rho: f64,
    alpha: &[f64],
    depth: usize,
) -> Result<Option<BlowupPrediction>> {
    if depth <= 2 {
        return Err(Error::Unsupported(format!(
            "depth {depth} grows at most exponentially; no finite blow-up time"
        )));
    }
    check_vectors(mu, rho, alpha)?;
    let times: Vec<(usize, f64)> = alpha
        .iter()
        .enumerate()
        .filter(|(_, a)| **a > rho)
        .map(|(j, a)| (j, coordinate_blowup(mu[j], rho, *a, depth)))
        .collect();
    let Some(min) = times.iter().map(|x| x.1).reduce(f64::min) else {
        return Ok(None);
    };
    let indices = times
        .iter()
        .filter(|(_, t)| (t - min).abs() <= 1e-12 * min)
        .map(|(j, _)| *j)
        .collect();
    Ok(Some(BlowupPrediction { time: min, indices }))
}

fn check_vectors(mu: &[f64], rho: f64, alpha: &[f64]) -> Result<()> {
    if mu.len() != alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: alpha.len(),
        });
    }
    for (m, a) in mu.iter().zip(alpha) {
        check_scalar(*m, rho, *a, 2)?;
    }
    Ok(())
}

/// Predicted limit of `β(t)/‖β(t)‖` (or of `β(t)` when it stays bounded).
pub fn linf_limit_direction(
    mu: &[f64],
    rho: f64,
    alpha: &[f64],
    depth: usize,
) -> Result<LinfPrediction> {
    if depth < 2 {
        return Err(Error::Unsupported(
            "limit prediction needs depth >= 2".into(),
        ));
    }
    check_vectors(mu, rho, alpha)?;
    let above: Vec<usize> = (0..alpha.len()).filter(|&j| alpha[j] > rho).collect();
    if above.is_empty() {
        let limit = if depth % 2 == 0 && alpha.iter().all(|a| *a < rho) {
            LinfLimit::ConvergeZero
        } else {
            LinfLimit::FixedPoint {
                value: rho.powi(depth as i32),
            }
        };
        return Ok(LinfPrediction {
            limit,
            blowup_time: None,
        });
    }
    let k = (depth - 2) as i32;
    let score: Vec<f64> = above
        .iter()
        .map(|&j| mu[j] * (alpha[j] - rho).powi(k))
        .collect();
    let best = score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = above
        .iter()
        .zip(&score)
        .filter(|(_, s)| (best - **s).abs() <= 1e-12 * best)
        .map(|(j, _)| *j)
        .collect();
    let limit = if winners.len() == 1 {
        LinfLimit::LimitDirection(winners[0])
    } else {
        LinfLimit::NoUniqueMaximizer(winners)
    };
    let blowup_time = if depth > 2 {
        linf_blowup_time(mu, rho, alpha, depth)?.map(|b| b.time)
    } else {
        None
    };
    Ok(LinfPrediction { limit, blowup_time })
}
