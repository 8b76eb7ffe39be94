use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::model::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IBounds {
    /// `None` when the supplied `I(t)/t` fails the validity condition.
    /// `+∞` when the log argument is nonpositive.
    pub lower: Option<f64>,
    /// `+∞` when the log argument is nonpositive (see `upper_finite`).
    pub upper: f64,
    pub upper_finite: bool,
    /// Whether `I(t)/t ≥ 1/(ρ(μ₁+μ₂))`; `true` when no `I(t)` is supplied.
    pub lower_condition_holds: bool,
}

/// `c · log(1 / (a e^{-k t} + 1 - a))`, `+∞` for a nonpositive argument.
fn log_bound(c: f64, a: f64, k: f64, t: f64) -> f64 {
    let arg = a * (-k * t).exp() + 1.0 - a;
    if arg <= 0.0 {
        f64::INFINITY
    } else {
        -c * arg.ln()
    }
}

/// Analytic bounds on `I(t) = ∫₀ᵗ 1/n_θ` for the balanced ℓ2 flow started at
/// `w(0) = α`.
pub fn i_bounds(
    mu: &FeatureVector,
    alpha: &[f64],
    rho: f64,
    t: f64,
    i_value: Option<f64>,
) -> Result<IBounds> {
    let v = mu.values();
    let d = v.len();
    if alpha.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: alpha.len(),
        });
    }
    if alpha.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::Domain("alpha must be positive".into()));
    }
    if !(rho > 0.0) || !(t >= 0.0) || d < 2 {
        return Err(Error::Domain(format!(
            "need rho > 0, t >= 0, d >= 2 (rho = {rho}, t = {t}, d = {d})"
        )));
    }
    let norm2_sq = mu.power_sum(2);
    let s: f64 = v.iter().zip(alpha).map(|(m, a)| m * m * a * a).sum();
    let c_lo = v[0] / (2.0 * s).sqrt();
    let log_geo = v.iter().zip(alpha).map(|(m, a)| (m * a).ln()).sum::<f64>() / d as f64;
    let l1: f64 = v.iter().sum();
    let c_hi = norm2_sq / ((2.0 * d as f64).sqrt() * log_geo.exp() * l1);

    let lower_condition_holds = match i_value {
        Some(i) if t > 0.0 => i / t >= 1.0 / (rho * (v[0] + v[1])),
        _ => true,
    };
    let lower = lower_condition_holds
        .then(|| log_bound(1.0 / (rho * v[0] * v[0]), rho * c_lo, v[0], t));
    let upper = log_bound(d as f64 / (rho * norm2_sq), rho * c_hi, l1 / d as f64, t);
    Ok(IBounds {
        lower,
        upper,
        upper_finite: upper.is_finite(),
        lower_condition_holds,
    })
}

/// Cumulative trapezoidal integral of `1/n_θ` over the sampled times.
pub fn i_of_trajectory(traj: &TrajectoryRecord) -> Vec<f64> {
    let mut out = Vec::with_capacity(traj.len());
    let mut acc = 0.0;
    for k in 0..traj.len() {
        if k > 0 {
            let h = traj.times[k] - traj.times[k - 1];
            acc += 0.5 * h * (1.0 / traj.ntheta_samples[k] + 1.0 / traj.ntheta_samples[k - 1]);
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{balanced_l2_flow, SimConfig};

    fn mu5() -> FeatureVector {
        FeatureVector::new(vec![4.0, 5.0, 6.0, 7.0, 8.0]).unwrap()
    }

    #[test]
    fn zero_time_bounds_vanish() {
        let b = i_bounds(&mu5(), &[0.4; 5], 1.0, 0.0, Some(0.0)).unwrap();
        assert_eq!(b.lower, Some(0.0));
        assert!(b.upper.abs() < 1e-15);
        assert!(b.lower_condition_holds);
    }

    #[test]
    fn lower_constant_example() {
        let s = 2.0 * 190.0 * 0.16f64;
        let rho_c = 4.0 / s.sqrt();
        assert!((rho_c - 0.51299).abs() < 1e-5);
        let b = i_bounds(&mu5(), &[0.4; 5], 1.0, 100.0, None).unwrap();
        assert!(b.lower.unwrap().is_finite());
    }

    #[test]
    fn failed_condition_drops_lower() {
        let b = i_bounds(&mu5(), &[0.4; 5], 1.0, 1.0, Some(0.01)).unwrap();
        assert_eq!(b.lower, None);
        assert!(!b.lower_condition_holds);
    }

    #[test]
    fn trapezoid_matches_analytic_integral() {
        // d = 1 is not a valid threshold instance but the flow is: ρ = 0,
        // μ = 1, α = 1 gives n_θ = √2 e^t and I(t) = (1 - e^{-t})/√2.
        let mu = FeatureVector::new(vec![1.0]).unwrap();
        let cfg = SimConfig {
            t_max: 1.0,
            sample_stride: 100,
            ..SimConfig::default()
        };
        let r = balanced_l2_flow(&mu, &[1.0], 0.0, &cfg).unwrap();
        let i = i_of_trajectory(&r);
        assert_eq!(i[0], 0.0);
        assert!(i.windows(2).all(|w| w[0] <= w[1]));
        let want = (1.0 - (-1.0f64).exp()) / 2f64.sqrt();
        assert!((i.last().unwrap() - want).abs() < 1e-4);
    }
}
