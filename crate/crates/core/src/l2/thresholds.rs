use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FeatureVector;
use crate::numeric::bisect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaircaseStep {
    pub alpha: f64,
    /// The amplification argmax moves from `index` to `index + 1` at `alpha`.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    /// `m_c(0) = μ₁/2`.
    pub alpha0: f64,
    /// `m_c(0) = m_H(0)`.
    pub alpha_hb: f64,
    /// `m_c(0) = (μ_{d-1} + μ_d)/2`.
    pub alpha2: f64,
    pub alpha_crit: f64,
    pub alpha_r3: f64,
    /// Upper end of the amplification-bound window, `ρ(μ₁+μ_d)/(√2‖μ‖₂)`.
    pub alpha_max: f64,
    pub alpha1: Option<f64>,
    pub staircase: Vec<StaircaseStep>,
}

fn check(mu: &FeatureVector, rho: f64) -> Result<()> {
    if mu.dim() < 2 {
        return Err(Error::Unsupported("thresholds need d >= 2".into()));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    Ok(())
}

/// Closed-form thresholds plus the staircase; `alpha1` is left empty.
pub fn thresholds(mu: &FeatureVector, rho: f64) -> Result<ThresholdReport> {
    check(mu, rho)?;
    let v = mu.values();
    let d = v.len();
    let s2 = mu.norm2() * std::f64::consts::SQRT_2;
    let p3 = mu.power_sum(3);
    let p4 = mu.power_sum(4);
    let l1: f64 = v.iter().sum();
    let geo = (v.iter().map(|m| m.ln()).sum::<f64>() / d as f64).exp();
    let alpha_hb = rho * p4 / (s2 * p3);
    Ok(ThresholdReport {
        alpha0: rho * v[0] / s2,
        alpha_hb,
        alpha2: rho * (v[d - 2] + v[d - 1]) / s2,
        alpha_crit: alpha_hb,
        alpha_r3: rho * mu.power_sum(2) / ((2.0 * d as f64).sqrt() * geo * l1),
        alpha_max: rho * (v[0] + v[d - 1]) / s2,
        alpha1: None,
        staircase: staircase(mu, rho)?,
    })
}

/// `C(R) = R log R - (R-1) log(R-1)`.
fn c_of(r: f64) -> f64 {
    r * r.ln() - (r - 1.0) * (r - 1.0).ln()
}

/// `Φ_R(x) = (R-1) log(1/(1-x)) + log(1/x) - C(R)`; zero at its minimum
/// `x = 1/R`.
pub fn phi_r(r: f64, x: f64) -> f64 {
    -(r - 1.0) * (-x).ln_1p() - x.ln() - c_of(r)
}

struct Ratios {
    r: Vec<f64>,
    r_prime: Vec<f64>,
}

fn ratios(mu: &FeatureVector) -> Ratios {
    let v = mu.values();
    let (lo, hi) = (v[0], v[v.len() - 1]);
    Ratios {
        r: v.iter().map(|m| (m + hi) / lo).collect(),
        r_prime: v.iter().map(|m| (hi - m) / lo).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbValue {
    pub value: f64,
    /// Set when a numeric α₁ was supplied and `alpha <= alpha1`.
    pub below_alpha1: bool,
}

fn window(mu: &FeatureVector, rho: f64, alpha: f64, j: usize) -> Result<f64> {
    check(mu, rho)?;
    if j >= mu.dim() {
        return Err(Error::Domain(format!("index {j} out of range")));
    }
    let v = mu.values();
    let s2 = mu.norm2() * std::f64::consts::SQRT_2;
    let alpha0 = rho * v[0] / s2;
    let alpha_max = rho * (v[0] + v[v.len() - 1]) / s2;
    if !(alpha > alpha0 && alpha <= alpha_max) {
        return Err(Error::Domain(format!(
            "alpha = {alpha} outside the bound window ({alpha0}, {alpha_max}]"
        )));
    }
    Ok(alpha0 / alpha)
}

/// Closed-form lower bound on `max_t β_j(t)/β_d(t)`.
pub fn lb_amplification(mu: &FeatureVector, rho: f64, alpha: f64, j: usize) -> Result<f64> {
    window(mu, rho, alpha, j)?;
    lb_formula(mu, rho, alpha, j)
}

/// The `LB_j` expression for any `α > α₀`, without the window check. Outside
/// the window it is no longer a certified bound; the staircase uses it.
pub fn lb_formula(mu: &FeatureVector, rho: f64, alpha: f64, j: usize) -> Result<f64> {
    check(mu, rho)?;
    if j >= mu.dim() {
        return Err(Error::Domain(format!("index {j} out of range")));
    }
    let alpha0 = rho * mu.min() / (mu.norm2() * std::f64::consts::SQRT_2);
    if !(alpha > alpha0) {
        return Err(Error::Domain(format!("alpha = {alpha} must exceed {alpha0}")));
    }
    let rt = ratios(mu);
    if rt.r_prime[j] == 0.0 {
        return Ok(1.0);
    }
    Ok((2.0 * rt.r_prime[j] * phi_r(rt.r[j], alpha0 / alpha)).exp())
}

/// [`lb_amplification`] with the `α > α₁` hypothesis surfaced as a flag.
pub fn lb_amplification_checked(
    mu: &FeatureVector,
    rho: f64,
    alpha: f64,
    j: usize,
    alpha1: Option<f64>,
) -> Result<LbValue> {
    Ok(LbValue {
        value: lb_amplification(mu, rho, alpha, j)?,
        below_alpha1: alpha1.is_some_and(|a1| alpha <= a1),
    })
}

/// Witness time `T_j = (1/μ₁) log((x/(1-x))(R_j - 1))`, `x = α₀/α`.
pub fn amplification_time(mu: &FeatureVector, rho: f64, alpha: f64, j: usize) -> Result<f64> {
    let x = window(mu, rho, alpha, j)?;
    if x >= 1.0 {
        return Err(Error::Domain("rho * C_lower must be below 1".into()));
    }
    let rt = ratios(mu);
    Ok((x / (1.0 - x) * (rt.r[j] - 1.0)).ln() / mu.min())
}

/// Thresholds where `argmax_j LB_j(α)` moves from `j` to `j+1`: the zero of
/// `H_{j+1,j}(x) = 2(R'_{j+1}Φ_{R_{j+1}}(x) - R'_jΦ_{R_j}(x))` on the branch
/// `x ∈ (1/R_j, 1)`, mapped by `α = α₀/x` and truncated at
/// `ρ(μ₁+μ_d)/(√2‖μ‖₂)`.
///
/// `H > 0` at `1/R_j` because `Φ_{R_j}` vanishes there, and `H → -∞` as
/// `x → 1` because `R'(R-1)` decreases in `μ`. The pair `(d-1, d)` never
/// crosses since `LB_d ≡ 1 ≤ LB_{d-1}`.
pub fn staircase(mu: &FeatureVector, rho: f64) -> Result<Vec<StaircaseStep>> {
    check(mu, rho)?;
    let v = mu.values();
    let d = v.len();
    let s2 = mu.norm2() * std::f64::consts::SQRT_2;
    let alpha0 = rho * v[0] / s2;
    let alpha_max = rho * (v[0] + v[d - 1]) / s2;
    let rt = ratios(mu);
    let mut steps: Vec<StaircaseStep> = Vec::new();
    for j in 0..d.saturating_sub(2) {
        let (r_lo, r_hi) = (rt.r[j], rt.r[j + 1]);
        let h = |x: f64| {
            2.0 * (rt.r_prime[j + 1] * phi_r(r_hi, x) - rt.r_prime[j] * phi_r(r_lo, x))
        };
        let (left, right) = (1.0 / r_lo, 1.0 - 1e-15);
        if !(h(left) > 0.0 && h(right) < 0.0) {
            return Err(Error::Consistency(format!(
                "staircase bracket for index {j} has H = ({}, {})",
                h(left),
                h(right)
            )));
        }
        let alpha = alpha0 / bisect(left, right, 1e-12, h)?;
        if alpha > alpha_max {
            break;
        }
        if steps.last().is_some_and(|s| s.alpha >= alpha) {
            return Err(Error::Consistency(format!(
                "staircase thresholds not increasing at index {j}"
            )));
        }
        steps.push(StaircaseStep { alpha, index: j });
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu5() -> FeatureVector {
        FeatureVector::new(vec![4.0, 5.0, 6.0, 7.0, 8.0]).unwrap()
    }

    #[test]
    fn threshold_values() {
        let r = thresholds(&mu5(), 1.0).unwrap();
        let s2 = (380.0f64).sqrt();
        assert!((r.alpha0 - 4.0 / s2).abs() < 1e-15);
        assert!((r.alpha0 - 0.205196).abs() < 1e-5);
        assert!((r.alpha_hb - 8674.0 / (s2 * 1260.0)).abs() < 1e-15);
        assert!((r.alpha_hb - 0.353164).abs() < 5e-5);
        assert!((r.alpha2 - 0.769480).abs() < 1e-5);
        assert!(r.alpha0 < r.alpha_hb && r.alpha_hb < r.alpha2);
        assert_eq!(r.alpha_crit, r.alpha_hb);
        let r12 = thresholds(&FeatureVector::new(vec![1.0, 2.0]).unwrap(), 1.0).unwrap();
        assert!((r12.alpha0 - 1.0 / 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn thresholds_scale_with_rho() {
        let a = thresholds(&mu5(), 1.0).unwrap();
        let b = thresholds(&mu5(), 2.0).unwrap();
        for (x, y) in [
            (a.alpha0, b.alpha0),
            (a.alpha_hb, b.alpha_hb),
            (a.alpha2, b.alpha2),
            (a.alpha_r3, b.alpha_r3),
            (a.alpha_max, b.alpha_max),
        ] {
            assert_eq!(2.0 * x, y);
        }
        for (x, y) in a.staircase.iter().zip(&b.staircase) {
            assert!((2.0 * x.alpha - y.alpha).abs() < 1e-10);
        }
    }

    #[test]
    fn phi_minimum_is_zero() {
        for r in [2.5, 3.0, 4.0] {
            assert!(phi_r(r, 1.0 / r).abs() < 1e-14);
            assert!(phi_r(r, 1.0 / r + 0.01) > 0.0);
            assert!(phi_r(r, 1.0 / r - 0.01) > 0.0);
        }
    }

    #[test]
    fn lb_examples() {
        let mu = mu5();
        assert_eq!(lb_amplification(&mu, 1.0, 0.3, 4).unwrap(), 1.0);
        // Independent evaluation: R = 3, R' = 1, C(3) = 3 ln 3 - 2 ln 2.
        let x = 4.0 / 380f64.sqrt() / 0.3;
        let c3 = 3.0 * 3f64.ln() - 2.0 * 2f64.ln();
        let want = (2.0 * (2.0 * (1.0 / (1.0 - x)).ln() + (1.0 / x).ln() - c3)).exp();
        let got = lb_amplification(&mu, 1.0, 0.3, 0).unwrap();
        assert!((got - want).abs() < 1e-12 * want);
        assert!((got - 4.70).abs() < 0.02);
        let near = lb_amplification(&mu, 1.0, 0.2052, 0).unwrap();
        assert!(near > 1e3);
        assert!(lb_amplification(&mu, 1.0, 0.2, 0).is_err());
        assert!(lb_amplification(&mu, 1.0, 0.7, 0).is_err());
        let flagged = lb_amplification_checked(&mu, 1.0, 0.3, 0, Some(0.324)).unwrap();
        assert!(flagged.below_alpha1);
    }

    #[test]
    fn amplification_time_examples() {
        let mu = mu5();
        let t1 = amplification_time(&mu, 1.0, 0.3, 0).unwrap();
        assert!((t1 - 0.366).abs() < 1e-3);
        let ts: Vec<f64> = (0..5)
            .map(|j| amplification_time(&mu, 1.0, 0.3, j).unwrap())
            .collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn staircase_brackets_and_order() {
        let mu = mu5();
        let steps = staircase(&mu, 1.0).unwrap();
        // Reference roots from an independent Brent solve of the same H.
        let want = [0.358384, 0.473528, 0.605507];
        assert_eq!(steps.len(), want.len());
        for (k, (s, w)) in steps.iter().zip(want).enumerate() {
            assert_eq!(s.index, k);
            assert!((s.alpha - w).abs() < 1e-5, "{} vs {w}", s.alpha);
        }
        let alpha0 = 4.0 / 380f64.sqrt();
        let x1 = alpha0 / steps[0].alpha;
        assert!(x1 > 4.0 / 12.0 && x1 < 1.0);
        assert!(steps.windows(2).all(|w| w[0].alpha < w[1].alpha));
    }

    #[test]
    fn staircase_certifies_argmax() {
        let mu = mu5();
        let argmax_lb = |a: f64| {
            let v: Vec<f64> = (0..5).map(|j| lb_amplification(&mu, 1.0, a, j).unwrap()).collect();
            crate::numeric::argmax(&v).unwrap()
        };
        for s in staircase(&mu, 1.0).unwrap() {
            assert_eq!(argmax_lb(s.alpha * (1.0 - 1e-6)), s.index);
            assert_eq!(argmax_lb(s.alpha * (1.0 + 1e-6)), s.index + 1);
        }
    }
}
