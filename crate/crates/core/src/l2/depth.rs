use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthScale {
    /// `z_j = μ_j w_j^{L-2}`.
    pub z: Vec<f64>,
    /// `z_c = n_θ / (ρ L)`, the maximiser of φ.
    pub z_c: f64,
    /// `φ(z_j)`.
    pub phi: Vec<f64>,
    /// `n_θ = √(L Σ μ² w^{2L-2})`.
    pub n_theta: f64,
}

/// `φ(z) = L z (1 - ρ z / n_θ)^{L-1}`.
pub fn phi(z: f64, depth: usize, rho: f64, n_theta: f64) -> f64 {
    depth as f64 * z * (1.0 - rho * z / n_theta).powi(depth as i32 - 1)
}

/// Effective scales of the balanced depth-L ℓ2 flow at layer weights `w`.
pub fn depth_l_effective_scale(mu: &[f64], w: &[f64], depth: usize, rho: f64) -> Result<DepthScale> {
    if depth < 2 {
        return Err(Error::Domain("depth must be >= 2".into()));
    }
    if mu.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: w.len(),
        });
    }
    if w.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::Domain("w must be positive".into()));
    }
    let l = depth as i32;
    let z: Vec<f64> = mu.iter().zip(w).map(|(m, x)| m * x.powi(l - 2)).collect();
    let s: f64 = mu
        .iter()
        .zip(w)
        .map(|(m, x)| m * m * x.powi(2 * l - 2))
        .sum();
    let n_theta = (depth as f64 * s).sqrt();
    let phi_v = z.iter().map(|zj| phi(*zj, depth, rho, n_theta)).collect();
    Ok(DepthScale {
        z,
        z_c: n_theta / (rho * depth as f64),
        phi: phi_v,
        n_theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_two_is_mu() {
        let s = depth_l_effective_scale(&[1.0, 3.0], &[0.2, 5.0], 2, 1.0).unwrap();
        assert_eq!(s.z, vec![1.0, 3.0]);
    }

    #[test]
    fn phi_peaks_at_zc() {
        for depth in [2, 3, 5] {
            let s = depth_l_effective_scale(&[1.0, 2.0, 3.0], &[0.5, 0.6, 0.7], depth, 1.0).unwrap();
            let peak = phi(s.z_c, depth, 1.0, s.n_theta);
            for sgn in [-1.0, 1.0] {
                let z = s.z_c * (1.0 + sgn * 1e-3);
                assert!(phi(z, depth, 1.0, s.n_theta) < peak);
            }
            assert_eq!(phi(0.0, depth, 1.0, s.n_theta), 0.0);
            assert!(phi(s.n_theta, depth, 1.0, s.n_theta).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(depth_l_effective_scale(&[1.0], &[0.0], 3, 1.0).is_err());
        assert!(depth_l_effective_scale(&[1.0], &[1.0], 1, 1.0).is_err());
    }
}
