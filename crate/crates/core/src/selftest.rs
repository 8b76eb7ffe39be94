//! Fast end-to-end invariant checks, run by `samdiag selftest`.

use crate::datagen::{init_balanced, one_point, InitScale};
use crate::dynamics::{balanced_l2_flow, integrate, FlowKind, SimConfig};
use crate::error::Result;
use crate::l2::{lb_amplification, staircase, thresholds};
use crate::linf::linf_w;
use crate::maxmargin::{l1_maxmargin, l2_maxmargin};
use crate::model::{
    dataset_loss, param_gradient, Example, FeatureVector, Label, LabeledDataset, NetworkState,
    PerturbationKind,
};
use crate::rng::splitmix64;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn mu5() -> Result<FeatureVector> {
    FeatureVector::new(vec![4.0, 5.0, 6.0, 7.0, 8.0])
}

/// Runs every check; takes well under a second in release builds.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check("rng-reference", || {
            let mut s = 0u64;
            let a = splitmix64(&mut s);
            let b = splitmix64(&mut s);
            let ok = a == 0xE220_A839_7B1D_CDAF && b == 0x6E78_9E6A_A1B9_65F4;
            Ok((ok, format!("{a:#018x} {b:#018x}")))
        }),
        check("gradient-finite-difference", || {
            let data = LabeledDataset::new(vec![
                Example { x: vec![0.5, -1.0, 2.0], y: Label::Positive },
                Example { x: vec![1.5, 0.3, -0.7], y: Label::Negative },
            ])?;
            let state = NetworkState::new(vec![vec![0.3, -0.2, 0.5], vec![0.7, 0.4, -0.1]])?;
            let g = param_gradient(&state, &data)?;
            let h = 1e-6;
            let mut worst = 0f64;
            for i in 0..2 {
                for j in 0..3 {
                    let mut up = state.layers().to_vec();
                    let mut dn = up.clone();
                    up[i][j] += h;
                    dn[i][j] -= h;
                    let fd = (dataset_loss(&NetworkState::new(up)?, &data)?
                        - dataset_loss(&NetworkState::new(dn)?, &data)?)
                        / (2.0 * h);
                    worst = worst.max((fd - g.layers[i][j]).abs());
                }
            }
            Ok((worst < 1e-7, format!("max deviation {worst:.2e}")))
        }),
        check("linf-closed-form", || {
            let mu = FeatureVector::new(vec![1.0, 2.0])?;
            let data = one_point(&mu);
            let alpha = 2.0;
            let state = init_balanced(2, 2, &InitScale::Scalar(alpha))?;
            let cfg = SimConfig {
                dt: 1e-4,
                t_max: 0.5,
                ..SimConfig::default()
            };
            let traj = integrate(&state, &data, PerturbationKind::LInf(1.0), FlowKind::RescaledFlow, &cfg)?;
            let k = traj.len() - 1;
            let t = traj.times[k];
            let mut worst = 0f64;
            for (j, m) in mu.values().iter().enumerate() {
                let w = linf_w(*m, 1.0, alpha, 2, t)?;
                worst = worst.max((traj.beta(k)[j] - w * w).abs() / (w * w));
            }
            Ok((worst < 1e-3, format!("relative error {worst:.2e} at t = {t}")))
        }),
        check("threshold-order", || {
            let r = thresholds(&mu5()?, 1.0)?;
            let ok = r.alpha0 < r.alpha_hb && r.alpha_hb < r.alpha2;
            Ok((ok, format!("{:.6} < {:.6} < {:.6}", r.alpha0, r.alpha_hb, r.alpha2)))
        }),
        check("staircase-argmax", || {
            let mu = mu5()?;
            let steps = staircase(&mu, 1.0)?;
            let mut ok = !steps.is_empty();
            for s in &steps {
                let at = |a: f64| -> Result<usize> {
                    let v = (0..mu.dim())
                        .map(|j| lb_amplification(&mu, 1.0, a, j))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(crate::numeric::argmax(&v).unwrap_or(0))
                };
                ok &= at(s.alpha * (1.0 - 1e-6))? == s.index;
                ok &= at(s.alpha * (1.0 + 1e-6))? == s.index + 1;
            }
            Ok((ok, format!("{} steps", steps.len())))
        }),
        check("beta-identity", || {
            let mu = mu5()?;
            let cfg = SimConfig {
                dt: 1e-4,
                t_max: 1.0,
                ..SimConfig::default()
            };
            let traj = balanced_l2_flow(&mu, &[0.4; 5], 1.0, &cfg)?;
            let mut worst = 0f64;
            for k in 0..traj.len() {
                let (t, i) = (traj.times[k], traj.integral_samples[k]);
                for (j, m) in mu.values().iter().enumerate() {
                    let want = 2.0 * 0.4f64.ln() + 2.0 * m * t - 2.0 * m * m * i;
                    worst = worst.max((traj.log_beta(k)[j] - want).abs());
                }
            }
            Ok((worst < 1e-3, format!("max log deviation {worst:.2e}")))
        }),
        check("maxmargin-single-point", || {
            let data = one_point(&mu5()?);
            let l1 = l1_maxmargin(&data)?;
            let l2 = l2_maxmargin(&data)?;
            let ok = l1.support == vec![4] && (l2.direction[0] - 4.0 / 190f64.sqrt()).abs() < 1e-12;
            let one_based: Vec<usize> = l1.support.iter().map(|k| k + 1).collect();
            Ok((ok, format!("l1 support {one_based:?}")))
        }),
    ]
}
