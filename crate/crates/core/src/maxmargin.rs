//! Exact hard-margin solvers for small instances and directional
//! diagnostics.
//!
//! The ℓ1 problem `min ‖β‖₁ s.t. Zβ ≥ 1` is solved by enumerating vertices:
//! a support set `P` together with an equally sized set `A` of tight margin
//! rows determines `β_P = Z_{A,P}⁻¹ 1`. The ℓ2 problem enumerates KKT support
//! sets `S` with `w = Σ_{n∈S} b_n z_n` and `Z_S w = 1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::model::LabeledDataset;
use crate::numeric::{binomial, dot, norm1, norm2, solve_dense, Combinations};

/// Maximum number of candidate systems either solver will enumerate.
pub const ENUMERATION_BUDGET: f64 = 1e8;

const FEAS_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMarginSolution {
    pub direction: Vec<f64>,
    /// Margin-one normalized minimizer.
    pub primal: Vec<f64>,
    pub norm_kind: NormKind,
    /// Nonzero coordinates (ℓ1) or support vectors (ℓ2).
    pub support: Vec<usize>,
    pub objective: f64,
    pub multiple_optima: bool,
    /// Lagrange multipliers of the margin constraints, one per example.
    pub duals: Vec<f64>,
}

fn budget_l1(n: usize, d: usize) -> f64 {
    (1..=d.min(n)).map(|s| binomial(d, s) * binomial(n, s)).sum()
}

fn budget_l2(n: usize, d: usize) -> f64 {
    (1..=d.min(n)).map(|s| binomial(n, s)).sum()
}

fn check_budget(count: f64) -> Result<()> {
    if count > ENUMERATION_BUDGET {
        return Err(Error::Unsupported(format!(
            "instance needs {count:.3e} candidate systems (budget {ENUMERATION_BUDGET:.0e})"
        )));
    }
    Ok(())
}

fn feasible(z: &[Vec<f64>], beta: &[f64]) -> bool {
    z.iter().all(|zn| dot(zn, beta) >= 1.0 - FEAS_TOL)
}

#[derive(Clone)]
struct Candidate {
    beta: Vec<f64>,
    objective: f64,
    support: Vec<usize>,
    rows: Vec<usize>,
    duals: Option<Vec<f64>>,
}

fn near_optimal(mut cands: Vec<Candidate>) -> Vec<Candidate> {
    let best = cands.iter().map(|c| c.objective).fold(f64::INFINITY, f64::min);
    cands.retain(|c| c.objective <= best + TIE_TOL);
    cands
}

/// ℓ1 dual multipliers for the vertex `(P, A)` if they certify optimality.
fn l1_duals(z: &[Vec<f64>], cols: &[usize], rows: &[usize], beta: &[f64]) -> Option<Vec<f64>> {
    let s = cols.len();
    if cols.iter().any(|&k| beta[k] == 0.0) {
        return None;
    }
    // Z_{A,P}ᵀ λ = sign(β_P)
    let mut a = vec![0.0; s * s];
    for (r, &k) in cols.iter().enumerate() {
        for (c, &n) in rows.iter().enumerate() {
            a[r * s + c] = z[n][k];
        }
    }
    let rhs: Vec<f64> = cols.iter().map(|&k| beta[k].signum()).collect();
    let lam = solve_dense(&a, &rhs, s, PIVOT_TOL)?;
    if lam.iter().any(|l| *l < -1e-10) {
        return None;
    }
    let mut full = vec![0.0; z.len()];
    for (&n, l) in rows.iter().zip(&lam) {
        full[n] = l.max(0.0);
    }
    let d = beta.len();
    for k in 0..d {
        if !cols.contains(&k) {
            let g: f64 = z.iter().zip(&full).map(|(zn, l)| l * zn[k]).sum();
            if g.abs() > 1.0 + 1e-9 {
                return None;
            }
        }
    }
    Some(full)
}

fn l1_for_columns(z: &[Vec<f64>], cols: &[usize]) -> Vec<Candidate> {
    let s = cols.len();
    let d = z[0].len();
    let mut out = Vec::new();
    let mut a = vec![0.0; s * s];
    let ones = vec![1.0; s];
    for rows in Combinations::new(z.len(), s) {
        for (r, &n) in rows.iter().enumerate() {
            for (c, &k) in cols.iter().enumerate() {
                a[r * s + c] = z[n][k];
            }
        }
        let Some(x) = solve_dense(&a, &ones, s, PIVOT_TOL) else {
            continue;
        };
        let mut beta = vec![0.0; d];
        for (&k, v) in cols.iter().zip(&x) {
            beta[k] = *v;
        }
        if !feasible(z, &beta) {
            continue;
        }
        let support = (0..d).filter(|&k| beta[k].abs() > 1e-12).collect();
        out.push(Candidate {
            objective: norm1(&beta),
            duals: l1_duals(z, cols, &rows, &beta),
            beta,
            support,
            rows,
        });
        if out.len() > 64 {
            out = near_optimal(out);
        }
    }
    near_optimal(out)
}

fn finish(
    mut cands: Vec<Candidate>,
    kind: NormKind,
    z: &[Vec<f64>],
) -> Result<MaxMarginSolution> {
    if cands.is_empty() {
        return Err(Error::NotSeparable);
    }
    cands = near_optimal(cands);
    let first = &cands[0].beta;
    let multiple = cands.iter().any(|c| {
        c.beta
            .iter()
            .zip(first)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            > TIE_TOL
    });
    // Smallest support first; prefer vertices that carry a dual certificate.
    cands.sort_by(|a, b| {
        a.support
            .cmp(&b.support)
            .then(a.duals.is_none().cmp(&b.duals.is_none()))
            .then(a.rows.cmp(&b.rows))
    });
    let best = cands.swap_remove(0);
    let norm = norm2(&best.beta);
    let duals = best.duals.unwrap_or_else(|| vec![0.0; z.len()]);
    Ok(MaxMarginSolution {
        direction: best.beta.iter().map(|b| b / norm).collect(),
        objective: best.objective,
        primal: best.beta,
        norm_kind: kind,
        support: best.support,
        multiple_optima: multiple,
        duals,
    })
}

/// Minimum-ℓ1-norm margin-one classifier.
pub fn l1_maxmargin(data: &LabeledDataset) -> Result<MaxMarginSolution> {
    let z = data.signed_inputs();
    let (n, d) = (data.len(), data.dim());
    check_budget(budget_l1(n, d))?;
    let col_sets: Vec<Vec<usize>> = (1..=d.min(n))
        .flat_map(|s| Combinations::new(d, s))
        .collect();
    let cands: Vec<Candidate> = col_sets
        .par_iter()
        .flat_map_iter(|cols| l1_for_columns(z, cols))
        .collect();
    finish(cands, NormKind::L1, z)
}

fn l2_for_sets(z: &[Vec<f64>], first: usize, size: usize) -> Vec<Candidate> {
    let n = z.len();
    let d = z[0].len();
    let mut out = Vec::new();
    let rest = n - first - 1;
    if size - 1 > rest {
        return out;
    }
    let ones = vec![1.0; size];
    let mut g = vec![0.0; size * size];
    for tail in Combinations::new(rest, size - 1) {
        let set: Vec<usize> = std::iter::once(first)
            .chain(tail.iter().map(|t| t + first + 1))
            .collect();
        for (r, &a) in set.iter().enumerate() {
            for (c, &b) in set.iter().enumerate() {
                g[r * size + c] = dot(&z[a], &z[b]);
            }
        }
        let Some(b) = solve_dense(&g, &ones, size, PIVOT_TOL) else {
            continue;
        };
        if b.iter().any(|x| *x < -1e-12) {
            continue;
        }
        let mut w = vec![0.0; d];
        for (&idx, bn) in set.iter().zip(&b) {
            for (wk, zk) in w.iter_mut().zip(&z[idx]) {
                *wk += bn * zk;
            }
        }
        if !feasible(z, &w) {
            continue;
        }
        let mut duals = vec![0.0; n];
        for (&idx, bn) in set.iter().zip(&b) {
            duals[idx] = bn.max(0.0);
        }
        out.push(Candidate {
            objective: norm2(&w),
            beta: w,
            support: set.clone(),
            rows: set,
            duals: Some(duals),
        });
        if out.len() > 64 {
            out = near_optimal(out);
        }
    }
    near_optimal(out)
}

/// Minimum-ℓ2-norm margin-one classifier (hard-margin SVM without bias).
pub fn l2_maxmargin(data: &LabeledDataset) -> Result<MaxMarginSolution> {
    let z = data.signed_inputs();
    let (n, d) = (data.len(), data.dim());
    check_budget(budget_l2(n, d))?;
    let jobs: Vec<(usize, usize)> = (1..=d.min(n))
        .flat_map(|s| (0..n).map(move |f| (f, s)))
        .collect();
    let cands: Vec<Candidate> = jobs
        .par_iter()
        .flat_map_iter(|&(f, s)| l2_for_sets(z, f, s))
        .collect();
    let mut sol = finish(cands, NormKind::L2, z)?;
    // The ℓ2 optimum is unique; ties are degenerate support choices.
    sol.multiple_optima = false;
    Ok(sol)
}

/// Largest violation of primal feasibility, dual feasibility, stationarity
/// and complementary slackness.
pub fn kkt_residual(data: &LabeledDataset, sol: &MaxMarginSolution) -> f64 {
    let z = data.signed_inputs();
    let d = data.dim();
    let mut worst = 0.0f64;
    for (zn, l) in z.iter().zip(&sol.duals) {
        let m = dot(zn, &sol.primal);
        worst = worst.max(1.0 - m).max(-l).max((l * (m - 1.0)).abs());
    }
    let g: Vec<f64> = (0..d)
        .map(|k| z.iter().zip(&sol.duals).map(|(zn, l)| l * zn[k]).sum())
        .collect();
    match sol.norm_kind {
        NormKind::L2 => {
            for k in 0..d {
                worst = worst.max((sol.primal[k] - g[k]).abs());
            }
        }
        NormKind::L1 => {
            for k in 0..d {
                let b = sol.primal[k];
                let v = if b.abs() > 1e-12 {
                    (g[k] - b.signum()).abs()
                } else {
                    (g[k].abs() - 1.0).max(0.0)
                };
                worst = worst.max(v);
            }
        }
    }
    worst
}

/// Angle in radians between `beta` and the solution direction.
pub fn angle_to(beta: &[f64], sol: &MaxMarginSolution) -> Result<f64> {
    if beta.len() != sol.direction.len() {
        return Err(Error::DimensionMismatch {
            expected: sol.direction.len(),
            got: beta.len(),
        });
    }
    let n = norm2(beta);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Domain("angle needs a nonzero finite vector".into()));
    }
    let c = (dot(beta, &sol.direction) / n).clamp(-1.0, 1.0);
    Ok(c.acos())
}

/// `(t, ‖w(t) - w* log t‖ / √(log t))` for samples with `t > 1`.
pub fn residual_diagnostic(traj: &TrajectoryRecord, wstar: &[f64]) -> Result<Vec<(f64, f64)>> {
    if traj.dim() != wstar.len() {
        return Err(Error::DimensionMismatch {
            expected: wstar.len(),
            got: traj.dim(),
        });
    }
    Ok((0..traj.len())
        .filter(|&k| traj.times[k] > 1.0)
        .map(|k| {
            let t = traj.times[k];
            let lt = t.ln();
            let beta = traj.beta(k);
            let r: Vec<f64> = beta.iter().zip(wstar).map(|(w, s)| w - s * lt).collect();
            (t, norm2(&r) / lt.sqrt())
        })
        .collect())
}

/// Whether some `w` has `y_n ⟨w, x_n⟩ > 0` for every example.
pub fn separability_check(data: &LabeledDataset) -> Result<bool> {
    match l2_maxmargin(data) {
        Ok(_) => Ok(true),
        Err(Error::NotSeparable) => Ok(false),
        Err(e) => Err(e),
    }
}
