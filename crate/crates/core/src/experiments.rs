//! Grid sweeps, dominant-index tracking, amplification curves and export.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{csv_error, init_balanced, one_point, InitScale};
use crate::dynamics::{
    layer_spread, ntheta_of, run_flow, BalancedL2, FlowKind, SimConfig, TrajectoryOutcome,
    TrajectoryRecord,
};
use crate::error::{Error, Result};
use crate::l2::{
    estimate_alpha1, lb_amplification, regime_classify, thresholds, Alpha1Config, RegimeLabel,
    ThresholdReport,
};
use crate::model::{logistic_loss, FeatureVector, PerturbationKind};
use crate::numeric::{argmax, dot, fmt17, log_sum_exp, norm2};

/// `argmax_j β_j` (smallest index on ties), or `None` when `‖β‖₂ ≤ threshold`.
pub fn dominant_index(beta: &[f64], collapse_threshold: f64) -> Option<usize> {
    if norm2(beta) <= collapse_threshold {
        None
    } else {
        argmax(beta)
    }
}

/// [`dominant_index`] for a log-β vector.
pub fn dominant_index_log(log_beta: &[f64], collapse_threshold: f64) -> Option<usize> {
    let twice: Vec<f64> = log_beta.iter().map(|v| 2.0 * v).collect();
    if 0.5 * log_sum_exp(&twice) <= collapse_threshold.ln() {
        None
    } else {
        argmax(log_beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeatmapMethod {
    GfRescaled,
    L2Rescaled,
    LinfRescaled,
    DiscreteGd,
    DiscreteL2,
    DiscreteLinf,
}

impl HeatmapMethod {
    pub const ALL: [HeatmapMethod; 6] = [
        HeatmapMethod::GfRescaled,
        HeatmapMethod::L2Rescaled,
        HeatmapMethod::LinfRescaled,
        HeatmapMethod::DiscreteGd,
        HeatmapMethod::DiscreteL2,
        HeatmapMethod::DiscreteLinf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeatmapMethod::GfRescaled => "gf-rescaled",
            HeatmapMethod::L2Rescaled => "l2-rescaled",
            HeatmapMethod::LinfRescaled => "linf-rescaled",
            HeatmapMethod::DiscreteGd => "discrete-gd",
            HeatmapMethod::DiscreteL2 => "discrete-l2",
            HeatmapMethod::DiscreteLinf => "discrete-linf",
        }
    }

    pub fn perturbation(self, rho: f64) -> PerturbationKind {
        match self {
            HeatmapMethod::GfRescaled | HeatmapMethod::DiscreteGd => PerturbationKind::None,
            HeatmapMethod::L2Rescaled | HeatmapMethod::DiscreteL2 => PerturbationKind::L2(rho),
            HeatmapMethod::LinfRescaled | HeatmapMethod::DiscreteLinf => {
                PerturbationKind::LInf(rho)
            }
        }
    }

    pub fn is_discrete(self) -> bool {
        matches!(
            self,
            HeatmapMethod::DiscreteGd | HeatmapMethod::DiscreteL2 | HeatmapMethod::DiscreteLinf
        )
    }
}

impl fmt::Display for HeatmapMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeatmapMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HeatmapMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::parse("heatmap method", format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapConfig {
    pub mu: FeatureVector,
    pub rho: f64,
    pub depth: usize,
    pub alpha_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub method: HeatmapMethod,
    /// `dt`, thresholds; `t_max` and `sample_stride` are derived from the grid.
    pub sim: SimConfig,
    /// Step of the discrete methods.
    pub eta: f64,
    /// Locate α₁ numerically for the regime lines and staircase dots.
    pub estimate_alpha1: bool,
    pub alpha1: Alpha1Config,
    pub threads: Option<usize>,
    /// Recorded for provenance only; the grid itself uses no randomness.
    pub seed: u64,
}

impl HeatmapConfig {
    pub fn new(mu: FeatureVector, rho: f64, alpha_grid: Vec<f64>, t_grid: Vec<f64>, method: HeatmapMethod) -> Self {
        HeatmapConfig {
            mu,
            rho,
            depth: 2,
            alpha_grid,
            t_grid,
            method,
            sim: SimConfig::default(),
            eta: 0.01,
            estimate_alpha1: true,
            alpha1: Alpha1Config::default(),
            threads: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeLine {
    pub label: String,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JstarDot {
    pub alpha: f64,
    pub t: f64,
    pub index: usize,
}

/// Provenance stored alongside a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMeta {
    pub mu: Vec<f64>,
    pub rho: f64,
    pub depth: usize,
    pub method: String,
    pub dt: f64,
    pub eta: f64,
    pub collapse_threshold: f64,
    pub blowup_threshold: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    pub meta: HeatmapMeta,
    pub thresholds: Option<ThresholdReport>,
    pub alpha_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `dominant[a][t]`; `None` is a gray (collapsed) cell.
    pub dominant: Vec<Vec<Option<usize>>>,
    pub loss: Vec<Vec<f64>>,
    pub ntheta: Vec<Vec<f64>>,
    pub mc: Vec<Vec<f64>>,
    /// Cells filled after the row blew up.
    pub blowup: Vec<Vec<bool>>,
    pub regime_lines: Vec<RegimeLine>,
    pub jstar_dots: Vec<JstarDot>,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    dominant: Option<usize>,
    loss: f64,
    ntheta: f64,
    mc: f64,
    blowup: bool,
}

struct Row {
    cells: Vec<Cell>,
    /// Running max of `log(β_j/β_d)` and the time it was attained.
    amp: Vec<(f64, f64)>,
}

/// Fills grid cells as the clock passes each grid time.
struct CellFiller<'a> {
    t_grid: &'a [f64],
    tol: f64,
    cells: Vec<Cell>,
    amp: Vec<(f64, f64)>,
}

impl<'a> CellFiller<'a> {
    fn new(t_grid: &'a [f64], h: f64, d: usize) -> Self {
        CellFiller {
            t_grid,
            tol: 0.5 * h,
            cells: Vec::with_capacity(t_grid.len()),
            amp: vec![(f64::NEG_INFINITY, 0.0); d],
        }
    }

    fn done(&self) -> bool {
        self.cells.len() == self.t_grid.len()
    }

    fn wants(&self, t: f64) -> bool {
        !self.done() && t >= self.t_grid[self.cells.len()] - self.tol
    }

    fn track(&mut self, t: f64, log_abs_beta: impl Fn(usize) -> f64) {
        let d = self.amp.len();
        let last = log_abs_beta(d - 1);
        for j in 0..d {
            let r = log_abs_beta(j) - last;
            if r > self.amp[j].0 {
                self.amp[j] = (r, t);
            }
        }
    }

    fn finish(mut self, last: Cell, outcome: &TrajectoryOutcome) -> Row {
        let blown = matches!(outcome, TrajectoryOutcome::BlownUp { .. });
        while !self.done() {
            let mut c = last;
            if blown {
                c.blowup = true;
                if let Some(prev) = self.cells.last() {
                    c.dominant = prev.dominant;
                }
            }
            self.cells.push(c);
        }
        Row {
            cells: self.cells,
            amp: self.amp,
        }
    }
}

fn mc_of(ntheta: f64, rho: f64) -> f64 {
    ntheta / (2.0 * rho)
}

fn balanced_row(cfg: &HeatmapConfig, alpha: f64, rho: f64) -> Result<Row> {
    let mu = cfg.mu.values();
    let d = mu.len();
    let dt = cfg.sim.dt;
    let mut flow = BalancedL2::new(mu, &vec![alpha; d], rho, dt, true)?;
    let mut fill = CellFiller::new(&cfg.t_grid, dt, d);
    let horizon = cfg.t_grid[cfg.t_grid.len() - 1];
    let log_thr = cfg.sim.collapse_threshold.ln();
    let cell_of = |flow: &mut BalancedL2| {
        let log_n = flow.log_ntheta();
        let n = log_n.exp();
        let (s, _) = flow.margin(n);
        let lb = flow.raw_state();
        let twice: Vec<f64> = lb.iter().map(|v| 2.0 * v).collect();
        let dominant = if 0.5 * log_sum_exp(&twice) <= log_thr {
            None
        } else {
            argmax(lb)
        };
        Cell {
            dominant,
            loss: logistic_loss(s),
            ntheta: n,
            mc: mc_of(n, cfg.rho),
            blowup: false,
        }
    };
    let mut prev_norm = flow.log_norm();
    let mut outcome = TrajectoryOutcome::HorizonReached;
    loop {
        let t = flow.t();
        {
            let lb = flow.raw_state().to_vec();
            fill.track(t, |j| lb[j]);
        }
        while fill.wants(t) {
            let c = cell_of(&mut flow);
            fill.cells.push(c);
        }
        if fill.done() || t > horizon + dt {
            break;
        }
        if flow.advance().is_err() {
            outcome = TrajectoryOutcome::BlownUp {
                time: flow.t() + 0.5 * dt,
                indices: Vec::new(),
            };
            break;
        }
        let norm = flow.log_norm();
        if norm <= log_thr && norm < prev_norm {
            outcome = TrajectoryOutcome::Collapsed { time: flow.t() };
            let lb = flow.raw_state().to_vec();
            fill.track(flow.t(), |j| lb[j]);
            let t = flow.t();
            while fill.wants(t) {
                let c = cell_of(&mut flow);
                fill.cells.push(c);
            }
            break;
        }
        prev_norm = norm;
    }
    let last = cell_of(&mut flow);
    Ok(fill.finish(last, &outcome))
}

fn layered_row(cfg: &HeatmapConfig, alpha: f64) -> Result<Row> {
    let d = cfg.mu.dim();
    let data = one_point(&cfg.mu);
    let state = init_balanced(d, cfg.depth, &InitScale::Scalar(alpha))?;
    let h = if cfg.method.is_discrete() {
        cfg.eta
    } else {
        cfg.sim.dt
    };
    let horizon = cfg.t_grid[cfg.t_grid.len() - 1];
    let sim = SimConfig {
        dt: h,
        t_max: horizon + h,
        ..cfg.sim
    };
    let mu = cfg.mu.values();
    let mut fill = CellFiller::new(&cfg.t_grid, h, d);
    let mut last = None;
    let thr = cfg.sim.collapse_threshold;
    let cell_of = |layers: &[Vec<f64>], beta: &[f64]| Cell {
        dominant: dominant_index(beta, thr),
        loss: logistic_loss(dot(beta, mu)),
        ntheta: ntheta_of(layers, beta, &data),
        mc: mc_of(ntheta_of(layers, beta, &data), cfg.rho),
        blowup: false,
    };
    let end = run_flow(
        &state,
        &data,
        cfg.method.perturbation(cfg.rho),
        FlowKind::RescaledFlow,
        &sim,
        |obs| {
            fill.track(obs.t, |j| obs.beta[j].abs().ln());
            while fill.wants(obs.t) {
                fill.cells.push(cell_of(obs.layers, obs.beta));
            }
            last = Some(cell_of(obs.layers, obs.beta));
            !fill.done()
        },
    )?;
    let last = match end.outcome {
        TrajectoryOutcome::BlownUp { .. } => last.expect("initial state is observed"),
        _ => cell_of(&end.layers, &end.beta),
    };
    Ok(fill.finish(last, &end.outcome))
}

/// Selects `j*` from per-coordinate maximal log-ratios against the last
/// coordinate: a smaller index wins only by strictly larger amplification.
fn jstar_from(amp: &[(f64, f64)]) -> (usize, f64) {
    let d = amp.len();
    let mut best = d - 1;
    for j in (0..d - 1).rev() {
        if amp[j].0 > amp[best].0 {
            best = j;
        }
    }
    (best, amp[best].1)
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Dominant-index / loss grid over `(α, t)` for the single-point dataset,
/// one trajectory per α.
pub fn heatmap(cfg: &HeatmapConfig) -> Result<HeatmapGrid> {
    if cfg.alpha_grid.is_empty() || cfg.t_grid.is_empty() {
        return Err(Error::Domain("alpha and t grids must be nonempty".into()));
    }
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
    if !increasing(&cfg.alpha_grid) || !increasing(&cfg.t_grid) || cfg.t_grid[0] < 0.0 {
        return Err(Error::Domain("grids must be strictly increasing, t >= 0".into()));
    }
    if cfg.alpha_grid.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::Domain("alpha grid must be positive".into()));
    }
    if cfg.depth == 0 {
        return Err(Error::Domain("depth must be >= 1".into()));
    }
    if cfg.method.is_discrete() && !(cfg.eta > 0.0) {
        return Err(Error::Domain("discrete methods need eta > 0".into()));
    }
    PerturbationKind::L2(cfg.rho).validate()?;
    let reduced = cfg.depth == 2
        && matches!(cfg.method, HeatmapMethod::GfRescaled | HeatmapMethod::L2Rescaled);
    let rho_eff = match cfg.method {
        HeatmapMethod::GfRescaled | HeatmapMethod::DiscreteGd => 0.0,
        _ => cfg.rho,
    };
    let rows: Vec<Result<Row>> = with_pool(cfg.threads, || {
        cfg.alpha_grid
            .par_iter()
            .map(|&a| {
                if reduced {
                    balanced_row(cfg, a, rho_eff)
                } else {
                    layered_row(cfg, a)
                }
            })
            .collect()
    })?;
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let mut report = if cfg.rho > 0.0 && cfg.mu.dim() >= 2 {
        Some(thresholds(&cfg.mu, cfg.rho)?)
    } else {
        None
    };
    if let Some(r) = report.as_mut() {
        if cfg.estimate_alpha1 {
            r.alpha1 = Some(estimate_alpha1(&cfg.mu, cfg.rho, &cfg.alpha1)?.alpha1);
        }
    }
    let mut regime_lines = Vec::new();
    let mut jstar_dots = Vec::new();
    if let Some(r) = &report {
        regime_lines.push(RegimeLine {
            label: "alpha0".into(),
            alpha: r.alpha0,
        });
        if let Some(a1) = r.alpha1 {
            regime_lines.push(RegimeLine {
                label: "alpha1".into(),
                alpha: a1,
            });
        }
        regime_lines.push(RegimeLine {
            label: "alpha_hb".into(),
            alpha: r.alpha_hb,
        });
        regime_lines.push(RegimeLine {
            label: "alpha2".into(),
            alpha: r.alpha2,
        });
        if let Some(a1) = r.alpha1 {
            for (&alpha, row) in cfg.alpha_grid.iter().zip(&rows) {
                let label = regime_classify(&cfg.mu, cfg.rho, alpha, a1)?;
                if matches!(label, RegimeLabel::Regime2a | RegimeLabel::Regime2b) {
                    let (index, t) = jstar_from(&row.amp);
                    jstar_dots.push(JstarDot { alpha, t, index });
                }
            }
        }
    }

    let matrix = |f: &dyn Fn(&Cell) -> f64| -> Vec<Vec<f64>> {
        rows.iter().map(|r| r.cells.iter().map(f).collect()).collect()
    };
    Ok(HeatmapGrid {
        meta: HeatmapMeta {
            mu: cfg.mu.values().to_vec(),
            rho: cfg.rho,
            depth: cfg.depth,
            method: cfg.method.name().into(),
            dt: cfg.sim.dt,
            eta: cfg.eta,
            collapse_threshold: cfg.sim.collapse_threshold,
            blowup_threshold: cfg.sim.blowup_threshold,
            seed: cfg.seed,
        },
        thresholds: report,
        alpha_grid: cfg.alpha_grid.clone(),
        t_grid: cfg.t_grid.clone(),
        dominant: rows
            .iter()
            .map(|r| r.cells.iter().map(|c| c.dominant).collect())
            .collect(),
        loss: matrix(&|c| c.loss),
        ntheta: matrix(&|c| c.ntheta),
        mc: matrix(&|c| c.mc),
        blowup: rows
            .iter()
            .map(|r| r.cells.iter().map(|c| c.blowup).collect())
            .collect(),
        regime_lines,
        jstar_dots,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationCurve {
    /// Per coordinate: `(max_t β_j/β_d, argmax time)`.
    pub per_coordinate: Vec<(f64, f64)>,
    pub jstar: usize,
    pub jstar_time: f64,
}

/// Running maxima of `β_j(t)/β_d(t)` over a trajectory, in log domain.
pub fn amplification_curve(traj: &TrajectoryRecord) -> Result<AmplificationCurve> {
    let d = traj.dim();
    if d == 0 {
        return Err(Error::Domain("empty trajectory".into()));
    }
    let mut amp = vec![(f64::NEG_INFINITY, 0.0); d];
    for k in 0..traj.len() {
        let lb = traj.log_beta(k);
        if lb.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain(format!(
                "beta must stay positive (sample {k} at t = {})",
                traj.times[k]
            )));
        }
        for j in 0..d {
            let r = lb[j] - lb[d - 1];
            if r > amp[j].0 {
                amp[j] = (r, traj.times[k]);
            }
        }
    }
    let (jstar, jstar_time) = jstar_from(&amp);
    Ok(AmplificationCurve {
        per_coordinate: amp.iter().map(|(r, t)| (r.exp(), *t)).collect(),
        jstar,
        jstar_time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbTable {
    pub alphas: Vec<f64>,
    /// `values[k][j] = LB_j(alphas[k])`.
    pub values: Vec<Vec<f64>>,
    pub note: Option<String>,
}

/// `LB_j(α)` on `grid_points` uniform points of `(alpha_lo, α_max]`; the
/// lower end is raised to α₀ when necessary.
pub fn lb_curve(mu: &FeatureVector, rho: f64, alpha_lo: f64, grid_points: usize) -> Result<LbTable> {
    let th = thresholds(mu, rho)?;
    let lo = alpha_lo.max(th.alpha0);
    let hi = th.alpha_max;
    if !(lo < hi) || grid_points == 0 {
        return Ok(LbTable {
            alphas: Vec::new(),
            values: Vec::new(),
            note: Some(format!("empty window ({lo}, {hi}]")),
        });
    }
    let alphas: Vec<f64> = (1..=grid_points)
        .map(|k| lo + (hi - lo) * k as f64 / grid_points as f64)
        .collect();
    let values = alphas
        .iter()
        .map(|&a| {
            (0..mu.dim())
                .map(|j| lb_amplification(mu, rho, a, j))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LbTable {
        alphas,
        values,
        note: None,
    })
}

/// JSON layout of an exported heatmap. Indices are one-based; gray is -1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HeatmapManifest {
    format: String,
    config: HeatmapMeta,
    thresholds: Option<ThresholdReport>,
    alpha_grid: Vec<f64>,
    t_grid: Vec<f64>,
    dominant: Vec<Vec<i64>>,
    loss: Vec<Vec<f64>>,
    ntheta: Vec<Vec<f64>>,
    #[serde(with = "real_matrix")]
    mc: Vec<Vec<f64>>,
    blowup: Vec<Vec<bool>>,
    regime_lines: Vec<RegimeLine>,
    jstar_dots: Vec<JstarDot>,
}

const MANIFEST_FORMAT: &str = "samdiag-heatmap/1";

fn encode_index(i: Option<usize>) -> i64 {
    i.map_or(-1, |j| j as i64 + 1)
}

fn decode_index(v: i64) -> Result<Option<usize>> {
    match v {
        -1 => Ok(None),
        v if v >= 1 => Ok(Some(v as usize - 1)),
        v => Err(Error::parse("heatmap manifest", format!("bad dominant index {v}"))),
    }
}

impl HeatmapGrid {
    fn to_manifest(&self) -> HeatmapManifest {
        HeatmapManifest {
            format: MANIFEST_FORMAT.into(),
            config: self.meta.clone(),
            thresholds: self.thresholds.clone(),
            alpha_grid: self.alpha_grid.clone(),
            t_grid: self.t_grid.clone(),
            dominant: self
                .dominant
                .iter()
                .map(|r| r.iter().map(|c| encode_index(*c)).collect())
                .collect(),
            loss: self.loss.clone(),
            ntheta: self.ntheta.clone(),
            mc: self.mc.clone(),
            blowup: self.blowup.clone(),
            regime_lines: self.regime_lines.clone(),
            jstar_dots: self
                .jstar_dots
                .iter()
                .map(|d| JstarDot {
                    index: d.index + 1,
                    ..*d
                })
                .collect(),
        }
    }

    fn from_manifest(m: HeatmapManifest) -> Result<Self> {
        if m.format != MANIFEST_FORMAT {
            return Err(Error::parse("heatmap manifest", format!("unknown format {:?}", m.format)));
        }
        let dominant = m
            .dominant
            .iter()
            .map(|r| r.iter().map(|v| decode_index(*v)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let jstar_dots = m
            .jstar_dots
            .iter()
            .map(|d| {
                if d.index == 0 {
                    Err(Error::parse("heatmap manifest", "jstar index must be >= 1"))
                } else {
                    Ok(JstarDot {
                        index: d.index - 1,
                        ..*d
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HeatmapGrid {
            meta: m.config,
            thresholds: m.thresholds,
            alpha_grid: m.alpha_grid,
            t_grid: m.t_grid,
            dominant,
            loss: m.loss,
            ntheta: m.ntheta,
            mc: m.mc,
            blowup: m.blowup,
            regime_lines: m.regime_lines,
            jstar_dots,
        })
    }
}

mod real_matrix {
    //! f64 matrices where non-finite entries are written as strings.
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Real {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(m: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Real>> = m
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| {
                        if v.is_finite() {
                            Real::Num(*v)
                        } else {
                            Real::Text(crate::numeric::fmt17(*v))
                        }
                    })
                    .collect()
            })
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let rows = Vec::<Vec<Real>>::deserialize(d)?;
        rows.into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|v| match v {
                        Real::Num(x) => Ok(x),
                        Real::Text(t) => crate::numeric::parse_f64(&t)
                            .ok_or_else(|| D::Error::custom(format!("bad number {t:?}"))),
                    })
                    .collect()
            })
            .collect()
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// JSON manifest with provenance, thresholds, grids and matrices.
pub fn write_heatmap_json(grid: &HeatmapGrid, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&grid.to_manifest())
        .map_err(|e| Error::parse("heatmap manifest", e))?;
    write_text(path, &(text + "\n"))
}

pub fn read_heatmap_json(path: &Path) -> Result<HeatmapGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: HeatmapManifest = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e))?;
    HeatmapGrid::from_manifest(m)
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per `(α, t)` cell: `alpha,t,dominant,loss,ntheta,mc,blowup`.
pub fn write_heatmap_csv(grid: &HeatmapGrid, path: &Path) -> Result<()> {
    let header: Vec<String> = ["alpha", "t", "dominant", "loss", "ntheta", "mc", "blowup"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = grid.alpha_grid.iter().enumerate().flat_map(|(a, alpha)| {
        grid.t_grid.iter().enumerate().map(move |(k, t)| {
            vec![
                fmt17(*alpha),
                fmt17(*t),
                encode_index(grid.dominant[a][k]).to_string(),
                fmt17(grid.loss[a][k]),
                fmt17(grid.ntheta[a][k]),
                fmt17(grid.mc[a][k]),
                u8::from(grid.blowup[a][k]).to_string(),
            ]
        })
    });
    write_rows(path, &header, rows)
}

/// `t,tau,loss,ntheta,balancedness[,integral],beta1..` (or `logbeta1..`).
pub fn write_trajectory_csv(traj: &TrajectoryRecord, path: &Path) -> Result<()> {
    let with_integral = !traj.integral_samples.is_empty();
    let prefix = if traj.log_domain { "logbeta" } else { "beta" };
    let mut header: Vec<String> = ["t", "tau", "loss", "ntheta", "balancedness"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if with_integral {
        header.push("integral".into());
    }
    header.extend((1..=traj.dim()).map(|j| format!("{prefix}{j}")));
    let rows = (0..traj.len()).map(|k| {
        let mut r = vec![
            fmt17(traj.times[k]),
            fmt17(traj.tau_samples[k]),
            fmt17(traj.loss_samples[k]),
            fmt17(traj.ntheta_samples[k]),
            fmt17(traj.balancedness_samples[k]),
        ];
        if with_integral {
            r.push(fmt17(traj.integral_samples[k]));
        }
        r.extend(traj.beta_samples[k].iter().map(|v| fmt17(*v)));
        r
    });
    write_rows(path, &header, rows)
}

/// `alpha,lb1,...,lbd`.
pub fn write_lb_csv(table: &LbTable, path: &Path) -> Result<()> {
    let d = table.values.first().map_or(0, Vec::len);
    let mut header = vec!["alpha".to_string()];
    header.extend((1..=d).map(|j| format!("lb{j}")));
    let rows = table.alphas.iter().zip(&table.values).map(|(a, v)| {
        std::iter::once(fmt17(*a))
            .chain(v.iter().map(|x| fmt17(*x)))
            .collect()
    });
    write_rows(path, &header, rows)
}

/// Layer gap helper re-exported for diagnostics over custom runs.
pub fn spread_of(layers: &[Vec<f64>]) -> f64 {
    layer_spread(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linspace;

    fn mu5() -> FeatureVector {
        FeatureVector::new(vec![4.0, 5.0, 6.0, 7.0, 8.0]).unwrap()
    }

    #[test]
    fn dominant_examples() {
        assert_eq!(dominant_index(&[1e-3, 2e-3, 1e-3], 1e-2), None);
        assert_eq!(dominant_index(&[1.0, 2.0, 3.0], 1e-2), Some(2));
        assert_eq!(dominant_index(&[2.0, 2.0], 1e-2), Some(0));
        assert_eq!(dominant_index_log(&[0.0, 2f64.ln(), 3f64.ln()], 1e-2), Some(2));
        assert_eq!(dominant_index_log(&[-10.0, -9.0], 1e-2), None);
    }

    #[test]
    fn method_names_round_trip() {
        for m in HeatmapMethod::ALL {
            assert_eq!(m.name().parse::<HeatmapMethod>().unwrap(), m);
        }
        assert!("nope".parse::<HeatmapMethod>().is_err());
    }

    fn small_cfg(method: HeatmapMethod) -> HeatmapConfig {
        let mut cfg = HeatmapConfig::new(
            mu5(),
            1.0,
            vec![0.15, 0.4, 1.0],
            linspace(0.0, 2.0, 11),
            method,
        );
        cfg.estimate_alpha1 = false;
        cfg
    }

    #[test]
    fn heatmap_shapes_and_rows() {
        let g = heatmap(&small_cfg(HeatmapMethod::L2Rescaled)).unwrap();
        assert_eq!(g.dominant.len(), 3);
        assert!(g.dominant.iter().all(|r| r.len() == 11));
        // α = 0.15 collapses and stays gray.
        let first_gray = g.dominant[0].iter().position(Option::is_none).unwrap();
        assert!(g.dominant[0][first_gray..].iter().all(Option::is_none));
        // α = 1.0 is immediately major-aligned.
        assert!(g.dominant[2][1..].iter().all(|c| *c == Some(4)));
        assert_eq!(g.regime_lines.len(), 3);
    }

    #[test]
    fn gf_heatmap_is_major_everywhere() {
        let g = heatmap(&small_cfg(HeatmapMethod::GfRescaled)).unwrap();
        for row in &g.dominant {
            for c in &row[1..] {
                assert!(c.is_none() || *c == Some(4));
            }
        }
    }

    #[test]
    fn heatmap_json_round_trip_and_csv() {
        let mut cfg = small_cfg(HeatmapMethod::LinfRescaled);
        cfg.t_grid = linspace(0.0, 3.0, 7);
        let g = heatmap(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("grid.json");
        write_heatmap_json(&g, &p).unwrap();
        assert_eq!(read_heatmap_json(&p).unwrap(), g);
        let c = dir.path().join("grid.csv");
        write_heatmap_csv(&g, &c).unwrap();
        let text = std::fs::read_to_string(&c).unwrap();
        assert!(text.starts_with("alpha,t,dominant,loss,ntheta,mc,blowup\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 7);
    }

    #[test]
    fn gray_cells_encode_minus_one() {
        assert_eq!(encode_index(None), -1);
        assert_eq!(encode_index(Some(0)), 1);
        assert_eq!(decode_index(-1).unwrap(), None);
        assert!(decode_index(0).is_err());
    }

    #[test]
    fn jstar_ties_go_to_last() {
        let amp = vec![(0.0, 0.0), (0.0, 0.0), (0.0, 0.0)];
        assert_eq!(jstar_from(&amp).0, 2);
        let amp = vec![(0.5, 1.0), (0.7, 2.0), (0.0, 0.0)];
        assert_eq!(jstar_from(&amp), (1, 2.0));
    }

    #[test]
    fn lb_curve_shape() {
        let t = lb_curve(&mu5(), 1.0, 0.33, 400).unwrap();
        assert_eq!(t.alphas.len(), 400);
        assert!(t.values.iter().all(|r| r[4] == 1.0));
        assert!(t.values.iter().flatten().all(|v| v.is_finite() && *v > 0.0));
        let empty = lb_curve(&mu5(), 1.0, 10.0, 400).unwrap();
        assert!(empty.alphas.is_empty() && empty.note.is_some());
    }
}
