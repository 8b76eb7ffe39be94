//! Discrete SAM steps and explicit-Euler flows.
//!
//! Three clocks appear here. `times` is the integrator clock (step count times
//! `dt` or `η`). `tau_samples` is its companion: original time for rescaled
//! flows, the rescaled clock `Σ h·λ̂` (with `λ̂ = -ℓ'(ŝ)`) for original flows and
//! discrete runs on single-point data, and the integrator clock itself for
//! multi-point data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    beta_gradient, lift_to_layers, logistic_loss, loss_of_beta, loss_slope,
    perturbation_from_gradient, product_of_layers, LabeledDataset, NetworkState,
    PerturbationKind,
};
use crate::numeric::{dot, log_sum_exp, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FlowKind {
    /// Discrete SAM / GD iteration with step `eta`.
    Discrete { eta: f64 },
    /// `ẇ = -∇L(θ + ε)`.
    OriginalFlow,
    /// `ẇ⁽ⁱ⁾ = μ ⊙ ∏_{ℓ≠i}(w⁽ℓ⁾ + ε⁽ℓ⁾)`; single-point data only.
    RescaledFlow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub sample_stride: usize,
    pub blowup_threshold: f64,
    pub collapse_threshold: f64,
    /// Only consulted by [`balanced_l2_flow`].
    pub log_domain: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-4,
            t_max: 6.0,
            sample_stride: 100,
            blowup_threshold: 1e12,
            collapse_threshold: 1e-2,
            log_domain: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > 0.0
            && self.dt.is_finite()
            && self.t_max.is_finite()
            && self.dt < self.t_max
            && self.sample_stride > 0
            && self.blowup_threshold > 0.0
            && self.collapse_threshold > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid simulation config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrajectoryOutcome {
    Running,
    Collapsed { time: f64 },
    BlownUp { time: f64, indices: Vec<usize> },
    HorizonReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// β samples, or log β samples when `log_domain` is set.
    pub beta_samples: Vec<Vec<f64>>,
    pub log_domain: bool,
    pub loss_samples: Vec<f64>,
    pub ntheta_samples: Vec<f64>,
    pub tau_samples: Vec<f64>,
    /// `max_i ‖w⁽ⁱ⁾ - w⁽¹⁾‖₂` (the layer gap for L = 2, zero for L = 1).
    pub balancedness_samples: Vec<f64>,
    /// Running `∫ 1/n_θ` accumulated by the integrator (balanced flow only).
    pub integral_samples: Vec<f64>,
    pub outcome: TrajectoryOutcome,
    /// Last finite state reached (layer-resolved runs only).
    pub final_state: Option<NetworkState>,
}

impl TrajectoryRecord {
    fn empty(log_domain: bool) -> Self {
        TrajectoryRecord {
            times: Vec::new(),
            beta_samples: Vec::new(),
            log_domain,
            loss_samples: Vec::new(),
            ntheta_samples: Vec::new(),
            tau_samples: Vec::new(),
            balancedness_samples: Vec::new(),
            integral_samples: Vec::new(),
            outcome: TrajectoryOutcome::Running,
            final_state: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.beta_samples.first().map_or(0, Vec::len)
    }

    /// β at sample `k` in linear scale.
    pub fn beta(&self, k: usize) -> Vec<f64> {
        if self.log_domain {
            self.beta_samples[k].iter().map(|v| v.exp()).collect()
        } else {
            self.beta_samples[k].clone()
        }
    }

    /// log β at sample `k` (NaN for non-positive entries of a linear record).
    pub fn log_beta(&self, k: usize) -> Vec<f64> {
        if self.log_domain {
            self.beta_samples[k].clone()
        } else {
            self.beta_samples[k]
                .iter()
                .map(|&v| if v > 0.0 { v.ln() } else { f64::NAN })
                .collect()
        }
    }

    /// `‖β‖₂` at sample `k`, evaluated without overflow in log domain.
    pub fn beta_norm(&self, k: usize) -> f64 {
        if self.log_domain {
            let twice: Vec<f64> = self.beta_samples[k].iter().map(|v| 2.0 * v).collect();
            (0.5 * log_sum_exp(&twice)).exp()
        } else {
            norm2(&self.beta_samples[k])
        }
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    fn push(&mut self, t: f64, beta: Vec<f64>, loss: f64, ntheta: f64, tau: f64, gap: f64) {
        self.times.push(t);
        self.beta_samples.push(beta);
        self.loss_samples.push(loss);
        self.ntheta_samples.push(ntheta);
        self.tau_samples.push(tau);
        self.balancedness_samples.push(gap);
    }
}

/// Layer-resolved integrator state handed to observers after every step.
pub(crate) struct Observation<'a> {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub layers: &'a [Vec<f64>],
    pub beta: &'a [f64],
}

pub(crate) struct RunEnd {
    pub outcome: TrajectoryOutcome,
    pub t: f64,
    pub tau: f64,
    pub layers: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub step: usize,
}

struct Stepper<'a> {
    data: &'a LabeledDataset,
    kind: PerturbationKind,
    flow: FlowKind,
    layers: Vec<Vec<f64>>,
    grad: Vec<Vec<f64>>,
    eps: Vec<Vec<f64>>,
    shifted: Vec<Vec<f64>>,
    field: Vec<Vec<f64>>,
    neg_z: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(
        state: &NetworkState,
        data: &'a LabeledDataset,
        kind: PerturbationKind,
        flow: FlowKind,
    ) -> Result<Self> {
        kind.validate()?;
        if state.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                got: state.dim(),
            });
        }
        if flow == FlowKind::RescaledFlow && !data.is_single_point() {
            return Err(Error::Unsupported(
                "the rescaled flow is only defined for single-point datasets".into(),
            ));
        }
        if let FlowKind::Discrete { eta } = flow {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::Domain(format!("step size must be positive, got {eta}")));
            }
        }
        let shape = vec![vec![0.0; state.dim()]; state.depth()];
        Ok(Stepper {
            data,
            kind,
            flow,
            layers: state.layers().to_vec(),
            grad: shape.clone(),
            eps: shape.clone(),
            shifted: shape.clone(),
            field: shape,
            neg_z: data.signed_inputs()[0].iter().map(|v| -v).collect(),
        })
    }

    /// Advances by `h`; returns the increment of the companion clock.
    fn advance(&mut self, h: f64) -> f64 {
        let rescaled = self.flow == FlowKind::RescaledFlow;
        if self.kind.rho() != 0.0 {
            if rescaled {
                // Direction of the gradient with the positive factor -ℓ' removed.
                lift_to_layers(&self.neg_z, &self.layers, &mut self.grad);
            } else {
                let g = beta_gradient(&product_of_layers(&self.layers), self.data);
                lift_to_layers(&g, &self.layers, &mut self.grad);
            }
        }
        perturbation_from_gradient(&self.grad, self.kind, &mut self.eps);
        for ((s, w), e) in self.shifted.iter_mut().zip(&self.layers).zip(&self.eps) {
            for ((sj, wj), ej) in s.iter_mut().zip(w).zip(e) {
                *sj = wj + ej;
            }
        }
        let beta_hat = product_of_layers(&self.shifted);
        let single = self.data.is_single_point();
        let clock = if single {
            let s_hat = dot(&beta_hat, &self.data.signed_inputs()[0]);
            if rescaled {
                h * (1.0 + s_hat.exp())
            } else {
                -h * loss_slope(s_hat)
            }
        } else {
            h
        };
        if rescaled {
            lift_to_layers(&self.neg_z, &self.shifted, &mut self.field);
        } else {
            let g = beta_gradient(&beta_hat, self.data);
            lift_to_layers(&g, &self.shifted, &mut self.field);
        }
        // Both fields point uphill; descend.
        for (w, f) in self.layers.iter_mut().zip(&self.field) {
            for (wj, fj) in w.iter_mut().zip(f) {
                *wj -= h * fj;
            }
        }
        clock
    }
}

fn step_size(flow: FlowKind, cfg: &SimConfig) -> f64 {
    match flow {
        FlowKind::Discrete { eta } => eta,
        _ => cfg.dt,
    }
}

/// Drives the layer-resolved integrator, calling `observe` at the initial
/// state and after every finite step. Returning `false` stops the run.
pub(crate) fn run_flow<F>(
    state: &NetworkState,
    data: &LabeledDataset,
    kind: PerturbationKind,
    flow: FlowKind,
    cfg: &SimConfig,
    mut observe: F,
) -> Result<RunEnd>
where
    F: FnMut(&Observation) -> bool,
{
    cfg.validate()?;
    let mut st = Stepper::new(state, data, kind, flow)?;
    let h = step_size(flow, cfg);
    let n_steps = (cfg.t_max / h - 1e-9).ceil().max(1.0) as usize;
    let mut tau = 0.0;
    let mut beta = product_of_layers(&st.layers);
    let mut prev_norm = norm2(&beta);
    let mut prev_layers = st.layers.clone();
    let finish = |outcome, step: usize, tau, layers: Vec<Vec<f64>>, beta| RunEnd {
        outcome,
        t: step as f64 * h,
        tau,
        layers,
        beta,
        step,
    };
    if !observe(&Observation {
        step: 0,
        t: 0.0,
        tau,
        layers: &st.layers,
        beta: &beta,
    }) {
        return Ok(finish(TrajectoryOutcome::Running, 0, tau, st.layers, beta));
    }
    for step in 1..=n_steps {
        prev_layers.clone_from(&st.layers);
        let dtau = st.advance(h);
        let new_beta = product_of_layers(&st.layers);
        let bad: Vec<usize> = new_beta
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.is_finite() || b.abs() >= cfg.blowup_threshold)
            .map(|(j, _)| j)
            .collect();
        let finite_layers = st.layers.iter().flatten().all(|v| v.is_finite());
        if !bad.is_empty() || !finite_layers {
            let time = (step as f64 - 0.5) * h;
            return Ok(finish(
                TrajectoryOutcome::BlownUp { time, indices: bad },
                step - 1,
                tau,
                prev_layers,
                beta,
            ));
        }
        tau += dtau;
        beta = new_beta;
        let t = step as f64 * h;
        let norm = norm2(&beta);
        let keep = observe(&Observation {
            step,
            t,
            tau,
            layers: &st.layers,
            beta: &beta,
        });
        if norm <= cfg.collapse_threshold && norm < prev_norm {
            return Ok(finish(
                TrajectoryOutcome::Collapsed { time: t },
                step,
                tau,
                st.layers,
                beta,
            ));
        }
        if !keep {
            return Ok(finish(TrajectoryOutcome::Running, step, tau, st.layers, beta));
        }
        prev_norm = norm;
    }
    Ok(finish(
        TrajectoryOutcome::HorizonReached,
        n_steps,
        tau,
        st.layers,
        beta,
    ))
}

/// `n_θ`: global norm of the loss gradient with the factor `-ℓ'` removed for
/// single-point data, or the raw gradient norm for multi-point data.
pub(crate) fn ntheta_of(layers: &[Vec<f64>], beta: &[f64], data: &LabeledDataset) -> f64 {
    let g = if data.is_single_point() {
        data.signed_inputs()[0].clone()
    } else {
        beta_gradient(beta, data)
    };
    let mut out = vec![vec![0.0; beta.len()]; layers.len()];
    lift_to_layers(&g, layers, &mut out);
    out.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn layer_spread(layers: &[Vec<f64>]) -> f64 {
    layers[1..].iter().fold(0.0, |m, l| {
        let gap = l
            .iter()
            .zip(&layers[0])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        m.max(gap)
    })
}

/// One discrete SAM step `w ← w - η ∇L(w + ε(w))`.
pub fn sam_step(
    state: &NetworkState,
    data: &LabeledDataset,
    kind: PerturbationKind,
    eta: f64,
) -> Result<NetworkState> {
    discrete_step(state, data, kind, FlowKind::Discrete { eta }, eta)
}

/// One Euler step of the rescaled flow with step `eta` (single-point data).
pub fn rescaled_step(
    state: &NetworkState,
    data: &LabeledDataset,
    kind: PerturbationKind,
    eta: f64,
) -> Result<NetworkState> {
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("step size must be positive, got {eta}")));
    }
    discrete_step(state, data, kind, FlowKind::RescaledFlow, eta)
}

fn discrete_step(
    state: &NetworkState,
    data: &LabeledDataset,
    kind: PerturbationKind,
    flow: FlowKind,
    h: f64,
) -> Result<NetworkState> {
    let mut st = Stepper::new(state, data, kind, flow)?;
    st.advance(h);
    let next = NetworkState::new(st.layers)?;
    if !next.is_finite() {
        return Err(Error::BlowUp { time: h });
    }
    Ok(next)
}

/// Explicit-Euler trajectory of the chosen flow, sampled every
/// `cfg.sample_stride` steps plus the final state.
pub fn integrate(
    state: &NetworkState,
    data: &LabeledDataset,
    kind: PerturbationKind,
    flow: FlowKind,
    cfg: &SimConfig,
) -> Result<TrajectoryRecord> {
    let mut rec = TrajectoryRecord::empty(false);
    let stride = cfg.sample_stride;
    let mut last_recorded = usize::MAX;
    let end = run_flow(state, data, kind, flow, cfg, |obs| {
        if obs.step % stride == 0 {
            record_layers(&mut rec, obs.t, obs.tau, obs.layers, obs.beta, data);
            last_recorded = obs.step;
        }
        true
    })?;
    if last_recorded != end.step {
        record_layers(&mut rec, end.t, end.tau, &end.layers, &end.beta, data);
    }
    rec.outcome = end.outcome;
    rec.final_state = Some(NetworkState::new(end.layers)?);
    Ok(rec)
}

fn record_layers(
    rec: &mut TrajectoryRecord,
    t: f64,
    tau: f64,
    layers: &[Vec<f64>],
    beta: &[f64],
    data: &LabeledDataset,
) {
    rec.push(
        t,
        beta.to_vec(),
        loss_of_beta(beta, data),
        ntheta_of(layers, beta, data),
        tau,
        layer_spread(layers),
    );
}

/// `‖w⁽¹⁾ - w⁽²⁾‖₂` for a two-layer network.
pub fn balancedness_gap(state: &NetworkState) -> Result<f64> {
    if state.depth() != 2 {
        return Err(Error::Unsupported(format!(
            "balancedness gap needs L = 2, got L = {}",
            state.depth()
        )));
    }
    Ok(layer_spread(state.layers()))
}

/// Largest admissible `n_θ` before the balanced flow reports overflow.
const NTHETA_LIMIT: f64 = 1e280;

/// Reduced ℓ2 flow on the balanced two-layer manifold for `D_μ`:
/// `d log β_j / dt = 2 μ_j (1 - ρ μ_j / n_θ)`.
pub(crate) struct BalancedL2 {
    mu: Vec<f64>,
    log_mu2: Vec<f64>,
    rho: f64,
    dt: f64,
    log_domain: bool,
    /// log β in log domain, β otherwise.
    state: Vec<f64>,
    scratch: Vec<f64>,
    pub step: usize,
    pub tau: f64,
    pub integral: f64,
}

impl BalancedL2 {
    pub(crate) fn new(mu: &[f64], alpha: &[f64], rho: f64, dt: f64, log_domain: bool) -> Result<Self> {
        if alpha.len() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                got: alpha.len(),
            });
        }
        if alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Domain("alpha must be positive entrywise".into()));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("rho must be >= 0, got {rho}")));
        }
        let state = if log_domain {
            alpha.iter().map(|a| 2.0 * a.ln()).collect()
        } else {
            alpha.iter().map(|a| a * a).collect()
        };
        Ok(BalancedL2 {
            mu: mu.to_vec(),
            log_mu2: mu.iter().map(|m| 2.0 * m.ln()).collect(),
            rho,
            dt,
            log_domain,
            state,
            scratch: vec![0.0; mu.len()],
            step: 0,
            tau: 0.0,
            integral: 0.0,
        })
    }

    pub(crate) fn t(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub(crate) fn raw_state(&self) -> &[f64] {
        &self.state
    }

    pub(crate) fn log_ntheta(&mut self) -> f64 {
        if self.log_domain {
            for (s, (lm, lb)) in self.scratch.iter_mut().zip(self.log_mu2.iter().zip(&self.state)) {
                *s = lm + lb;
            }
            0.5 * (std::f64::consts::LN_2 + log_sum_exp(&self.scratch))
        } else {
            let s: f64 = self.mu.iter().zip(&self.state).map(|(m, b)| m * m * b).sum();
            0.5 * (2.0 * s).ln()
        }
    }

    pub(crate) fn log_norm(&mut self) -> f64 {
        if self.log_domain {
            for (s, lb) in self.scratch.iter_mut().zip(&self.state) {
                *s = 2.0 * lb;
            }
            0.5 * log_sum_exp(&self.scratch)
        } else {
            norm2(&self.state).ln()
        }
    }

    pub(crate) fn margin(&self, ntheta: f64) -> (f64, f64) {
        let mut s = 0.0;
        let mut s_hat = 0.0;
        for (m, x) in self.mu.iter().zip(&self.state) {
            let b = if self.log_domain { x.exp() } else { *x };
            let shrink = 1.0 - self.rho * m / ntheta;
            s += m * b;
            s_hat += m * b * shrink * shrink;
        }
        (s, s_hat)
    }

    /// Single Euler step; `Err` when `n_θ` leaves the representable range.
    pub(crate) fn advance(&mut self) -> Result<()> {
        let log_n = self.log_ntheta();
        if log_n > NTHETA_LIMIT.ln() || log_n.is_nan() {
            return Err(Error::BlowUp { time: self.t() });
        }
        let n = log_n.exp();
        let (_, s_hat) = self.margin(n);
        // A nonpositive Euler factor would flip the sign of β: the linear
        // domain cannot take this step, so it counts as a blow-up.
        if !self.log_domain
            && self
                .mu
                .iter()
                .any(|m| !(1.0 + self.dt * 2.0 * m * (1.0 - self.rho * m / n) > 0.0))
        {
            return Err(Error::BlowUp { time: self.t() });
        }
        for (x, m) in self.state.iter_mut().zip(&self.mu) {
            let rate = 2.0 * m * (1.0 - self.rho * m / n);
            if self.log_domain {
                *x += self.dt * rate;
            } else {
                *x += self.dt * rate * *x;
            }
        }
        self.integral += self.dt / n;
        self.tau += self.dt * (1.0 + s_hat.exp());
        self.step += 1;
        Ok(())
    }
}

/// Balanced two-layer ℓ2-SAM flow on `D_μ` in rescaled time.
///
/// `cfg.blowup_threshold` is not used: the run stops only when `n_θ`
/// exceeds 1e280, at collapse, or at the horizon.
pub fn balanced_l2_flow(
    mu: &crate::model::FeatureVector,
    alpha: &[f64],
    rho: f64,
    cfg: &SimConfig,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let mut flow = BalancedL2::new(mu.values(), alpha, rho, cfg.dt, cfg.log_domain)?;
    let n_steps = (cfg.t_max / cfg.dt - 1e-9).ceil() as usize;
    let mut rec = TrajectoryRecord::empty(cfg.log_domain);
    let record = |rec: &mut TrajectoryRecord, flow: &mut BalancedL2| {
        let log_n = flow.log_ntheta();
        let n = log_n.exp();
        let (s, _) = flow.margin(n);
        rec.push(
            flow.t(),
            flow.raw_state().to_vec(),
            logistic_loss(s),
            n,
            flow.tau,
            0.0,
        );
        rec.integral_samples.push(flow.integral);
    };
    record(&mut rec, &mut flow);
    let mut prev_log_norm = flow.log_norm();
    let log_collapse = cfg.collapse_threshold.ln();
    rec.outcome = TrajectoryOutcome::HorizonReached;
    for _ in 0..n_steps {
        if let Err(Error::BlowUp { time }) = flow.advance() {
            rec.outcome = TrajectoryOutcome::BlownUp {
                time: time + 0.5 * cfg.dt,
                indices: Vec::new(),
            };
            break;
        }
        let log_norm = flow.log_norm();
        let collapsed = log_norm <= log_collapse && log_norm < prev_log_norm;
        if flow.step % cfg.sample_stride == 0 || collapsed {
            record(&mut rec, &mut flow);
        }
        if collapsed {
            rec.outcome = TrajectoryOutcome::Collapsed { time: flow.t() };
            break;
        }
        prev_log_norm = log_norm;
    }
    if rec.final_time() < flow.t() {
        record(&mut rec, &mut flow);
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{param_gradient, Example, FeatureVector, Label, LayeredVector};

    fn d_mu(mu: &[f64]) -> LabeledDataset {
        LabeledDataset::new(vec![Example {
            x: mu.to_vec(),
            y: Label::Positive,
        }])
        .unwrap()
    }

    #[test]
    fn gd_step_matches_reference() {
        let data = d_mu(&[1.0, 2.0]);
        let s = NetworkState::new(vec![vec![0.3, -0.2], vec![0.5, 0.4]]).unwrap();
        let g = param_gradient(&s, &data).unwrap();
        let mut reference = s.layers().to_vec();
        for (w, gl) in reference.iter_mut().zip(&g.layers) {
            for (wj, gj) in w.iter_mut().zip(gl) {
                *wj -= 0.1 * gj;
            }
        }
        let next = sam_step(&s, &data, PerturbationKind::None, 0.1).unwrap();
        assert_eq!(next.layers(), &reference[..]);
    }

    #[test]
    fn l2_sam_step_from_origin_depth1() {
        let data = d_mu(&[1.0, 2.0]);
        let s = NetworkState::new(vec![vec![0.0, 0.0]]).unwrap();
        let next = sam_step(&s, &data, PerturbationKind::L2(1.0), 1.0).unwrap();
        let c = -loss_slope(-5f64.sqrt());
        assert!((c - 1.0 / (1.0 + (-5f64.sqrt()).exp())).abs() < 1e-15);
        assert!((c - 0.90344).abs() < 1e-5);
        assert!((next.layers()[0][0] - c).abs() < 1e-15);
        assert!((next.layers()[0][1] - 2.0 * c).abs() < 1e-15);
    }

    #[test]
    fn linf_fixed_point_step() {
        let data = d_mu(&[1.0, 3.0]);
        let s = NetworkState::new(vec![vec![1.0, 0.4]; 2]).unwrap();
        let next = rescaled_step(&s, &data, PerturbationKind::LInf(1.0), 0.01).unwrap();
        assert_eq!(next.layers()[0][0], 1.0);
        assert_eq!(next.layers()[1][0], 1.0);
    }

    #[test]
    fn rescaled_rejects_multipoint() {
        let data = LabeledDataset::new(vec![
            Example { x: vec![1.0], y: Label::Positive },
            Example { x: vec![-1.0], y: Label::Negative },
        ])
        .unwrap();
        let s = NetworkState::new(vec![vec![0.1]]).unwrap();
        let r = integrate(
            &s,
            &data,
            PerturbationKind::None,
            FlowKind::RescaledFlow,
            &SimConfig::default(),
        );
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn rho_zero_rescaled_equals_gf_bitwise() {
        let data = d_mu(&[1.0, 2.0, 3.0]);
        let s = NetworkState::new(vec![vec![0.2, 0.1, 0.3]; 2]).unwrap();
        let cfg = SimConfig {
            t_max: 0.5,
            sample_stride: 7,
            ..SimConfig::default()
        };
        let a = integrate(&s, &data, PerturbationKind::L2(0.0), FlowKind::RescaledFlow, &cfg).unwrap();
        let b = integrate(&s, &data, PerturbationKind::None, FlowKind::RescaledFlow, &cfg).unwrap();
        assert_eq!(a.beta_samples, b.beta_samples);
    }

    #[test]
    fn record_invariants() {
        let data = d_mu(&[1.0, 2.0]);
        let s = NetworkState::new(vec![vec![0.5, 0.5]; 2]).unwrap();
        let cfg = SimConfig {
            t_max: 1.0,
            sample_stride: 33,
            ..SimConfig::default()
        };
        let r = integrate(&s, &data, PerturbationKind::L2(0.5), FlowKind::RescaledFlow, &cfg).unwrap();
        let n = r.len();
        assert!(n > 2);
        for v in [&r.loss_samples, &r.ntheta_samples, &r.tau_samples, &r.balancedness_samples] {
            assert_eq!(v.len(), n);
        }
        assert!(r.times.windows(2).all(|w| w[0] < w[1]));
        assert!(r.tau_samples.windows(2).all(|w| w[0] <= w[1]));
        assert!(r.loss_samples.iter().all(|l| *l >= 0.0));
        assert!((r.final_time() - 1.0).abs() < 1e-9);
        assert_eq!(r.outcome, TrajectoryOutcome::HorizonReached);
    }

    #[test]
    fn linf_absorption_at_log2() {
        let data = d_mu(&[1.0]);
        let s = NetworkState::new(vec![vec![0.5]; 2]).unwrap();
        let cfg = SimConfig {
            t_max: 1.5,
            sample_stride: 1,
            collapse_threshold: 1e-300,
            ..SimConfig::default()
        };
        let r = integrate(&s, &data, PerturbationKind::LInf(1.0), FlowKind::RescaledFlow, &cfg).unwrap();
        let hit = r
            .times
            .iter()
            .zip(&r.beta_samples)
            .find(|(_, b)| b[0].abs() < 1e-6)
            .map(|(t, _)| *t)
            .unwrap();
        // β = w² so |β| < 1e-6 means |w| < 1e-3 ~ 10·dt·μρ.
        assert!((hit - 2f64.ln()).abs() < 20.0 * cfg.dt, "hit at {hit}");
        let tail = r.beta_samples.last().unwrap()[0];
        assert!(tail.abs() < 1e-7);
    }

    #[test]
    fn balancedness_gap_rules() {
        let s = NetworkState::new(vec![vec![1.0, 2.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(balancedness_gap(&s).unwrap(), 2.0);
        let swapped = NetworkState::new(vec![vec![1.0, 0.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(balancedness_gap(&swapped).unwrap(), 2.0);
        let deep = NetworkState::new(vec![vec![1.0]; 3]).unwrap();
        assert!(balancedness_gap(&deep).is_err());
    }

    #[test]
    fn balanced_flow_initial_values() {
        let mu = FeatureVector::new(vec![4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let cfg = SimConfig {
            t_max: 0.01,
            ..SimConfig::default()
        };
        let r = balanced_l2_flow(&mu, &[0.4; 5], 1.0, &cfg).unwrap();
        let n0 = 0.4 * 2f64.sqrt() * 190f64.sqrt();
        assert!((r.ntheta_samples[0] - n0).abs() < 1e-12);
        assert!((n0 - 7.7974).abs() < 1e-4);
        assert_eq!(r.integral_samples[0], 0.0);
    }

    #[test]
    fn balanced_flow_rho_zero_is_linear_in_log() {
        let mu = FeatureVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let cfg = SimConfig {
            t_max: 1.0,
            ..SimConfig::default()
        };
        let r = balanced_l2_flow(&mu, &[0.1, 0.2, 0.3], 0.0, &cfg).unwrap();
        for (t, lb) in r.times.iter().zip(&r.beta_samples) {
            for (j, m) in mu.values().iter().enumerate() {
                let a = [0.1f64, 0.2, 0.3][j];
                let want = 2.0 * a.ln() + 2.0 * m * t;
                assert!((lb[j] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn shifted_state_shape_checked() {
        let s = NetworkState::new(vec![vec![1.0, 2.0]]).unwrap();
        assert!(s.shifted(&LayeredVector::zeros(2, 2)).is_err());
    }
}
