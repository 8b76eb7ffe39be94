//! Loss, gradient, perturbation and predictor kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::sign;

/// Feature vector μ with strictly positive, strictly increasing entries.
///
/// Values are stored in canonical (increasing) order; `user_order[k]` is the
/// position the k-th smallest value had in the caller's input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    user_order: Vec<usize>,
}

impl FeatureVector {
    /// Sorts `values` into canonical order. Entries must be finite, positive
    /// and pairwise distinct.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidFeatures("empty feature vector".into()));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidFeatures(format!(
                "entries must be finite and positive, found {bad}"
            )));
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        if sorted.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidFeatures(
                "entries must be pairwise distinct".into(),
            ));
        }
        Ok(FeatureVector {
            values: sorted,
            user_order: order,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn user_order(&self) -> &[usize] {
        &self.user_order
    }

    /// Maps a canonical-order vector back to the caller's coordinate order.
    pub fn to_user_order(&self, canonical: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; canonical.len()];
        for (k, &i) in self.user_order.iter().enumerate() {
            out[i] = canonical[k];
        }
        out
    }

    /// `Σ μ_j^p`.
    pub fn power_sum(&self, p: i32) -> f64 {
        self.values.iter().map(|m| m.powi(p)).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.power_sum(2).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn from_sign(y: f64) -> Option<Label> {
        if y == 1.0 {
            Some(Label::Positive)
        } else if y == -1.0 {
            Some(Label::Negative)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub x: Vec<f64>,
    pub y: Label,
}

/// Nonempty binary dataset with a common input dimension.
///
/// The label-absorbed inputs `y·x` are cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    examples: Vec<Example>,
    signed: Vec<Vec<f64>>,
    dim: usize,
}

impl LabeledDataset {
    pub fn new(examples: Vec<Example>) -> Result<Self> {
        let first = examples
            .first()
            .ok_or_else(|| Error::InvalidDataset("dataset is empty".into()))?;
        let dim = first.x.len();
        if dim == 0 {
            return Err(Error::InvalidDataset("inputs must have d >= 1".into()));
        }
        for ex in &examples {
            if ex.x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: ex.x.len(),
                });
            }
            if ex.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset("non-finite input value".into()));
            }
        }
        let signed = examples
            .iter()
            .map(|ex| ex.x.iter().map(|v| ex.y.sign() * v).collect())
            .collect();
        Ok(LabeledDataset {
            examples,
            signed,
            dim,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Label-absorbed inputs `y_n x_n`.
    pub fn signed_inputs(&self) -> &[Vec<f64>] {
        &self.signed
    }

    pub fn is_single_point(&self) -> bool {
        self.examples.len() == 1
    }
}

/// Weights of an L-layer diagonal network (`layers[i][j] = w⁽ⁱ⁾_j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    layers: Vec<Vec<f64>>,
}

impl NetworkState {
    pub fn new(layers: Vec<Vec<f64>>) -> Result<Self> {
        check_shape(&layers)?;
        Ok(NetworkState { layers })
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn dim(&self) -> usize {
        self.layers[0].len()
    }

    pub fn predictor(&self) -> Vec<f64> {
        predictor(self)
    }

    /// `self + other`, layer by layer.
    pub fn shifted(&self, other: &LayeredVector) -> Result<NetworkState> {
        self.check_same_shape(other)?;
        let layers = self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|(w, e)| w.iter().zip(e).map(|(a, b)| a + b).collect())
            .collect();
        Ok(NetworkState { layers })
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().flatten().all(|v| v.is_finite())
    }

    fn check_same_shape(&self, other: &LayeredVector) -> Result<()> {
        if other.layers.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len(),
                got: other.layers.len(),
            });
        }
        if other.layers[0].len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.layers[0].len(),
            });
        }
        Ok(())
    }
}

/// Gradient- or perturbation-shaped collection of L d-vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredVector {
    pub layers: Vec<Vec<f64>>,
}

impl LayeredVector {
    pub fn zeros(depth: usize, dim: usize) -> Self {
        LayeredVector {
            layers: vec![vec![0.0; dim]; depth],
        }
    }

    pub fn zeros_like(state: &NetworkState) -> Self {
        Self::zeros(state.depth(), state.dim())
    }

    /// Global Euclidean norm over all layers.
    pub fn norm2(&self) -> f64 {
        self.layers.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.layers.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().flatten().all(|v| *v == 0.0)
    }
}

fn check_shape(layers: &[Vec<f64>]) -> Result<()> {
    let first = layers
        .first()
        .ok_or_else(|| Error::InvalidState("network needs at least one layer".into()))?;
    if first.is_empty() {
        return Err(Error::InvalidState("layers must have d >= 1".into()));
    }
    for l in layers {
        if l.len() != first.len() {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                got: l.len(),
            });
        }
    }
    Ok(())
}

/// Which SAM ascent step is applied before the gradient evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PerturbationKind {
    None,
    LInf(f64),
    L2(f64),
}

impl PerturbationKind {
    pub fn rho(self) -> f64 {
        match self {
            PerturbationKind::None => 0.0,
            PerturbationKind::LInf(r) | PerturbationKind::L2(r) => r,
        }
    }

    pub fn validate(self) -> Result<()> {
        let r = self.rho();
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::Domain(format!("rho must be finite and >= 0, got {r}")));
        }
        Ok(())
    }
}

/// `log(1 + e^{-m})`.
pub fn logistic_loss(margin: f64) -> f64 {
    if margin < -30.0 {
        -margin + margin.exp().ln_1p()
    } else {
        (-margin).exp().ln_1p()
    }
}

/// `ℓ'(m) = -1 / (1 + e^m)`.
pub fn loss_slope(margin: f64) -> f64 {
    if margin > 0.0 {
        let e = (-margin).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + margin.exp())
    }
}

/// Coordinatewise product of all layers.
pub fn predictor(state: &NetworkState) -> Vec<f64> {
    product_of_layers(state.layers())
}

pub(crate) fn product_of_layers(layers: &[Vec<f64>]) -> Vec<f64> {
    let mut beta = layers[0].clone();
    for l in &layers[1..] {
        for (b, w) in beta.iter_mut().zip(l) {
            *b *= w;
        }
    }
    beta
}

fn check_dims(state: &NetworkState, data: &LabeledDataset) -> Result<()> {
    if state.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: state.dim(),
        });
    }
    Ok(())
}

pub fn dataset_loss(state: &NetworkState, data: &LabeledDataset) -> Result<f64> {
    check_dims(state, data)?;
    Ok(loss_of_beta(&predictor(state), data))
}

pub(crate) fn loss_of_beta(beta: &[f64], data: &LabeledDataset) -> f64 {
    data.signed_inputs()
        .iter()
        .map(|z| logistic_loss(crate::numeric::dot(beta, z)))
        .sum()
}

/// `Σ_n ℓ'(⟨β, z_n⟩) z_n` with `z_n = y_n x_n`: the gradient with respect to β.
pub(crate) fn beta_gradient(beta: &[f64], data: &LabeledDataset) -> Vec<f64> {
    let mut g = vec![0.0; beta.len()];
    for z in data.signed_inputs() {
        let s = loss_slope(crate::numeric::dot(beta, z));
        for (gj, zj) in g.iter_mut().zip(z) {
            *gj += s * zj;
        }
    }
    g
}

/// Chain rule through the product: layer i receives `g ⊙ ∏_{k≠i} w⁽ᵏ⁾`.
pub(crate) fn lift_to_layers(g: &[f64], layers: &[Vec<f64>], out: &mut [Vec<f64>]) {
    let depth = layers.len();
    for i in 0..depth {
        for j in 0..g.len() {
            let mut prod = g[j];
            for (k, l) in layers.iter().enumerate() {
                if k != i {
                    prod *= l[j];
                }
            }
            out[i][j] = prod;
        }
    }
}

pub fn param_gradient(state: &NetworkState, data: &LabeledDataset) -> Result<LayeredVector> {
    check_dims(state, data)?;
    let g = beta_gradient(&predictor(state), data);
    let mut out = LayeredVector::zeros_like(state);
    lift_to_layers(&g, state.layers(), &mut out.layers);
    Ok(out)
}

/// SAM ascent direction built from an arbitrary gradient-shaped input.
pub(crate) fn perturbation_from_gradient(grad: &[Vec<f64>], kind: PerturbationKind, out: &mut [Vec<f64>]) {
    match kind {
        PerturbationKind::None => zero_fill(out),
        PerturbationKind::LInf(rho) => {
            for (o, g) in out.iter_mut().zip(grad) {
                for (oj, gj) in o.iter_mut().zip(g) {
                    *oj = rho * sign(*gj);
                }
            }
        }
        PerturbationKind::L2(rho) => {
            let norm = grad.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || rho == 0.0 {
                zero_fill(out);
            } else {
                for (o, g) in out.iter_mut().zip(grad) {
                    for (oj, gj) in o.iter_mut().zip(g) {
                        *oj = rho * gj / norm;
                    }
                }
            }
        }
    }
}

fn zero_fill(out: &mut [Vec<f64>]) {
    for o in out {
        o.iter_mut().for_each(|v| *v = 0.0);
    }
}

pub fn perturbation(
    state: &NetworkState,
    data: &LabeledDataset,
    kind: PerturbationKind,
) -> Result<LayeredVector> {
    kind.validate()?;
    let grad = param_gradient(state, data)?;
    let mut out = LayeredVector::zeros_like(state);
    perturbation_from_gradient(&grad.layers, kind, &mut out.layers);
    Ok(out)
}
