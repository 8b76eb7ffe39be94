//! Deterministic datasets and initializations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Example, FeatureVector, Label, LabeledDataset, NetworkState};
use crate::numeric::{fmt17, parse_f64};
use crate::rng::Rng;

/// The single-example dataset `{(μ, +1)}` in canonical coordinate order.
pub fn one_point(mu: &FeatureVector) -> LabeledDataset {
    LabeledDataset::new(vec![Example {
        x: mu.values().to_vec(),
        y: Label::Positive,
    }])
    .expect("a feature vector is a valid single example")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub mu: FeatureVector,
    pub sigma: f64,
    pub n: usize,
    pub seed: u64,
}

/// `N/2` positives `μ + ε` followed by `N/2` negatives `-μ + ε`, with
/// `ε ~ N(0, σ² I)` drawn row by row from one stream.
pub fn two_cluster(spec: &GeneratorSpec) -> Result<LabeledDataset> {
    if spec.n == 0 || spec.n % 2 != 0 {
        return Err(Error::Domain(format!("n must be even and positive, got {}", spec.n)));
    }
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be >= 0, got {}", spec.sigma)));
    }
    let mu = spec.mu.values();
    let mut rng = Rng::new(spec.seed);
    let examples = (0..spec.n)
        .map(|i| {
            let y = if i < spec.n / 2 {
                Label::Positive
            } else {
                Label::Negative
            };
            let x = mu
                .iter()
                .map(|m| y.sign() * m + spec.sigma * rng.next_gaussian())
                .collect();
            Example { x, y }
        })
        .collect();
    LabeledDataset::new(examples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitScale {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl InitScale {
    fn expand(&self, d: usize) -> Result<Vec<f64>> {
        let v = match self {
            InitScale::Scalar(a) => vec![*a; d],
            InitScale::Vector(v) => {
                if v.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: v.len(),
                    });
                }
                v.clone()
            }
        };
        if v.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Domain("initialization scale must be positive".into()));
        }
        Ok(v)
    }
}

/// All `L` layers equal to `α`.
pub fn init_balanced(d: usize, depth: usize, alpha: &InitScale) -> Result<NetworkState> {
    if depth == 0 || d == 0 {
        return Err(Error::Domain("need d >= 1 and L >= 1".into()));
    }
    NetworkState::new(vec![alpha.expand(d)?; depth])
}

/// Independent `N(0, α²)` entries, drawn layer by layer.
pub fn init_gaussian(d: usize, depth: usize, alpha: f64, seed: u64) -> Result<NetworkState> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    if depth == 0 || d == 0 {
        return Err(Error::Domain("need d >= 1 and L >= 1".into()));
    }
    let mut rng = Rng::new(seed);
    let layers = (0..depth)
        .map(|_| (0..d).map(|_| alpha * rng.next_gaussian()).collect())
        .collect();
    NetworkState::new(layers)
}

/// Writes `x1,...,xd,y` rows with 17 significant digits.
pub fn save_dataset_csv(data: &LabeledDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for ex in data.examples() {
        let mut row: Vec<String> = ex.x.iter().map(|v| fmt17(*v)).collect();
        row.push(if ex.y == Label::Positive { "1" } else { "-1" }.into());
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_dataset_csv(path: &Path) -> Result<LabeledDataset> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let d = header.len().saturating_sub(1);
    let expected: Vec<String> = (1..=d)
        .map(|j| format!("x{j}"))
        .chain(std::iter::once("y".to_string()))
        .collect();
    if d == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::parse(path.display().to_string(), "header must be x1,...,xd,y"));
    }
    let mut examples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let ctx = || format!("{} row {}", path.display(), line + 2);
        let mut vals = Vec::with_capacity(d + 1);
        for field in rec.iter() {
            vals.push(parse_f64(field).ok_or_else(|| Error::parse(ctx(), format!("bad number {field:?}")))?);
        }
        let y = Label::from_sign(vals[d]).ok_or_else(|| Error::parse(ctx(), "label must be 1 or -1"))?;
        vals.truncate(d);
        examples.push(Example { x: vals, y });
    }
    LabeledDataset::new(examples)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::parse(path.display().to_string(), e)
    }
}
