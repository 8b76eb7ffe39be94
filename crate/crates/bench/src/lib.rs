//! Shared inputs for the criterion benches.

use samdiag_core::datagen::{two_cluster, GeneratorSpec};
use samdiag_core::{FeatureVector, LabeledDataset, SimConfig};

/// The five-feature vector used throughout the heatmap experiments.
pub fn mu5() -> FeatureVector {
    FeatureVector::new(vec![4.0, 5.0, 6.0, 7.0, 8.0]).expect("valid features")
}

pub fn mu_d(d: usize) -> FeatureVector {
    FeatureVector::new((1..=d).map(|j| j as f64).collect()).expect("valid features")
}

/// Noisy two-cluster data of `n` points in `d` dimensions.
pub fn clusters(d: usize, n: usize) -> LabeledDataset {
    two_cluster(&GeneratorSpec {
        mu: mu_d(d),
        sigma: 0.3,
        n,
        seed: 11,
    })
    .expect("valid generator spec")
}

pub fn flow_config(t_max: f64) -> SimConfig {
    SimConfig {
        t_max,
        sample_stride: 1000,
        ..SimConfig::default()
    }
}
