//! Synthetic stand-ins for the real-data experiments.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::{ClassificationData, MatrixData};
use crate::rng;

/// Linearly separable binary classification: features are standard normal
/// and the label is the sign of x·w for a hidden standard-normal w.
pub fn synthetic_logistic(n: usize, n_features: usize, seed: u64) -> Result<ClassificationData> {
    if n == 0 || n_features == 0 {
        return Err(Error::invalid("synthetic_logistic", "need at least one row and one feature"));
    }
    let mut r = rng::stream(seed);
    let w: Vec<f64> = (0..n_features).map(|_| r.sample(StandardNormal)).collect();
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..n_features).map(|_| r.sample(StandardNormal)).collect();
        let margin: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        labels.push(if margin > 0.0 { 1.0 } else { 0.0 });
        features.push(x);
    }
    ClassificationData::new(n_features, features, labels)
}

/// Settings for [`synthetic_matrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixSpec {
    pub n_rows: usize,
    pub n_cols: usize,
    pub rank: usize,
    pub noise: f64,
    /// Probability that a cell is observed.
    pub observed: f64,
}

impl Default for MatrixSpec {
    fn default() -> Self {
        Self {
            n_rows: 20,
            n_cols: 15,
            rank: 2,
            noise: 0.3,
            observed: 0.5,
        }
    }
}

/// Low-rank matrix UᵀV with standard-normal factors plus Gaussian noise,
/// observed on a random mask.
pub fn synthetic_matrix(spec: &MatrixSpec, seed: u64) -> Result<MatrixData> {
    if !(spec.observed > 0.0 && spec.observed <= 1.0) || !(spec.noise >= 0.0) || spec.rank == 0 {
        return Err(Error::invalid("synthetic_matrix", format!("bad settings {spec:?}")));
    }
    let mut r = rng::stream(seed);
    let mut factor = |n: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..spec.rank).map(|_| r.sample(StandardNormal)).collect()).collect()
    };
    let u = factor(spec.n_rows);
    let v = factor(spec.n_cols);
    let mut values = Vec::with_capacity(spec.n_rows);
    let mut mask = Vec::with_capacity(spec.n_rows);
    for ui in &u {
        let mut row = Vec::with_capacity(spec.n_cols);
        let mut keep = Vec::with_capacity(spec.n_cols);
        for vj in &v {
            let clean: f64 = ui.iter().zip(vj).map(|(a, b)| a * b).sum();
            let eps: f64 = r.sample(StandardNormal);
            row.push(clean + spec.noise * eps);
            keep.push(r.random::<f64>() < spec.observed);
        }
        values.push(row);
        mask.push(keep);
    }
    MatrixData::from_dense(&values, &mask)
}
