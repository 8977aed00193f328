use serde::{Deserialize, Serialize};

use super::factorization::{col_factor, dot, row_factor, unit_normal_log_pdf};
use super::logistic::bernoulli_log_lik;
use super::Dataset;
use crate::density::Mixture;
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Bimodal,
    Logistic,
    MatrixFactorization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveMetrics {
    pub auroc: Option<f64>,
    pub mse: Option<f64>,
    pub mean_log_likelihood: f64,
}

/// Area under the ROC curve by the Mann–Whitney rank sum, ties sharing the
/// average rank.
pub fn auroc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(Error::invalid("labels", "AUROC needs both classes"));
    }
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 1.0)
        .map(|(r, _)| r)
        .sum();
    Ok((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// Monte-Carlo posterior-predictive metrics on held-out data.
///
/// Classification: predictive probabilities average σ(x·w) over posterior
/// draws, scored by AUROC and mean Bernoulli log-likelihood.
/// Factorization: MSE of the posterior-mean reconstruction on the held-out
/// cells and the mean log of the averaged Gaussian likelihood.
pub fn predictive_metrics(
    kind: ModelKind,
    posterior: &Mixture,
    test: &Dataset,
    n_samples: usize,
    seed: u64,
) -> Result<PredictiveMetrics> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be at least 1"));
    }
    match (kind, test) {
        (ModelKind::Logistic, Dataset::Classification(data)) => {
            if posterior.dim() != data.n_features() {
                return Err(Error::DimensionMismatch {
                    expected: data.n_features(),
                    got: posterior.dim(),
                });
            }
            let draws = posterior.sample(n_samples, seed);
            let probs: Vec<f64> = data
                .features()
                .iter()
                .map(|x| draws.iter().map(|w| sigmoid(dot(x, w))).sum::<f64>() / n_samples as f64)
                .collect();
            let ll = probs
                .iter()
                .zip(data.labels())
                .map(|(&p, &y)| bernoulli_log_lik(y, p))
                .sum::<f64>()
                / data.len().max(1) as f64;
            Ok(PredictiveMetrics {
                auroc: Some(auroc(&probs, data.labels())?),
                mse: None,
                mean_log_likelihood: ll,
            })
        }
        (ModelKind::MatrixFactorization, Dataset::Matrix(data)) => {
            let span = data.n_rows() + data.n_cols();
            if posterior.dim() % span != 0 {
                return Err(Error::DimensionMismatch {
                    expected: span * (posterior.dim() / span).max(1),
                    got: posterior.dim(),
                });
            }
            let k = posterior.dim() / span;
            let draws = posterior.sample(n_samples, seed);
            let ln_s = (n_samples as f64).ln();
            let mut se = 0.0;
            let mut ll = 0.0;
            for c in data.cells() {
                let preds: Vec<f64> = draws
                    .iter()
                    .map(|z| dot(row_factor(z, k, c.row), col_factor(z, k, data.n_rows(), c.col)))
                    .collect();
                let mean = preds.iter().sum::<f64>() / n_samples as f64;
                se += (c.value - mean).powi(2);
                let terms: Vec<f64> = preds.iter().map(|p| unit_normal_log_pdf(c.value - p)).collect();
                ll += log_sum_exp(&terms) - ln_s;
            }
            let n = data.len().max(1) as f64;
            Ok(PredictiveMetrics {
                auroc: None,
                mse: Some(se / n),
                mean_log_likelihood: ll / n,
            })
        }
        (kind, _) => Err(Error::WrongModelKind(format!(
            "predictive metrics are not defined for model kind {kind:?} with this dataset"
        ))),
    }
}
