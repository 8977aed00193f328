use super::{ClassificationData, TargetModel};
use crate::error::Result;
use crate::math::{log_sigmoid, sigmoid, LN_2PI};

/// Bayesian logistic regression with a standard-normal prior on the weights.
/// The latent vector is the weight vector; there is no separate intercept.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    data: ClassificationData,
}

pub fn logistic_regression_model(data: ClassificationData) -> Result<LogisticRegression> {
    data.check_binary()?;
    Ok(LogisticRegression { data })
}

impl LogisticRegression {
    pub fn data(&self) -> &ClassificationData {
        &self.data
    }

    fn logit(x: &[f64], w: &[f64]) -> f64 {
        x.iter().zip(w).map(|(a, b)| a * b).sum()
    }
}

impl TargetModel for LogisticRegression {
    fn dim(&self) -> usize {
        self.data.n_features()
    }

    fn log_joint(&self, w: &[f64]) -> f64 {
        let prior: f64 = w.iter().map(|wj| -0.5 * LN_2PI - 0.5 * wj * wj).sum();
        let lik: f64 = self
            .data
            .features()
            .iter()
            .zip(self.data.labels())
            .map(|(x, &y)| {
                let a = Self::logit(x, w);
                // y log σ(a) + (1 - y) log σ(-a)
                y * log_sigmoid(a) + (1.0 - y) * log_sigmoid(-a)
            })
            .sum();
        prior + lik
    }

    fn grad_log_joint(&self, w: &[f64]) -> Option<Vec<f64>> {
        let mut g: Vec<f64> = w.iter().map(|wj| -wj).collect();
        for (x, &y) in self.data.features().iter().zip(self.data.labels()) {
            let r = y - sigmoid(Self::logit(x, w));
            for (gj, xj) in g.iter_mut().zip(x) {
                *gj += r * xj;
            }
        }
        Some(g)
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn description(&self) -> String {
        format!(
            "Bayesian logistic regression, N={}, F={}",
            self.data.len(),
            self.data.n_features()
        )
    }

    fn train_log_likelihood(&self, samples: &[Vec<f64>]) -> Option<f64> {
        if self.data.is_empty() || samples.is_empty() {
            return None;
        }
        let s = samples.len() as f64;
        let total: f64 = self
            .data
            .features()
            .iter()
            .zip(self.data.labels())
            .map(|(x, &y)| {
                let p = samples.iter().map(|w| sigmoid(Self::logit(x, w))).sum::<f64>() / s;
                bernoulli_log_lik(y, p)
            })
            .sum();
        Some(total / self.data.len() as f64)
    }
}

pub(crate) fn bernoulli_log_lik(y: f64, p: f64) -> f64 {
    let p = p.clamp(1e-300, 1.0 - 1e-16);
    y * p.ln() + (1.0 - y) * (1.0 - p).ln()
}
