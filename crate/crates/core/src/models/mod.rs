//! Target models: unnormalized log-joints log p(x, z) over a flat latent
//! vector, with analytic gradients where available.

mod bimodal;
mod data;
mod factorization;
mod logistic;
mod metrics;

pub use bimodal::{synthetic_bimodal_target, BimodalTarget};
pub use data::{Cell, ClassificationData, Dataset, MatrixData};
pub use factorization::{matrix_factorization_model, MatrixFactorization};
pub use logistic::{logistic_regression_model, LogisticRegression};
pub use metrics::{auroc, predictive_metrics, ModelKind, PredictiveMetrics};

/// Black-box access to an unnormalized posterior.
pub trait TargetModel: Send + Sync {
    fn dim(&self) -> usize;

    /// log p(x, z) up to an additive constant.
    fn log_joint(&self, z: &[f64]) -> f64;

    /// ∇_z log p(x, z), if the model provides one.
    fn grad_log_joint(&self, _z: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn has_gradient(&self) -> bool {
        false
    }

    fn description(&self) -> String;

    /// Posterior-predictive log-likelihood of the training data, averaged per
    /// observation, from posterior samples. `None` for models without data.
    fn train_log_likelihood(&self, _samples: &[Vec<f64>]) -> Option<f64> {
        None
    }
}

type LogJointFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A target assembled from closures.
pub struct FnModel {
    dim: usize,
    log_joint: Box<LogJointFn>,
    grad: Option<Box<GradFn>>,
    description: String,
}

impl FnModel {
    pub fn new(
        dim: usize,
        log_joint: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        description: impl Into<String>,
    ) -> Self {
        Self {
            dim,
            log_joint: Box::new(log_joint),
            grad: None,
            description: description.into(),
        }
    }

    pub fn with_gradient(mut self, grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.grad = Some(Box::new(grad));
        self
    }

    /// The target p = q for a given mixture.
    pub fn from_mixture(q: crate::density::Mixture) -> Self {
        let dim = q.dim();
        let g = q.clone();
        Self::new(dim, move |z| q.log_prob_unchecked(z), "mixture target")
            .with_gradient(move |z| g.grad_log_prob(z).expect("dimension checked by caller"))
    }
}

impl TargetModel for FnModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_joint(&self, z: &[f64]) -> f64 {
        (self.log_joint)(z)
    }

    fn grad_log_joint(&self, z: &[f64]) -> Option<Vec<f64>> {
        self.grad.as_ref().map(|g| g(z))
    }

    fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    fn description(&self) -> String {
        self.description.clone()
    }
}

/// Central-difference gradient, used to check analytic gradients.
pub fn finite_difference_gradient(model: &dyn TargetModel, z: &[f64], step: f64) -> Vec<f64> {
    let mut x = z.to_vec();
    (0..z.len())
        .map(|j| {
            x[j] = z[j] + step;
            let fp = model.log_joint(&x);
            x[j] = z[j] - step;
            let fm = model.log_joint(&x);
            x[j] = z[j];
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

/// Largest relative error between the analytic gradient and central
/// differences, with relative error measured against max(1, |g|).
pub fn gradient_check(model: &dyn TargetModel, z: &[f64], step: f64) -> Option<f64> {
    let g = model.grad_log_joint(z)?;
    let fd = finite_difference_gradient(model, z, step);
    Some(
        g.iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1.0))
            .fold(0.0, f64::max),
    )
}
