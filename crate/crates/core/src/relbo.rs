//! The residual ELBO and its stochastic gradients.
//!
//! For a candidate atom `s`, the current mixture `q` and entropy weight `λ`:
//!
//! ```text
//! RELBO(s, λ) = E_s[log p(x, z)] - λ E_s[log s(z)] - E_s[log q(z)]
//! ```
//!
//! Without a current mixture the last term is dropped and `λ = 1` gives the
//! ordinary ELBO.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::{BaseDensity, Mixture};
use crate::error::{Error, Result};
use crate::math::mean_stderr;
use crate::models::TargetModel;
use crate::rng;

/// Entropy weight as a function of the boosting iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSchedule {
    Constant(f64),
    /// 1 / sqrt(t + 1)
    InverseSqrt,
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        LambdaSchedule::InverseSqrt
    }
}

impl LambdaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LambdaSchedule::Constant(l) if !(l > 0.0 && l.is_finite()) => {
                Err(Error::invalid("lambda", format!("must be positive, got {l}")))
            }
            _ => Ok(()),
        }
    }
}

pub fn lambda_at(t: usize, schedule: LambdaSchedule) -> f64 {
    match schedule {
        LambdaSchedule::Constant(l) => l,
        LambdaSchedule::InverseSqrt => 1.0 / ((t + 1) as f64).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Pathwise: z = loc + scale·ε. Needs ∇ log p.
    Reparameterization,
    /// E_s[(f - b) ∇_θ log s]. Needs only log p evaluations.
    ScoreFunction,
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Sample means of the three RELBO integrands on a shared draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelboTerms {
    pub log_joint: f64,
    pub log_atom: f64,
    /// Zero when there is no current mixture.
    pub log_current: f64,
}

impl RelboTerms {
    pub fn relbo(&self, lambda: f64) -> f64 {
        self.log_joint - lambda * self.log_atom - self.log_current
    }
}

/// Gradient with respect to (loc, log scale) of the atom.
#[derive(Debug, Clone, PartialEq)]
pub struct RelboGradient {
    pub d_loc: Vec<f64>,
    pub d_log_scale: Vec<f64>,
    pub d_loc_stderr: Vec<f64>,
    pub d_log_scale_stderr: Vec<f64>,
    /// RELBO estimate with the closed-form entropy.
    pub objective: f64,
    /// Sample mean of log p - log q over the draw (the baseline target).
    pub residual_mean: f64,
}

impl RelboGradient {
    pub fn is_finite(&self) -> bool {
        self.objective.is_finite()
            && self
                .d_loc
                .iter()
                .chain(&self.d_log_scale)
                .all(|g| g.is_finite())
    }
}

/// The RELBO for a fixed model, current mixture and λ.
#[derive(Clone, Copy)]
pub struct Relbo<'a> {
    model: &'a dyn TargetModel,
    current: Option<&'a Mixture>,
    lambda: f64,
}

impl<'a> Relbo<'a> {
    pub fn new(model: &'a dyn TargetModel, current: Option<&'a Mixture>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be positive, got {lambda}")));
        }
        if let Some(q) = current {
            if q.dim() != model.dim() {
                return Err(Error::DimensionMismatch {
                    expected: model.dim(),
                    got: q.dim(),
                });
            }
        }
        Ok(Self {
            model,
            current,
            lambda,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn check_atom(&self, s: &BaseDensity) -> Result<()> {
        if s.dim() != self.model.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.model.dim(),
                got: s.dim(),
            });
        }
        Ok(())
    }

    /// log p(z) - log q(z); the part of the integrand that does not involve s.
    fn residual(&self, z: &[f64]) -> f64 {
        let lp = self.model.log_joint(z);
        match self.current {
            Some(q) => lp - q.log_prob_unchecked(z),
            None => lp,
        }
    }

    /// Per-sample RELBO integrands on `n` draws from `s`.
    fn integrands(&self, s: &BaseDensity, n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut r = rng::stream(seed);
        let d = s.dim();
        let mut eps = vec![0.0; d];
        let mut z = vec![0.0; d];
        (0..n)
            .map(|_| {
                s.sample_with_noise(&mut r, &mut eps, &mut z);
                let lq = self.current.map_or(0.0, |q| q.log_prob_unchecked(&z));
                [self.model.log_joint(&z), s.log_prob_unchecked(&z), lq]
            })
            .collect()
    }

    /// Sample means of the three terms, sharing one draw of `n` points.
    pub fn terms(&self, s: &BaseDensity, n: usize, seed: u64) -> Result<RelboTerms> {
        self.check_atom(s)?;
        check_n(n)?;
        let rows = self.integrands(s, n, seed);
        let mean = |k: usize| rows.iter().map(|r| r[k]).sum::<f64>() / n as f64;
        Ok(RelboTerms {
            log_joint: mean(0),
            log_atom: mean(1),
            log_current: mean(2),
        })
    }

    /// Monte-Carlo RELBO with the entropy term also sampled.
    pub fn estimate(&self, s: &BaseDensity, n: usize, seed: u64) -> Result<McEstimate> {
        self.check_atom(s)?;
        check_n(n)?;
        let vals: Vec<f64> = self
            .integrands(s, n, seed)
            .into_iter()
            .map(|[lp, ls, lq]| match self.current {
                Some(_) => lp - self.lambda * ls - lq,
                None => lp - self.lambda * ls,
            })
            .collect();
        let (mean, stderr) = mean_stderr(&vals);
        Ok(McEstimate { mean, stderr })
    }

    pub fn gradient(
        &self,
        s: &BaseDensity,
        n: usize,
        seed: u64,
        estimator: Estimator,
        baseline: f64,
    ) -> Result<RelboGradient> {
        self.check_atom(s)?;
        check_n(n)?;
        let mut r = rng::stream(seed);
        self.gradient_with(s, &mut r, n, estimator, baseline)
    }

    pub(crate) fn gradient_with<R: Rng + ?Sized>(
        &self,
        s: &BaseDensity,
        r: &mut R,
        n: usize,
        estimator: Estimator,
        baseline: f64,
    ) -> Result<RelboGradient> {
        if estimator == Estimator::Reparameterization && !self.model.has_gradient() {
            return Err(Error::MissingGradient);
        }
        let d = s.dim();
        let mut eps = vec![0.0; d];
        let mut z = vec![0.0; d];
        let mut score_loc = vec![0.0; d];
        let mut score_scale = vec![0.0; d];
        // running sums of per-sample gradient contributions and their squares
        let mut sum = vec![0.0; 2 * d];
        let mut sum_sq = vec![0.0; 2 * d];
        let mut f_sum = 0.0;
        let mut contrib = vec![0.0; 2 * d];

        for _ in 0..n {
            s.sample_with_noise(r, &mut eps, &mut z);
            let f = self.residual(&z);
            f_sum += f;
            match estimator {
                Estimator::Reparameterization => {
                    let mut g = self
                        .model
                        .grad_log_joint(&z)
                        .ok_or(Error::MissingGradient)?;
                    if let Some(q) = self.current {
                        q.add_grad_log_prob(&z, -1.0, &mut g);
                    }
                    for j in 0..d {
                        contrib[j] = g[j];
                        contrib[d + j] = g[j] * s.scale()[j] * eps[j];
                    }
                }
                Estimator::ScoreFunction => {
                    s.param_score(&z, &mut score_loc, &mut score_scale);
                    let w = f - baseline;
                    for j in 0..d {
                        contrib[j] = w * score_loc[j];
                        contrib[d + j] = w * score_scale[j];
                    }
                }
            }
            for k in 0..2 * d {
                sum[k] += contrib[k];
                sum_sq[k] += contrib[k] * contrib[k];
            }
        }

        let nf = n as f64;
        let stderr = |k: usize| {
            if n < 2 {
                return 0.0;
            }
            let m = sum[k] / nf;
            ((sum_sq[k] / nf - m * m).max(0.0) * nf / (nf - 1.0) / nf).sqrt()
        };
        let residual_mean = f_sum / nf;
        // closed-form entropy: ∂H/∂μ = 0, ∂H/∂log σ = 1 per coordinate
        Ok(RelboGradient {
            d_loc: (0..d).map(|j| sum[j] / nf).collect(),
            d_log_scale: (0..d).map(|j| sum[d + j] / nf + self.lambda).collect(),
            d_loc_stderr: (0..d).map(stderr).collect(),
            d_log_scale_stderr: (0..d).map(|j| stderr(d + j)).collect(),
            objective: residual_mean + self.lambda * s.entropy(),
            residual_mean,
        })
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n_mc_samples", "must be at least 1"));
    }
    Ok(())
}

/// Monte-Carlo RELBO of atom `s` against the current mixture `q_t`.
pub fn relbo_estimate(
    s: &BaseDensity,
    model: &dyn TargetModel,
    q_t: Option<&Mixture>,
    lambda: f64,
    n: usize,
    seed: u64,
) -> Result<f64> {
    Ok(Relbo::new(model, q_t, lambda)?.estimate(s, n, seed)?.mean)
}

/// Plain Monte-Carlo ELBO, E_s[log p - log s].
pub fn elbo_estimate(s: &BaseDensity, model: &dyn TargetModel, n: usize, seed: u64) -> Result<f64> {
    if s.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: s.dim(),
        });
    }
    check_n(n)?;
    let mut r = rng::stream(seed);
    let d = s.dim();
    let mut eps = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut total = 0.0;
    for _ in 0..n {
        s.sample_with_noise(&mut r, &mut eps, &mut z);
        total += model.log_joint(&z) - s.log_prob_unchecked(&z);
    }
    Ok(total / n as f64)
}

/// Stochastic RELBO gradient over (loc, log scale) with a zero baseline.
pub fn relbo_grad(
    s: &BaseDensity,
    model: &dyn TargetModel,
    q_t: Option<&Mixture>,
    lambda: f64,
    n: usize,
    seed: u64,
    estimator: Estimator,
) -> Result<RelboGradient> {
    Relbo::new(model, q_t, lambda)?.gradient(s, n, seed, estimator, 0.0)
}
