//! Black-box linear minimization oracle: fit one new atom by stochastic
//! gradient ascent on the residual ELBO.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::{BaseDensity, Family, Mixture, ParamBounds};
use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus, softplus_inv};
use crate::models::TargetModel;
use crate::relbo::{lambda_at, Estimator, LambdaSchedule, Relbo};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// loc ~ N(0, 1), scale = softplus(N(0, 1)).
    RandomNormal,
    /// loc drawn from the current mixture plus small noise; falls back to
    /// `RandomNormal` when there is no mixture yet.
    PerturbCurrent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmoConfig {
    pub family: Family,
    pub n_mc_samples: usize,
    pub n_steps: usize,
    pub step_size: f64,
    pub estimator: Estimator,
    pub lambda_schedule: LambdaSchedule,
    pub scale_floor: f64,
    pub loc_bound: f64,
    pub init: Init,
    pub seed: u64,
    /// Draws used for the reported RELBO of the returned atom.
    pub n_eval_samples: usize,
}

impl Default for LmoConfig {
    fn default() -> Self {
        Self {
            family: Family::Gaussian,
            n_mc_samples: 32,
            n_steps: 2000,
            step_size: 0.01,
            estimator: Estimator::Reparameterization,
            lambda_schedule: LambdaSchedule::InverseSqrt,
            scale_floor: ParamBounds::DEFAULT_SCALE_FLOOR,
            loc_bound: ParamBounds::DEFAULT_LOC_BOUND,
            init: Init::RandomNormal,
            seed: 0,
            n_eval_samples: 1024,
        }
    }
}

impl LmoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_mc_samples < 1 {
            return Err(Error::invalid("n_mc_samples", "must be at least 1"));
        }
        if self.n_eval_samples < 1 {
            return Err(Error::invalid("n_eval_samples", "must be at least 1"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid("step_size", format!("must be positive, got {}", self.step_size)));
        }
        self.lambda_schedule.validate()?;
        self.bounds().map(|_| ())
    }

    pub fn bounds(&self) -> Result<ParamBounds> {
        ParamBounds::new(self.scale_floor, self.loc_bound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmoResult {
    pub atom: BaseDensity,
    pub relbo_estimate: f64,
    pub converged: bool,
    pub steps_used: usize,
}

/// Unconstrained parameters: scale = floor + softplus(raw).
struct Params {
    loc: Vec<f64>,
    raw: Vec<f64>,
}

impl Params {
    fn atom(&self, family: Family, bounds: &ParamBounds) -> BaseDensity {
        let scale = self
            .raw
            .iter()
            .map(|&r| (bounds.scale_floor + softplus(r)).min(bounds.loc_bound))
            .collect();
        BaseDensity::new_within(family, self.loc.clone(), scale, bounds)
            .expect("parameterization keeps the atom admissible")
    }
}

/// Adam in ascent form.
struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] += self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

fn initial_params<R: Rng>(r: &mut R, dim: usize, cfg: &LmoConfig, q_t: Option<&Mixture>, bounds: &ParamBounds) -> Params {
    let raw: Vec<f64> = (0..dim)
        .map(|_| {
            let s: f64 = softplus(r.sample(StandardNormal));
            softplus_inv(s.max(1e-6))
        })
        .collect();
    let loc = match (cfg.init, q_t) {
        (Init::PerturbCurrent, Some(q)) => {
            let centre = q.sample_with(r, 1).pop().expect("one draw");
            centre
                .into_iter()
                .map(|c| bounds.clamp_loc(c + 0.1 * r.sample::<f64, _>(StandardNormal)))
                .collect()
        }
        _ => (0..dim)
            .map(|_| bounds.clamp_loc(r.sample(StandardNormal)))
            .collect(),
    };
    Params { loc, raw }
}

struct Attempt {
    best: BaseDensity,
    converged: bool,
    steps: usize,
}

/// Non-finite objective or gradient at `step`.
struct Diverged(usize);

fn ascend(
    relbo: &Relbo<'_>,
    dim: usize,
    cfg: &LmoConfig,
    q_t: Option<&Mixture>,
    bounds: &ParamBounds,
    seed: u64,
) -> std::result::Result<Attempt, Diverged> {
    let mut r = rng::stream(seed);
    let mut p = initial_params(&mut r, dim, cfg, q_t, bounds);
    let mut opt = Adam::new(2 * dim, cfg.step_size);
    let mut theta = vec![0.0; 2 * dim];
    let mut grad = vec![0.0; 2 * dim];

    const EMA: f64 = 0.1;
    let warmup = (cfg.n_steps / 10).min(50);
    let mut ema: Option<f64> = None;
    let mut baseline: Option<f64> = None;
    let mut best: Option<(f64, BaseDensity)> = None;
    let mut ema_at_three_quarters = None;

    for step in 0..cfg.n_steps {
        let atom = p.atom(cfg.family, bounds);
        let b = baseline.unwrap_or(0.0);
        let g = relbo
            .gradient_with(&atom, &mut r, cfg.n_mc_samples, cfg.estimator, b)
            .map_err(|_| Diverged(step))?;
        if !g.is_finite() {
            return Err(Diverged(step));
        }
        baseline = Some(match baseline {
            Some(b) => (1.0 - EMA) * b + EMA * g.residual_mean,
            None => g.residual_mean,
        });

        let e = match ema {
            Some(e) => (1.0 - EMA) * e + EMA * g.objective,
            None => g.objective,
        };
        ema = Some(e);
        if step >= warmup && best.as_ref().is_none_or(|(b, _)| e > *b) {
            best = Some((e, atom.clone()));
        }
        if step == cfg.n_steps * 3 / 4 {
            ema_at_three_quarters = Some(e);
        }

        // chain rule from (loc, log σ) to (loc, raw)
        for j in 0..dim {
            let s = atom.scale()[j];
            grad[j] = g.d_loc[j];
            grad[dim + j] = g.d_log_scale[j] / s * sigmoid(p.raw[j]);
            theta[j] = p.loc[j];
            theta[dim + j] = p.raw[j];
        }
        opt.step(&mut theta, &grad);
        for j in 0..dim {
            p.loc[j] = bounds.clamp_loc(theta[j]);
            p.raw[j] = theta[dim + j].min(softplus_inv(bounds.loc_bound));
        }
    }

    let final_atom = p.atom(cfg.family, bounds);
    let best = best.map_or(final_atom, |(_, a)| a);
    let converged = match (ema, ema_at_three_quarters) {
        (Some(end), Some(mid)) => (end - mid).abs() <= 1e-2 * (1.0 + end.abs()),
        _ => false,
    };
    Ok(Attempt {
        best,
        converged,
        steps: cfg.n_steps,
    })
}

/// Fit the next atom against the current mixture `q_t` at boosting
/// iteration `t`. With `q_t = None` this is plain black-box VI (with the
/// entropy weight from the schedule, which is 1 at t = 0 for the default).
///
/// A non-finite objective triggers one restart from a fresh initialization.
pub fn lmo_solve(
    model: &dyn TargetModel,
    q_t: Option<&Mixture>,
    t: usize,
    cfg: &LmoConfig,
) -> Result<LmoResult> {
    cfg.validate()?;
    let bounds = cfg.bounds()?;
    let lambda = lambda_at(t, cfg.lambda_schedule);
    let relbo = Relbo::new(model, q_t, lambda)?;
    if cfg.estimator == Estimator::Reparameterization && !model.has_gradient() {
        return Err(Error::MissingGradient);
    }
    let dim = model.dim();

    let mut attempt = None;
    let mut failed_at = 0;
    for restart in 0..2u64 {
        let seed = rng::derive_seed(cfg.seed, &[t as u64, restart]);
        match ascend(&relbo, dim, cfg, q_t, &bounds, seed) {
            Ok(a) => {
                attempt = Some(a);
                break;
            }
            Err(Diverged(step)) => failed_at = step,
        }
    }
    let attempt = attempt.ok_or(Error::NonFiniteObjective { step: failed_at })?;

    let eval_seed = rng::derive_seed(cfg.seed, &[t as u64, 0xE7A1]);
    let est = relbo.estimate(&attempt.best, cfg.n_eval_samples, eval_seed)?;
    Ok(LmoResult {
        atom: attempt.best,
        relbo_estimate: est.mean,
        converged: attempt.converged,
        steps_used: attempt.steps,
    })
}
