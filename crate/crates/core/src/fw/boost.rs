use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::gap::{certified_gap, mixture_elbo};
use super::step::{compact, fixed_step_gamma, mixture_step, MERGE_TOL};
use super::weights::{corrective_from, line_search_gamma};
use crate::density::{quadrature_kl, Mixture, QuadratureGrid};
use crate::error::{Error, Result};
use crate::lmo::{lmo_solve, LmoConfig};
use crate::models::TargetModel;
use crate::rng;

/// Step-size policy of the boosting loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// γ = 2 / (δt + 2).
    #[serde(alias = "fixed")]
    FixedStep,
    /// γ minimizing a Monte-Carlo negative ELBO along the segment.
    #[serde(alias = "linesearch")]
    LineSearch,
    /// Reoptimize all weights over the atoms found so far.
    #[serde(alias = "fullycorrective")]
    FullyCorrective,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::FixedStep, Variant::LineSearch, Variant::FullyCorrective];

    /// Short command-line spelling.
    pub fn short_name(self) -> &'static str {
        match self {
            Variant::FixedStep => "fixed",
            Variant::LineSearch => "linesearch",
            Variant::FullyCorrective => "fullycorrective",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" | "fixed_step" => Ok(Variant::FixedStep),
            "linesearch" | "line_search" => Ok(Variant::LineSearch),
            "fullycorrective" | "fully_corrective" => Ok(Variant::FullyCorrective),
            other => Err(Error::invalid(
                "variant",
                format!("unknown variant {other:?}; expected fixed, linesearch or fullycorrective"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FwConfig {
    pub variant: Variant,
    pub max_iters: usize,
    /// Assumed relative accuracy of the LMO, in (0, 1].
    pub delta: f64,
    /// Stop once gap / δ falls to this value.
    pub gap_tolerance: f64,
    pub gap_samples: usize,
    pub line_search_grid: usize,
    /// Draws per atom for the line search and the weight solve.
    pub weight_samples: usize,
    pub corrective_iters: usize,
    /// Draws for the ELBO used to rank iterates of models without data.
    pub elbo_samples: usize,
    /// Quadrature grid for the KL oracle; only used for 1-D targets.
    pub kl_grid: Option<QuadratureGrid>,
    pub seed: u64,
    pub lmo: LmoConfig,
}

impl Default for FwConfig {
    fn default() -> Self {
        Self {
            variant: Variant::FixedStep,
            max_iters: 10,
            delta: 1.0,
            gap_tolerance: 0.0,
            gap_samples: 2048,
            line_search_grid: 21,
            weight_samples: 1024,
            corrective_iters: 100,
            elbo_samples: 2048,
            kl_grid: None,
            seed: 0,
            lmo: LmoConfig::default(),
        }
    }
}

impl FwConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::invalid("delta", format!("must lie in (0, 1], got {}", self.delta)));
        }
        if !(self.gap_tolerance >= 0.0) {
            return Err(Error::invalid(
                "gap_tolerance",
                format!("must be nonnegative, got {}", self.gap_tolerance),
            ));
        }
        for (name, v) in [
            ("gap_samples", self.gap_samples),
            ("weight_samples", self.weight_samples),
            ("elbo_samples", self.elbo_samples),
        ] {
            if v < 2 {
                return Err(Error::invalid(name, "must be at least 2"));
            }
        }
        if self.line_search_grid < 2 {
            return Err(Error::invalid("line_search_grid", "must be at least 2"));
        }
        self.lmo.validate()
    }
}

/// One iterate of the boosting loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    /// Weight given to the newest atom when forming this iterate.
    pub gamma: f64,
    /// Duality gap estimate at this iterate, divided by δ.
    pub gap: f64,
    pub gap_stderr: f64,
    /// Training log-likelihood, or the ELBO for models without data.
    pub train_ll: f64,
    pub kl_oracle: Option<f64>,
    /// RELBO of the atom the oracle returned against this iterate.
    pub relbo: f64,
    pub n_atoms: usize,
    /// Seconds since the start of the run.
    pub wallclock: f64,
    pub mixture: Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostTrace {
    pub variant: Variant,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
    /// KL of the first iterate when the oracle is available: an upper
    /// bound on the initial primal error.
    pub initial_error: Option<f64>,
    /// Index of the iterate returned by [`run_boosting`].
    pub selected: usize,
    /// True when the gap criterion ended the loop before `max_iters`.
    pub stopped_early: bool,
}

// seed-derivation tags
const TAG_LMO: u64 = 1;
const TAG_GAP: u64 = 2;
const TAG_WEIGHTS: u64 = 3;
const TAG_SCORE: u64 = 4;

fn kl_oracle(model: &dyn TargetModel, q: &Mixture, grid: Option<&QuadratureGrid>) -> Option<f64> {
    let grid = grid.filter(|_| model.dim() == 1)?;
    // refine until the grid-doubling check passes
    let mut g = *grid;
    for _ in 0..4 {
        match quadrature_kl(|z| q.log_prob_unchecked(&[z]), |z| model.log_joint(&[z]), &g) {
            Ok(kl) => return Some(kl),
            Err(_) => g = g.refined(),
        }
    }
    None
}

fn score(model: &dyn TargetModel, q: &Mixture, n: usize, seed: u64) -> Result<f64> {
    let samples = q.sample(n, seed);
    match model.train_log_likelihood(&samples) {
        Some(ll) => Ok(ll),
        None => Ok(mixture_elbo(q, model, n, seed)?.mean),
    }
}

/// Runs the boosting loop. The first iterate is a plain black-box VI fit;
/// each later iterate adds the atom returned by the oracle. Every iterate
/// gets a duality-gap certificate; the loop stops at `max_iters` or when the
/// certificate drops to `gap_tolerance`. Returns the iterate with the best
/// training log-likelihood.
pub fn run_boosting(model: &dyn TargetModel, cfg: &FwConfig) -> Result<(Mixture, BoostTrace)> {
    cfg.validate()?;
    let start = Instant::now();
    let lmo_cfg = LmoConfig {
        seed: rng::derive_seed(cfg.seed, &[TAG_LMO]),
        ..cfg.lmo.clone()
    };
    let grid = cfg.kl_grid.as_ref();
    let bounds = cfg.lmo.bounds()?;
    // one seed for every iterate, so the ranking compares like with like
    let score_seed = rng::derive_seed(cfg.seed, &[TAG_SCORE]);

    let first = lmo_solve(model, None, 0, &lmo_cfg)?;
    let mut q = Mixture::single(first.atom);
    let mut gamma = 1.0;
    let mut records: Vec<TraceRecord> = Vec::new();
    let mut stopped_early = false;

    for t in 0..=cfg.max_iters {
        let s = lmo_solve(model, Some(&q), t + 1, &lmo_cfg)?;
        let gap = certified_gap(
            &q,
            &s.atom,
            model,
            cfg.gap_samples,
            rng::derive_seed(cfg.seed, &[TAG_GAP, t as u64]),
            &bounds,
        )?;
        let train_ll = score(model, &q, cfg.elbo_samples, score_seed)?;
        records.push(TraceRecord {
            t,
            gamma,
            gap: gap.mean / cfg.delta,
            gap_stderr: gap.stderr / cfg.delta,
            train_ll,
            kl_oracle: kl_oracle(model, &q, grid),
            relbo: s.relbo_estimate,
            n_atoms: q.len(),
            wallclock: start.elapsed().as_secs_f64(),
            mixture: q.clone(),
        });
        if t == cfg.max_iters {
            break;
        }
        if gap.mean / cfg.delta <= cfg.gap_tolerance {
            stopped_early = true;
            break;
        }

        let weight_seed = rng::derive_seed(cfg.seed, &[TAG_WEIGHTS, t as u64]);
        (q, gamma) = match cfg.variant {
            Variant::FixedStep => {
                let g = fixed_step_gamma(t + 1, cfg.delta);
                (mixture_step(&q, &s.atom, g)?, g)
            }
            Variant::LineSearch => {
                let g = line_search_gamma(&q, &s.atom, model, cfg.line_search_grid, cfg.weight_samples, weight_seed)?;
                (mixture_step(&q, &s.atom, g)?, g)
            }
            Variant::FullyCorrective => fully_corrective_step(&q, s.atom, model, cfg, weight_seed)?,
        };
    }

    let selected = records
        .iter()
        .enumerate()
        .fold(0, |best, (i, r)| if r.train_ll > records[best].train_ll { i } else { best });
    let trace = BoostTrace {
        variant: cfg.variant,
        seed: cfg.seed,
        initial_error: records[0].kl_oracle,
        selected,
        stopped_early,
        records,
    };
    Ok((trace.records[selected].mixture.clone(), trace))
}

/// Adds `s` with weight zero (or finds its duplicate) and reoptimizes all
/// weights starting from the current ones, so the objective can only
/// improve on the shared samples.
fn fully_corrective_step(
    q: &Mixture,
    s: crate::density::BaseDensity,
    model: &dyn TargetModel,
    cfg: &FwConfig,
    seed: u64,
) -> Result<(Mixture, f64)> {
    let mut atoms = q.atoms().to_vec();
    let mut init = q.weights().to_vec();
    let newest = match atoms.iter().position(|a| a.approx_eq(&s, MERGE_TOL)) {
        Some(k) => k,
        None => {
            atoms.push(s);
            init.push(0.0);
            atoms.len() - 1
        }
    };
    let w = corrective_from(&atoms, init, model, cfg.weight_samples, seed, cfg.corrective_iters)?;
    let gamma = w[newest];
    Ok((compact(atoms, w), gamma))
}
