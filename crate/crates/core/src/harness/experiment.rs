use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::{load_csv, Schema};
use super::split::split;
use super::synthetic::{synthetic_logistic, synthetic_matrix, MatrixSpec};
use super::ExperimentConfig;
use crate::density::{Mixture, QuadratureGrid};
use crate::error::{Error, Result};
use crate::fw::{run_boosting, BoostTrace, Variant};
use crate::models::{
    logistic_regression_model, matrix_factorization_model, predictive_metrics, Dataset, ModelKind, TargetModel,
};
use crate::rng;

const TAG_EVAL: u64 = 0xE7A1;
const LOGISTIC_ROWS: usize = 400;
const LOGISTIC_FEATURES: usize = 5;
const PLOT_POINTS: usize = 401;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Metrics of one seed for the returned iterate (`boosted`) and for the
/// plain black-box VI fit that starts the loop (`baseline`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub best_iteration: usize,
    pub boosted: BTreeMap<String, f64>,
    pub baseline: BTreeMap<String, f64>,
    /// Quadrature KL per iterate, for 1-D targets.
    pub kl_oracle: Option<Vec<f64>>,
    pub gap: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: ModelKind,
    pub variant: Variant,
    pub n_seeds: usize,
    pub per_seed: Vec<SeedResult>,
    pub boosted: BTreeMap<String, MeanStd>,
    pub baseline: BTreeMap<String, MeanStd>,
    /// Full traces, one per seed; written to trace.json rather than the summary.
    #[serde(skip)]
    pub traces: Vec<BoostTrace>,
}

fn aggregate(per_seed: &[SeedResult], pick: impl Fn(&SeedResult) -> &BTreeMap<String, f64>) -> BTreeMap<String, MeanStd> {
    let mut keys: Vec<&String> = per_seed.iter().flat_map(|r| pick(r).keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter_map(|k| {
            let vals: Vec<f64> = per_seed.iter().filter_map(|r| pick(r).get(k).copied()).collect();
            // only metrics every seed reports
            (vals.len() == per_seed.len()).then(|| (k.clone(), MeanStd::of(&vals)))
        })
        .collect()
}

impl RunSummary {
    /// Recomputes the aggregates from `per_seed`.
    pub fn recompute(&mut self) {
        self.n_seeds = self.per_seed.len();
        self.boosted = aggregate(&self.per_seed, |r| &r.boosted);
        self.baseline = aggregate(&self.per_seed, |r| &r.baseline);
    }
}

fn schema(kind: ModelKind) -> Schema {
    match kind {
        ModelKind::MatrixFactorization => Schema::Matrix,
        _ => Schema::Classification,
    }
}

fn load_data(cfg: &ExperimentConfig) -> Result<Option<Dataset>> {
    if cfg.model == ModelKind::Bimodal {
        return Ok(None);
    }
    if let Some(path) = &cfg.data {
        return load_csv(path, schema(cfg.model)).map(Some);
    }
    let data = match cfg.model {
        ModelKind::Logistic => {
            Dataset::Classification(synthetic_logistic(LOGISTIC_ROWS, LOGISTIC_FEATURES, cfg.data_seed)?)
        }
        ModelKind::MatrixFactorization => Dataset::Matrix(synthetic_matrix(&MatrixSpec::default(), cfg.data_seed)?),
        ModelKind::Bimodal => unreachable!(),
    };
    Ok(Some(data))
}

fn build_model(cfg: &ExperimentConfig, train: Option<Dataset>) -> Result<Box<dyn TargetModel>> {
    Ok(match (cfg.model, train) {
        (ModelKind::Bimodal, _) => Box::new(cfg.bimodal.target()?),
        (ModelKind::Logistic, Some(Dataset::Classification(d))) => Box::new(logistic_regression_model(d)?),
        (ModelKind::MatrixFactorization, Some(Dataset::Matrix(d))) => {
            Box::new(matrix_factorization_model(d, cfg.latent_dim)?)
        }
        (kind, _) => return Err(Error::WrongModelKind(format!("{kind:?} does not match the data"))),
    })
}

fn metrics_of(
    cfg: &ExperimentConfig,
    q: &Mixture,
    test: Option<&Dataset>,
    kl: Option<f64>,
    seed: u64,
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    if let Some(test) = test {
        let m = predictive_metrics(cfg.model, q, test, cfg.predictive_samples, seed)?;
        out.insert("test_ll".into(), m.mean_log_likelihood);
        if let Some(a) = m.auroc {
            out.insert("auroc".into(), a);
        }
        if let Some(e) = m.mse {
            out.insert("mse".into(), e);
        }
    }
    if let Some(kl) = kl {
        out.insert("kl".into(), kl);
    }
    Ok(out)
}

fn run_seed(cfg: &ExperimentConfig, data: Option<&Dataset>, seed: u64) -> Result<(SeedResult, BoostTrace)> {
    let (train, test) = match data {
        Some(d) => {
            let (a, b) = split(d, cfg.split, seed)?;
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    let model = build_model(cfg, train)?;
    let fw = crate::fw::FwConfig {
        seed,
        ..cfg.fw.clone()
    };
    let (selected, trace) = run_boosting(model.as_ref(), &fw)?;
    let first = &trace.records[0];
    let best = &trace.records[trace.selected];
    let eval_seed = rng::derive_seed(seed, &[TAG_EVAL]);
    let mut boosted = metrics_of(cfg, &selected, test.as_ref(), best.kl_oracle, eval_seed)?;
    let mut baseline = metrics_of(cfg, &first.mixture, test.as_ref(), first.kl_oracle, eval_seed)?;
    boosted.insert("train_ll".into(), best.train_ll);
    baseline.insert("train_ll".into(), first.train_ll);
    boosted.insert("final_gap".into(), trace.records.last().expect("nonempty trace").gap);
    baseline.insert("final_gap".into(), first.gap);
    let kl_oracle = trace.records.iter().map(|r| r.kl_oracle).collect::<Option<Vec<f64>>>();
    let result = SeedResult {
        seed,
        best_iteration: trace.selected,
        boosted,
        baseline,
        kl_oracle,
        gap: trace.records.iter().map(|r| r.gap).collect(),
    };
    Ok((result, trace))
}

/// Runs the boosting loop once per seed (in parallel), evaluates held-out
/// metrics for the returned iterate and for the initial fit, aggregates
/// them, and writes the artifacts when `cfg.out` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let data = load_data(&cfg)?;
    let runs: Vec<(SeedResult, BoostTrace)> = cfg
        .seeds()
        .into_par_iter()
        .map(|seed| run_seed(&cfg, data.as_ref(), seed))
        .collect::<Result<_>>()?;
    let (per_seed, traces): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let mut summary = RunSummary {
        model: cfg.model,
        variant: cfg.fw.variant,
        n_seeds: 0,
        per_seed,
        boosted: BTreeMap::new(),
        baseline: BTreeMap::new(),
        traces,
    };
    summary.recompute();
    if let Some(dir) = &cfg.out {
        write_artifacts(dir, &cfg, &summary)?;
    }
    Ok(summary)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, summary: &RunSummary) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("config.json"), cfg)?;
    write_json(&dir.join("trace.json"), &summary.traces)?;
    write_json(&dir.join("summary.json"), summary)?;
    if cfg.model == ModelKind::Bimodal {
        let model = cfg.bimodal.target()?;
        let table = density_table(&model, &summary.traces[0], cfg.fw.kl_grid.as_ref())?;
        write_density_csv(&table, &dir.join("density.csv"))?;
    }
    Ok(())
}

/// Target and iterate densities of a 1-D run on a plotting grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    pub z: Vec<f64>,
    /// Target density, normalized numerically.
    pub target: Vec<f64>,
    /// One column per recorded iterate.
    pub iterates: Vec<Vec<f64>>,
}

/// Evaluates every iterate of `trace` and the normalized target on a grid
/// spanning four scales around every atom. The target's normalizer is
/// computed on `norm_grid` when given, else on the plotting grid.
pub fn density_table(
    model: &dyn TargetModel,
    trace: &BoostTrace,
    norm_grid: Option<&QuadratureGrid>,
) -> Result<DensityTable> {
    if model.dim() != 1 {
        return Err(Error::invalid("density_table", "needs a one-dimensional target"));
    }
    let atoms = trace.records.iter().flat_map(|r| r.mixture.atoms());
    let (lo, hi) = atoms.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
        (lo.min(a.loc()[0] - 4.0 * a.scale()[0]), hi.max(a.loc()[0] + 4.0 * a.scale()[0]))
    });
    let plot = QuadratureGrid::new(lo, hi, PLOT_POINTS)?;
    let norm = norm_grid.copied().unwrap_or(plot);
    let log_norm = norm.log_integral(&norm.points().map(|z| model.log_joint(&[z])).collect::<Vec<_>>());
    let z: Vec<f64> = plot.points().collect();
    let target = z.iter().map(|&v| (model.log_joint(&[v]) - log_norm).exp()).collect();
    let iterates = trace
        .records
        .iter()
        .map(|r| z.iter().map(|&v| r.mixture.log_prob_unchecked(&[v]).exp()).collect())
        .collect();
    Ok(DensityTable { z, target, iterates })
}

/// CSV with columns `z, target, q_t0, q_t1, ...`.
pub fn write_density_csv(table: &DensityTable, path: &Path) -> Result<()> {
    let bad = |e: csv::Error| Error::BadCsv {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(bad)?;
    let mut header = vec!["z".to_string(), "target".to_string()];
    header.extend((0..table.iterates.len()).map(|t| format!("q_t{t}")));
    w.write_record(&header).map_err(bad)?;
    for (i, z) in table.z.iter().enumerate() {
        let mut row = vec![z.to_string(), table.target[i].to_string()];
        row.extend(table.iterates.iter().map(|col| col[i].to_string()));
        w.write_record(&row).map_err(bad)?;
    }
    w.flush()?;
    Ok(())
}

/// Contents of a finished run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub path: PathBuf,
    pub config: ExperimentConfig,
    pub traces: Vec<BoostTrace>,
}

pub fn read_run_dir(dir: &Path) -> Result<RunDir> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let read = |name: &str| -> Result<String> {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(Error::MissingFile(path));
        }
        Ok(fs::read_to_string(path)?)
    };
    let config: ExperimentConfig = serde_json::from_str(&read("config.json")?)?;
    let traces: Vec<BoostTrace> = serde_json::from_str(&read("trace.json")?)?;
    if traces.is_empty() {
        return Err(Error::invalid("trace.json", "no traces recorded"));
    }
    Ok(RunDir {
        path: dir.to_path_buf(),
        config,
        traces,
    })
}
