//! Command-line front end: `run`, `probe` and `plotdata`.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::density::Family;
use crate::error::{Error, Result};
use crate::fw::{BoostTrace, Variant};
use crate::harness::{density_table, read_run_dir, run_experiment, write_density_csv, ExperimentConfig, RunSummary};
use crate::models::ModelKind;
use crate::probes::{curvature_check, entropy_check, gap_check, ProbeReport, DEFAULT_GAMMAS};
use crate::relbo::LambdaSchedule;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_PROBE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "boostvi", version, about = "Boosted black-box variational inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a boosting experiment and write its artifacts.
    Run(RunArgs),
    /// Numeric checks of curvature, entropy and duality-gap bounds.
    Probe(ProbeArgs),
    /// Turn a run directory into plottable CSV files.
    Plotdata(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON experiment config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// bimodal, logistic or matrix_factorization.
    #[arg(long)]
    pub model: Option<String>,
    /// CSV data file (classification or i,j,r matrix triples).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// fixed, linesearch or fullycorrective.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Monte-Carlo draws per oracle gradient step.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub lmo_steps: Option<usize>,
    /// Entropy weight: `sqrt` for 1/sqrt(t+1) or `const:<value>`.
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub gap_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of seeds, starting at --seed.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// gaussian or laplace.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ProbeKind {
    Curvature,
    Entropy,
    Gap,
    All,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub probe: ProbeKind,
    /// Step sizes for the curvature probe; repeatable.
    #[arg(long = "gamma")]
    pub gammas: Vec<f64>,
    #[arg(long, default_value_t = crate::density::ParamBounds::DEFAULT_SCALE_FLOOR)]
    pub scale_floor: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Directory written by `boostvi run`.
    #[arg(long)]
    pub run: PathBuf,
    /// Output directory; defaults to the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn config_error(e: impl Display) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: format!("config error: {e}"),
    }
}

fn runtime_error(e: impl Display) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: format!("error: {e}"),
    }
}

/// Parses arguments, runs the subcommand and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Probe(a) => cmd_probe(&a),
        Command::Plotdata(a) => cmd_plotdata(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", f.message);
            f.code
        }
    }
}

fn parse_model(s: &str) -> Result<ModelKind> {
    match s {
        "bimodal" => Ok(ModelKind::Bimodal),
        "logistic" => Ok(ModelKind::Logistic),
        "matrix_factorization" | "mf" => Ok(ModelKind::MatrixFactorization),
        other => Err(Error::invalid(
            "model",
            format!("unknown model {other:?}; expected bimodal, logistic or matrix_factorization"),
        )),
    }
}

fn parse_family(s: &str) -> Result<Family> {
    match s {
        "gaussian" => Ok(Family::Gaussian),
        "laplace" => Ok(Family::Laplace),
        other => Err(Error::invalid("family", format!("unknown family {other:?}; expected gaussian or laplace"))),
    }
}

fn parse_lambda(s: &str) -> Result<LambdaSchedule> {
    if s == "sqrt" {
        return Ok(LambdaSchedule::InverseSqrt);
    }
    let value = s
        .strip_prefix("const:")
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| Error::invalid("lambda", format!("expected sqrt or const:<value>, got {s:?}")))?;
    let schedule = LambdaSchedule::Constant(value);
    schedule.validate()?;
    Ok(schedule)
}

/// The config file (if any) with the flags applied on top.
pub fn resolve_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            if !path.is_file() {
                return Err(Error::MissingFile(path.clone()));
            }
            serde_json::from_str(&fs::read_to_string(path)?)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &a.model {
        cfg.model = parse_model(m)?;
    }
    if let Some(d) = &a.data {
        cfg.data = Some(d.clone());
    }
    if let Some(v) = &a.variant {
        cfg.fw.variant = v.parse::<Variant>()?;
    }
    if let Some(n) = a.iters {
        cfg.fw.max_iters = n;
    }
    if let Some(n) = a.mc_samples {
        cfg.fw.lmo.n_mc_samples = n;
    }
    if let Some(n) = a.lmo_steps {
        cfg.fw.lmo.n_steps = n;
    }
    if let Some(l) = &a.lambda {
        cfg.fw.lmo.lambda_schedule = parse_lambda(l)?;
    }
    if let Some(d) = a.delta {
        cfg.fw.delta = d;
    }
    if let Some(g) = a.gap_tol {
        cfg.fw.gap_tolerance = g;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.seeds {
        cfg.n_seeds = n;
    }
    if let Some(f) = &a.family {
        cfg.fw.lmo.family = parse_family(f)?;
    }
    if let Some(k) = a.latent_dim {
        cfg.latent_dim = k;
    }
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    if let Some(d) = &cfg.data {
        if !d.is_file() {
            return Err(Error::invalid("data", format!("no such file {}", d.display())));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn progress(trace: &BoostTrace) {
    for r in &trace.records {
        println!(
            "seed {:>3}  t {:>3}  gamma {:.4}  gap {:>10.5} ± {:.5}  train_ll {:.5}",
            trace.seed, r.t, r.gamma, r.gap, r.gap_stderr, r.train_ll
        );
    }
}

fn report(summary: &RunSummary) {
    println!(
        "{:?} / {}: {} seed(s), best iterations {:?}",
        summary.model,
        summary.variant,
        summary.n_seeds,
        summary.per_seed.iter().map(|r| r.best_iteration).collect::<Vec<_>>()
    );
    for (name, b) in &summary.boosted {
        match summary.baseline.get(name) {
            Some(base) => println!(
                "  {name:<10} boosted {:.5} ± {:.5}   baseline {:.5} ± {:.5}",
                b.mean, b.std, base.mean, base.std
            ),
            None => println!("  {name:<10} boosted {:.5} ± {:.5}", b.mean, b.std),
        }
    }
}

pub fn cmd_run(a: &RunArgs) -> std::result::Result<i32, Failure> {
    let cfg = resolve_config(a).map_err(config_error)?;
    let summary = run_experiment(&cfg).map_err(runtime_error)?;
    summary.traces.iter().for_each(progress);
    report(&summary);
    if let Some(out) = &cfg.out {
        println!("wrote {}", out.display());
    }
    Ok(EXIT_OK)
}

fn print_table(reports: &[ProbeReport], verbose: bool) {
    println!("{:<10} {:<6} DETAIL", "PROBE", "RESULT");
    for r in reports {
        println!("{:<10} {:<6} {}", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail);
        if verbose {
            for row in &r.rows {
                println!("    {row}");
            }
        }
    }
}

pub fn cmd_probe(a: &ProbeArgs) -> std::result::Result<i32, Failure> {
    let gammas = if a.gammas.is_empty() {
        DEFAULT_GAMMAS.to_vec()
    } else {
        a.gammas.clone()
    };
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
        return Err(config_error(Error::invalid("gamma", format!("must lie in (0, 1], got {g}"))));
    }
    let wants = |k: ProbeKind| a.probe == k || a.probe == ProbeKind::All;
    let mut reports = Vec::new();
    let as_failure = |name: &'static str, r: Result<ProbeReport>| {
        r.unwrap_or_else(|e| ProbeReport {
            name,
            passed: false,
            detail: e.to_string(),
            rows: Vec::new(),
        })
    };
    if wants(ProbeKind::Curvature) {
        reports.push(as_failure("curvature", curvature_check(&gammas)));
    }
    if wants(ProbeKind::Entropy) {
        reports.push(entropy_check(a.scale_floor));
    }
    if wants(ProbeKind::Gap) {
        reports.push(as_failure("gap", gap_check(a.scale_floor, a.seed)));
    }
    // a single probe prints its values
    print_table(&reports, a.probe != ProbeKind::All);
    Ok(if reports.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_PROBE })
}

fn write_series(traces: &[BoostTrace], path: &Path) -> Result<()> {
    let bad = |e: csv::Error| Error::BadCsv {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(bad)?;
    w.write_record(["seed", "t", "kl", "gap", "gap_stderr"]).map_err(bad)?;
    for trace in traces {
        for r in &trace.records {
            let kl = r.kl_oracle.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([
                trace.seed.to_string(),
                r.t.to_string(),
                kl,
                r.gap.to_string(),
                r.gap_stderr.to_string(),
            ])
            .map_err(bad)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_plotdata(a: &PlotArgs) -> std::result::Result<i32, Failure> {
    let run = read_run_dir(&a.run).map_err(config_error)?;
    let out = a.out.clone().unwrap_or_else(|| run.path.clone());
    fs::create_dir_all(&out).map_err(runtime_error)?;
    let variant = run.config.fw.variant;
    let series = out.join(format!("series_{variant}.csv"));
    write_series(&run.traces, &series).map_err(runtime_error)?;
    println!("wrote {}", series.display());
    if run.config.model == ModelKind::Bimodal {
        let model = run.config.bimodal.target().map_err(config_error)?;
        let table = density_table(&model, &run.traces[0], run.config.fw.kl_grid.as_ref()).map_err(runtime_error)?;
        let path = out.join(format!("density_{variant}.csv"));
        write_density_csv(&table, &path).map_err(runtime_error)?;
        println!("wrote {}", path.display());
    }
    Ok(EXIT_OK)
}
