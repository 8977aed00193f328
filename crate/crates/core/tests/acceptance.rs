//! Acceptance suite. Prints one PASS/FAIL line per criterion, with the
//! measured values underneath, and exits nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use boostvi::density::{kl_gaussian_closed, BaseDensity, Family, Mixture, QuadratureGrid};
use boostvi::fw::{chi_square_divergence, curvature_probe, l2_distance_sq, run_boosting, BoostTrace, FwConfig, Variant};
use boostvi::harness::{run_experiment, synthetic_logistic, synthetic_matrix, ExperimentConfig, MatrixSpec};
use boostvi::models::{
    gradient_check, logistic_regression_model, matrix_factorization_model, BimodalTarget, ModelKind, TargetModel,
};
use boostvi::probes::curvature_pairs;
use boostvi::relbo::{elbo_estimate, relbo_estimate, Estimator, Relbo};
use boostvi::rng;

struct Verdict {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, summary: impl Into<String>, details: Vec<String>) -> Self {
        Self {
            pass,
            summary: summary.into(),
            details,
        }
    }
}

const SEEDS: [u64; 3] = [0, 1, 2];

fn kl_grid() -> QuadratureGrid {
    QuadratureGrid::new(-10.0, 10.0, 2001).unwrap()
}

fn bimodal_config(variant: Variant, iters: usize, seed: u64) -> FwConfig {
    FwConfig {
        variant,
        max_iters: iters,
        seed,
        kl_grid: Some(kl_grid()),
        ..FwConfig::default()
    }
}

fn kl_series(trace: &BoostTrace) -> Vec<f64> {
    trace.records.iter().map(|r| r.kl_oracle.expect("1-D target")).collect()
}

fn fmt_series(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

// 1

fn fig1(traces: &mut Vec<BoostTrace>) -> Verdict {
    let p = BimodalTarget::default();
    let grid = kl_grid();
    let mut details = Vec::new();

    // oracle: the target itself is a mixture of two atoms, and no single
    // Gaussian gets close
    let exact = grid.kl(|z| p.mixture().log_prob(&[z]).unwrap(), |z| p.log_joint(&[z]));
    let mut best_single = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=200 {
        for j in 0..=90 {
            let (m, s) = (-2.0 + 0.02 * i as f64, 0.2 + 0.02 * j as f64);
            let q = BaseDensity::normal_1d(m, s);
            let kl = grid.kl(|z| q.log_prob(&[z]).unwrap(), |z| p.log_joint(&[z]));
            if kl < best_single.0 {
                best_single = (kl, m, s);
            }
        }
    }
    details.push(format!(
        "oracle: KL(target mixture || p) = {exact:.2e}; best single Gaussian N({:.2}, {:.2}) has KL {:.4}",
        best_single.1, best_single.2, best_single.0
    ));
    let mut pass = exact < 1e-9 && best_single.0 > 0.05;

    let start = Instant::now();
    for variant in Variant::ALL {
        let threshold = match variant {
            Variant::FixedStep => 0.1,
            Variant::LineSearch => 0.05,
            Variant::FullyCorrective => 0.02,
        };
        for seed in SEEDS {
            let (_, trace) = run_boosting(&p, &bimodal_config(variant, 10, seed)).unwrap();
            let kl = kl_series(&trace);
            let selected = kl[trace.selected];
            let ok = kl[0] > 0.05 && selected < threshold;
            pass &= ok;
            details.push(format!(
                "{variant:<15} seed {seed}: BBVI KL {:.4}, selected t={} KL {selected:.4} (< {threshold}), last KL {:.4} {}",
                kl[0],
                trace.selected,
                kl[kl.len() - 1],
                if ok { "ok" } else { "MISS" }
            ));
            traces.push(trace);
        }
    }
    if !pass {
        details.push(
            "analysis: the LMO returns the grid-verified maximizer of the residual ELBO, and with \
             lambda = 1/sqrt(t+1) that maximizer is a broad N(0, 1)-like atom once q covers both modes, \
             so fully corrective weights plateau near KL 0.055 until a sharp atom near -1 appears \
             (t=16 reaches 0.008 to 0.027). Constant lambda in {0.3, 0.1} makes q0 narrow and the \
             residual unbounded in the tails (KL 0.7 to 12)."
                .into(),
        );
    }
    let elapsed = start.elapsed();
    let fast = elapsed < Duration::from_secs(180);
    details.push(format!("runtime {:.1} s (limit 180 s)", elapsed.as_secs_f64()));
    Verdict::new(pass && fast, "bimodal KL after 10 iterations per variant", details)
}

// 2

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn rate_shape() -> Verdict {
    let p = BimodalTarget::default();
    let start = Instant::now();
    let mut details = Vec::new();
    let run = |variant, seed| kl_series(&run_boosting(&p, &bimodal_config(variant, 16, seed)).unwrap().1);

    let checkpoints = [2usize, 4, 8, 16];
    let fc: Vec<Vec<f64>> = SEEDS.iter().map(|&s| run(Variant::FullyCorrective, s)).collect();
    let mean_at = |t: usize| fc.iter().map(|k| k[t]).sum::<f64>() / fc.len() as f64;
    let xs: Vec<f64> = checkpoints.iter().map(|&t| (t as f64).ln()).collect();
    let ys: Vec<f64> = checkpoints.iter().map(|&t| mean_at(t).ln()).collect();
    let slope = least_squares_slope(&xs, &ys);
    for (seed, k) in SEEDS.iter().zip(&fc) {
        let ys: Vec<f64> = checkpoints.iter().map(|&t| k[t].ln()).collect();
        details.push(format!(
            "fully corrective seed {seed}: KL at t=2,4,8,16 = {}, slope {:.3}",
            fmt_series(&checkpoints.map(|t| k[t])),
            least_squares_slope(&xs, &ys)
        ));
    }
    details.push(format!(
        "fully corrective seed-mean KL {} : log-log slope {slope:.3} (need <= -0.7)",
        fmt_series(&checkpoints.map(mean_at))
    ));

    let fixed: Vec<Vec<f64>> = SEEDS.iter().map(|&s| run(Variant::FixedStep, s)).collect();
    let best_so_far: Vec<f64> = (1..=16)
        .map(|t| {
            fixed
                .iter()
                .map(|k| k[1..=t].iter().copied().fold(f64::INFINITY, f64::min))
                .sum::<f64>()
                / fixed.len() as f64
        })
        .collect();
    let ts: Vec<f64> = (1..=16).map(|t| t as f64).collect();
    // e_t ≈ C/t by least squares through the origin in 1/t
    let c = ts.iter().zip(&best_so_far).map(|(t, e)| e / t).sum::<f64>() / ts.iter().map(|t| 1.0 / (t * t)).sum::<f64>();
    let mean_e = best_so_far.iter().sum::<f64>() / best_so_far.len() as f64;
    let ss_res: f64 = ts.iter().zip(&best_so_far).map(|(t, e)| (e - c / t).powi(2)).sum();
    let ss_tot: f64 = best_so_far.iter().map(|e| (e - mean_e).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    let envelope = ts.iter().zip(&best_so_far).map(|(t, e)| t * e).fold(0.0, f64::max);
    details.push(format!("fixed step seed-mean best-so-far KL t=1..16: {}", fmt_series(&best_so_far)));
    details.push(format!(
        "fixed step fit C/t: C = {c:.4}, R^2 = {r2:.3} (need >= 0.8); smallest upper-bounding C = {envelope:.4}"
    ));

    let elapsed = start.elapsed();
    details.push(format!("runtime {:.1} s (limit 300 s)", elapsed.as_secs_f64()));
    let pass = slope <= -0.7 && r2 >= 0.8 && elapsed < Duration::from_secs(300);
    Verdict::new(pass, "rate shape: fully corrective slope and fixed-step C/t fit", details)
}

// 3

fn gap_bound(traces: &[BoostTrace]) -> Verdict {
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut tightest = f64::INFINITY;
    for trace in traces {
        for r in &trace.records {
            let kl = r.kl_oracle.unwrap();
            let margin = r.gap + 4.0 * r.gap_stderr - kl;
            tightest = tightest.min(margin);
            checked += 1;
            if margin < 0.0 {
                violations.push(format!(
                    "{} seed {} t={}: gap {:.4} + 4*{:.4} < KL {kl:.4}",
                    trace.variant, trace.seed, r.t, r.gap, r.gap_stderr
                ));
            }
        }
    }
    let mut details = vec![format!(
        "{checked} iterates checked, {} violation(s), smallest margin {tightest:.4}",
        violations.len()
    )];
    details.extend(violations.iter().cloned());
    Verdict::new(violations.is_empty(), "gap/delta + 4 stderr bounds the KL at every iterate", details)
}

// 4

fn curvature_limit() -> Verdict {
    let grid = QuadratureGrid::new(-20.0, 20.0, 8001).unwrap();
    let gammas = [1e-3, 1e-2, 0.1, 0.5, 1.0];
    let mut details = Vec::new();
    let (mut finite, mut endpoint, mut l2_limit, mut chi2_limit) = (true, true, true, true);
    for (s, q) in curvature_pairs() {
        let qm = Mixture::single(q.clone());
        let v = curvature_probe(&s, &qm, &gammas, &grid).unwrap();
        let l2 = l2_distance_sq(&s, &qm, &grid).unwrap();
        let chi2 = chi_square_divergence(&s, &qm, &grid).unwrap();
        let kl2 = 2.0 * kl_gaussian_closed(&s, &q).unwrap();
        finite &= v.iter().all(|x| x.is_finite());
        endpoint &= (v[4] - kl2).abs() <= 1e-6;
        let rel = |target: f64| if target == 0.0 { v[0].abs() } else { (v[0] - target).abs() / target };
        l2_limit &= rel(l2) <= 0.05;
        chi2_limit &= rel(chi2) <= 0.05;
        details.push(format!(
            "s=N({}, {}) q=N({}, {}): gamma=1e-3 {:.5}, int (s-q)^2 {l2:.5} (rel {:.3}), chi^2 {chi2:.5} (rel {:.3}); gamma=1 {:.8} vs 2KL {kl2:.8}",
            s.loc()[0], s.scale()[0], q.loc()[0], q.scale()[0], v[0], rel(l2), rel(chi2), v[4]
        ));
    }
    let unit = BaseDensity::normal_1d(0.0, 1.0);
    let shifted = BaseDensity::normal_1d(1.0, 1.0);
    let l2_pair = l2_distance_sq(&shifted, &Mixture::single(unit), &grid).unwrap();
    let l2_oracle = (1.0 - (-0.25f64).exp()) / std::f64::consts::PI.sqrt();
    let pair_ok = (l2_pair - 0.1248).abs() <= 0.05 * 0.1248 && (l2_pair - l2_oracle).abs() < 1e-9;
    details.push(format!(
        "N(0,1)/N(1,1): int (s-q)^2 = {l2_pair:.6}, closed form {l2_oracle:.6}, reference 0.1248 {}",
        if pair_ok { "ok" } else { "MISS" }
    ));
    details.push(format!(
        "finite {finite}; gamma=1 endpoint {endpoint}; small-gamma limit equals int (s-q)^2: {l2_limit}; equals chi^2 = int (s-q)^2/q: {chi2_limit}"
    ));
    if !l2_limit && chi2_limit {
        details.push(
            "analysis: (2/g^2) KL(q + g(s-q) || q) -> int (s-q)^2/q as g -> 0 (second-order expansion of \
             m log(m/q)); int (s-q)^2 is a different quantity, so this limit cannot hold as stated"
                .into(),
        );
    }
    Verdict::new(
        finite && endpoint && l2_limit && pair_ok,
        "curvature probe limits (small-gamma limit checked against int (s-q)^2)",
        details,
    )
}

// 5

fn entropy_identity() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (family, per_dim) in [(Family::Gaussian, 0.5), (Family::Laplace, 1.0)] {
        for scale in [1e-3, 0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0] {
            for loc in [-5.0, 0.0, 3.0] {
                for dim in [1usize, 2, 5] {
                    let a = BaseDensity::new(family, vec![loc; dim], vec![scale; dim]).unwrap();
                    let slack = a.entropy() + a.log_sup_norm();
                    worst = worst.max((slack - per_dim * dim as f64).abs());
                    checked += 1;
                }
            }
        }
    }
    // cross-check the closed-form entropy against quadrature in 1-D
    let grid = QuadratureGrid::new(-30.0, 30.0, 60001).unwrap();
    let mut quad_err: f64 = 0.0;
    for family in [Family::Gaussian, Family::Laplace] {
        let a = BaseDensity::new(family, vec![0.5], vec![1.3]).unwrap();
        let h = -grid.integrate(|z| {
            let l = a.log_prob(&[z]).unwrap();
            l.exp() * l
        });
        quad_err = quad_err.max((h - a.entropy()).abs());
    }
    Verdict::new(
        worst <= 1e-10 && quad_err < 1e-6,
        "entropy + log sup-norm = 1/2 (Gaussian), 1 (Laplace) per dimension",
        vec![format!(
            "{checked} atoms, max deviation {worst:.2e} (tol 1e-10); closed-form vs quadrature entropy {quad_err:.2e}"
        )],
    )
}

// 6

fn relbo_is_elbo() -> Verdict {
    let p = BimodalTarget::default();
    let logistic = logistic_regression_model(synthetic_logistic(60, 2, 3).unwrap()).unwrap();
    let mut mismatches = 0;
    let mut checked = 0;
    let cases: Vec<(&dyn TargetModel, BaseDensity)> = vec![
        (&p, BaseDensity::normal_1d(0.3, 0.8)),
        (&p, BaseDensity::laplace(vec![-1.0], vec![0.4]).unwrap()),
        (&logistic, BaseDensity::gaussian(vec![0.5, -0.2], vec![0.3, 0.7]).unwrap()),
    ];
    for (model, s) in &cases {
        for seed in 0..5 {
            let r = relbo_estimate(s, *model, None, 1.0, 512, seed).unwrap();
            let e = elbo_estimate(s, *model, 512, seed).unwrap();
            checked += 1;
            if r.to_bits() != e.to_bits() {
                mismatches += 1;
            }
        }
    }
    Verdict::new(
        mismatches == 0,
        "RELBO at t=0, lambda=1 equals the ELBO bit for bit",
        vec![format!("{checked} (model, atom, seed) cases, {mismatches} mismatch(es)")],
    )
}

// 7

fn gradients() -> Verdict {
    let mut details = Vec::new();
    let model = logistic_regression_model(synthetic_logistic(100, 2, 11).unwrap()).unwrap();
    let q = Mixture::single(BaseDensity::gaussian(vec![1.0, 0.5], vec![0.5, 0.5]).unwrap());
    let s = BaseDensity::gaussian(vec![0.6, -0.3], vec![0.4, 0.6]).unwrap();
    let n = 100_000;
    let seed = 21;
    let mut estimators_ok = true;
    for (label, current, lambda) in [("t=0", None, 1.0), ("t=1", Some(&q), 0.7)] {
        let relbo = Relbo::new(&model, current, lambda).unwrap();
        // central differences of the sample objective in (loc, log scale),
        // with the same noise at every parameter value
        let objective = |loc: &[f64], log_scale: &[f64]| {
            let a = BaseDensity::gaussian(loc.to_vec(), log_scale.iter().map(|v| v.exp()).collect()).unwrap();
            relbo.estimate(&a, n, seed).unwrap().mean
        };
        let loc = s.loc().to_vec();
        let log_scale: Vec<f64> = s.scale().iter().map(|v| v.ln()).collect();
        let h = 1e-4;
        let mut fd = Vec::new();
        for k in 0..4 {
            let (mut lp, mut lm, mut sp, mut sm) = (loc.clone(), loc.clone(), log_scale.clone(), log_scale.clone());
            if k < 2 {
                lp[k] += h;
                lm[k] -= h;
            } else {
                sp[k - 2] += h;
                sm[k - 2] -= h;
            }
            fd.push((objective(&lp, &sp) - objective(&lm, &sm)) / (2.0 * h));
        }
        let baseline = relbo.gradient(&s, 4096, rng::derive_seed(seed, &[1]), Estimator::ScoreFunction, 0.0).unwrap().residual_mean;
        for (name, estimator, b) in [
            ("reparameterization", Estimator::Reparameterization, 0.0),
            ("score function", Estimator::ScoreFunction, baseline),
        ] {
            let g = relbo.gradient(&s, n, seed, estimator, b).unwrap();
            let v: Vec<f64> = g.d_loc.iter().chain(&g.d_log_scale).copied().collect();
            let err = v.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                / fd.iter().map(|b| b * b).sum::<f64>().sqrt();
            estimators_ok &= err <= 0.05;
            details.push(format!(
                "{label} {name}: gradient [{}] vs differences [{}]: relative error {err:.4} (tol 0.05)",
                fmt_series(&v),
                fmt_series(&fd)
            ));
        }
    }

    let mut worst: f64 = 0.0;
    let mut r = rng::stream(99);
    let bimodal = BimodalTarget::default();
    let logistic5 = logistic_regression_model(synthetic_logistic(400, 5, 0).unwrap()).unwrap();
    let mf = matrix_factorization_model(synthetic_matrix(&MatrixSpec::default(), 0).unwrap(), 2).unwrap();
    let models: [(&str, &dyn TargetModel); 4] =
        [("bimodal", &bimodal), ("logistic 2-D", &model), ("logistic 5-D", &logistic5), ("factorization", &mf)];
    for (name, m) in models {
        let mut model_worst: f64 = 0.0;
        for _ in 0..20 {
            let z: Vec<f64> = (0..m.dim()).map(|_| rand::Rng::random_range(&mut r, -2.0..2.0)).collect();
            model_worst = model_worst.max(gradient_check(m, &z, 1e-5).expect("analytic gradient"));
        }
        details.push(format!("{name}: max relative gradient error {model_worst:.2e} over 20 points (tol 1e-4)"));
        worst = worst.max(model_worst);
    }
    Verdict::new(estimators_ok && worst <= 1e-4, "gradient estimators and analytic gradients", details)
}

// 8

fn experiment(model: ModelKind, n_seeds: usize, latent_dim: usize) -> boostvi::harness::RunSummary {
    let cfg = ExperimentConfig {
        model,
        n_seeds,
        latent_dim,
        fw: FwConfig {
            variant: Variant::LineSearch,
            max_iters: 10,
            ..FwConfig::default()
        },
        ..ExperimentConfig::default()
    };
    run_experiment(&cfg).unwrap()
}

fn logistic_comparison() -> Verdict {
    let s = experiment(ModelKind::Logistic, 5, 2);
    let (b, base) = (s.boosted["auroc"], s.baseline["auroc"]);
    let pass = b.mean >= base.mean && b.std <= 1.5 * base.std;
    let mut details = vec![format!(
        "test AUROC boosted {:.5} +- {:.5}, baseline {:.5} +- {:.5}",
        b.mean, b.std, base.mean, base.std
    )];
    for r in &s.per_seed {
        details.push(format!(
            "seed {}: selected iterate {}, AUROC {:.5} vs {:.5}",
            r.seed, r.best_iteration, r.boosted["auroc"], r.baseline["auroc"]
        ));
    }
    if s.per_seed.iter().all(|r| r.best_iteration == 0) {
        details.push("note: every seed kept the initial fit; no added atom improved the training likelihood".into());
    }
    Verdict::new(pass, "logistic regression: boosted AUROC mean >= baseline, std <= 1.5x", details)
}

// 9

fn factorization_comparison() -> Verdict {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for latent_dim in [2, 3] {
        let s = experiment(ModelKind::MatrixFactorization, 3, latent_dim);
        for r in &s.per_seed {
            let (b, base) = (r.boosted["mse"], r.baseline["mse"]);
            pass &= b <= base;
            details.push(format!(
                "D={latent_dim} seed {}: selected iterate {}, test MSE {b:.5} vs baseline {base:.5}",
                r.seed, r.best_iteration
            ));
        }
    }
    let elapsed = start.elapsed();
    details.push(format!("runtime {:.1} s (limit 300 s)", elapsed.as_secs_f64()));
    Verdict::new(
        pass && elapsed < Duration::from_secs(300),
        "matrix factorization: boosted MSE <= baseline for every seed",
        details,
    )
}

// 10

fn trace_without_wallclock(dir: &Path) -> serde_json::Value {
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(map) => {
                map.remove("wallclock");
                map.values_mut().for_each(strip);
            }
            serde_json::Value::Array(items) => items.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let mut v = serde_json::from_str(&fs::read_to_string(dir.join("trace.json")).unwrap()).unwrap();
    strip(&mut v);
    v
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let invocations: [&[&str]; 3] = [
        &["--model", "bimodal", "--variant", "fullycorrective", "--iters", "6", "--seed", "3", "--seeds", "2"],
        &["--model", "bimodal", "--variant", "fixed", "--family", "laplace", "--lambda", "const:0.5", "--iters", "5"],
        &["--model", "logistic", "--variant", "linesearch", "--iters", "2", "--lmo-steps", "300"],
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for (k, flags) in invocations.iter().enumerate() {
        let mut traces = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("run{k}_{rep}"));
            let status = Command::new(env!("CARGO_BIN_EXE_boostvi"))
                .arg("run")
                .args(*flags)
                .arg("--out")
                .arg(&out)
                .output()
                .unwrap();
            pass &= status.status.success();
            traces.push(trace_without_wallclock(&out));
        }
        let same = traces[0] == traces[1];
        pass &= same;
        details.push(format!("boostvi run {}: identical trace.json {same}", flags.join(" ")));
    }
    Verdict::new(pass, "repeated CLI runs give identical trace.json modulo wallclock", details)
}

fn main() {
    let mut traces = Vec::new();
    let criteria: Vec<(usize, Box<dyn FnOnce() -> Verdict>)> = vec![
        (1, Box::new(|| fig1(&mut traces))),
        (2, Box::new(rate_shape)),
        (5, Box::new(entropy_identity)),
        (6, Box::new(relbo_is_elbo)),
        (7, Box::new(gradients)),
        (4, Box::new(curvature_limit)),
        (8, Box::new(logistic_comparison)),
        (9, Box::new(factorization_comparison)),
        (10, Box::new(determinism)),
    ];
    let mut results: Vec<(usize, Verdict)> = criteria.into_iter().map(|(id, f)| (id, f())).collect();
    results.push((3, gap_bound(&traces)));
    results.sort_by_key(|(id, _)| *id);

    let mut failed = 0;
    for (id, v) in &results {
        println!("criterion {id:>2}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.summary);
        for d in &v.details {
            println!("    {d}");
        }
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
