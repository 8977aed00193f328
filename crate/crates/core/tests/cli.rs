use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn boostvi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boostvi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// trace.json with every `wallclock` field removed.
fn trace_without_wallclock(dir: &Path) -> Value {
    fn strip(v: &mut Value) {
        match v {
            Value::Object(map) => {
                map.remove("wallclock");
                map.values_mut().for_each(strip);
            }
            Value::Array(items) => items.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let mut v: Value = serde_json::from_str(&fs::read_to_string(dir.join("trace.json")).unwrap()).unwrap();
    strip(&mut v);
    v
}

#[test]
fn run_writes_three_files_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = |out: &Path| {
        vec![
            "run".to_string(),
            "--model".into(),
            "bimodal".into(),
            "--variant".into(),
            "fixed".into(),
            "--iters".into(),
            "10".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    for dir in [&a, &b] {
        let argv = args(dir);
        let o = boostvi(&argv.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stderr.is_empty());
        let stdout = String::from_utf8_lossy(&o.stdout);
        // one progress line per iterate
        assert_eq!(stdout.lines().filter(|l| l.contains(" t ")).count(), 11);
    }
    for f in ["trace.json", "summary.json", "density.csv", "config.json"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    assert_eq!(trace_without_wallclock(&a), trace_without_wallclock(&b));
}

#[test]
fn bogus_variant_is_a_config_error() {
    let o = boostvi(&["run", "--variant", "bogus"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("variant"));
    assert!(o.stdout.is_empty());
}

#[test]
fn config_file_with_unknown_key() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("cfg.json");
    fs::write(&path, r#"{"modle": "bimodal"}"#).unwrap();
    let o = boostvi(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("modle"));
}

#[test]
fn malformed_data_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("d.csv");
    fs::write(&path, "x1,y\n1,1\n,0\n").unwrap();
    let o = boostvi(&["run", "--model", "logistic", "--data", path.to_str().unwrap(), "--iters", "1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("x1"));
}

#[test]
fn default_probe_suite_passes() {
    let o = boostvi(&["probe"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.contains("PASS")).count(), 3);
}

#[test]
fn zero_scale_floor_fails_the_entropy_probe() {
    let o = boostvi(&["probe", "--probe", "entropy", "--scale-floor", "0"]);
    assert_eq!(code(&o), 3);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("FAIL") && stdout.contains("degenerate"), "{stdout}");
}

#[test]
fn unit_gamma_prints_twice_the_kl() {
    let o = boostvi(&["probe", "--probe", "curvature", "--gamma", "1.0"]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let rows: Vec<&str> = stdout.lines().filter(|l| l.contains("2KL(s||q)=")).collect();
    assert_eq!(rows.len(), 9);
    for row in rows {
        let field = |key: &str| -> f64 {
            let rest = &row[row.find(key).unwrap() + key.len()..];
            rest.split_whitespace().next().unwrap().parse().unwrap()
        };
        assert!((field("value=") - field("2KL(s||q)=")).abs() < 1e-6, "{row}");
    }
}

#[test]
fn plotdata_columns_and_gap_sign() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let o = boostvi(&["run", "--model", "bimodal", "--variant", "linesearch", "--iters", "6", "--out", run.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = boostvi(&["plotdata", "--run", run.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let density = fs::read_to_string(run.join("density_linesearch.csv")).unwrap();
    let header: Vec<&str> = density.lines().next().unwrap().split(',').collect();
    let trace: Value = serde_json::from_str(&fs::read_to_string(run.join("trace.json")).unwrap()).unwrap();
    let n_records = trace[0]["records"].as_array().unwrap().len();
    assert_eq!(header.len(), 2 + n_records);
    assert_eq!(&header[..2], &["z", "target"]);

    let mut reader = csv::Reader::from_path(run.join("series_linesearch.csv")).unwrap();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let gap: f64 = rec[3].parse().unwrap();
        let se: f64 = rec[4].parse().unwrap();
        assert!(gap + 4.0 * se >= 0.0, "{rec:?}");
        assert!(!rec[2].is_empty());
        rows += 1;
    }
    assert_eq!(rows, n_records);
}

#[test]
fn plotdata_needs_a_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&boostvi(&["plotdata", "--run", tmp.path().to_str().unwrap()])), 1);
    let missing = tmp.path().join("nope");
    assert_eq!(code(&boostvi(&["plotdata", "--run", missing.to_str().unwrap()])), 1);
    assert_eq!(code(&boostvi(&["plotdata"])), 1);
}
