use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::Value;

use hawkesboot_core::rng::stream;

fn hawkesboot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hawkesboot")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn simulate_writes_reproducible_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for out in [&a, &b] {
        let o = hawkesboot(&["simulate", "--model", "2A", "--T", "100", "--seed", "7", "--out", path(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let events = text.lines().filter(|l| !l.starts_with('#')).count();
    // mean 100, standard deviation about 20
    assert!((40..=160).contains(&events), "{events} events");
    assert!(dir.path().join("a.presample.txt").exists());
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        let digits = line.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
        assert!(digits >= 15, "{line}");
    }
}

#[test]
fn explosive_simulation_is_allowed_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.txt");
    let o = hawkesboot(&["simulate", "--mu", "0.5", "--alpha", "6", "--beta", "5", "--T", "5", "--burn-in", "0", "--out", path(&out)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.txt");
    assert_eq!(hawkesboot(&["simulate", "--model", "2A", "--T", "0", "--out", path(&out)]).status.code(), Some(2));
    assert_eq!(hawkesboot(&["fit", "--data", path(&dir.path().join("missing.txt"))]).status.code(), Some(2));
    let data = fixture("supercritical.txt");
    let o = hawkesboot(&["bootstrap", "--data", &data, "--scheme", "bca"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown scheme"));
    let unsorted = dir.path().join("unsorted.txt");
    fs::write(&unsorted, "1\n2\n1.5\n").unwrap();
    let o = hawkesboot(&["fit", "--data", path(&unsorted)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsorted.txt:3"));
}

#[test]
fn poisson_fit_is_the_event_rate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("p.txt");
    fs::write(&data, "# horizon = 20\n1\n3\n4\n7\n9\n11\n12\n15\n18\n19\n").unwrap();
    let out = dir.path().join("fit.json");
    let o = hawkesboot(&["fit", "--data", path(&data), "--kernel", "poisson", "--out", path(&out)]);
    assert!(o.status.success());
    let doc = json(&out);
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["config"]["kernel"], "poisson");
    assert!((doc["fit"]["theta_hat"]["mu"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn refit_from_the_estimate_is_a_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.txt");
    assert!(hawkesboot(&["simulate", "--model", "2B", "--T", "200", "--seed", "3", "--out", path(&data)]).status.success());
    let first = dir.path().join("f1.json");
    assert!(hawkesboot(&["fit", "--data", path(&data), "--out", path(&first)]).status.success());
    let t = &json(&first)["fit"]["theta_hat"];
    let init = format!("{:e},{:e},{:e}", t["mu"].as_f64().unwrap(), t["alpha"].as_f64().unwrap(), t["beta"].as_f64().unwrap());
    let second = dir.path().join("f2.json");
    assert!(hawkesboot(&["fit", "--data", path(&data), "--init", &init, "--out", path(&second)]).status.success());
    let a = json(&first)["fit"]["estimate"].clone();
    let b = json(&second)["fit"]["estimate"].clone();
    for k in 0..3 {
        let (x, y) = (a[k].as_f64().unwrap(), b[k].as_f64().unwrap());
        assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn bootstrap_intervals_use_the_documented_order_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.txt");
    assert!(hawkesboot(&["simulate", "--model", "3B", "--T", "100", "--seed", "4", "--out", path(&data)]).status.success());
    let out = dir.path().join("b.json");
    let o = hawkesboot(&[
        "bootstrap", "--data", path(&data), "--scheme", "prfb", "--B", "199", "--level", "0.95", "--seed", "2",
        "--null", "0.2,4,5", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&out);
    assert_eq!(doc["retained"], 199, "no discards expected here");
    let mut betas: Vec<f64> = doc["draws"].as_array().unwrap().iter().map(|d| d[2].as_f64().unwrap()).collect();
    betas.sort_by(f64::total_cmp);
    let ci = &doc["percentile_ci"]["beta"];
    assert_eq!(ci[0].as_f64().unwrap(), betas[4]);
    assert_eq!(ci[1].as_f64().unwrap(), betas[194]);
    let p = doc["null"]["p_value"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
    assert_eq!(doc["config"]["scheme"], "prfb");
}

#[test]
fn explosive_fit_warns_for_fixed_and_refuses_recursive() {
    let data = fixture("supercritical.txt");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    let o = hawkesboot(&["bootstrap", "--data", &data, "--scheme", "prfb", "--B", "49", "--out", path(&out)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let doc = json(&out);
    assert!(doc["fit"]["theta_hat"]["a"].as_f64().unwrap() >= 1.0);
    assert!(!doc["warnings"].as_array().unwrap().is_empty());

    let o = hawkesboot(&["bootstrap", "--data", &data, "--scheme", "nprb", "--B", "49"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sanity check"));
}

#[test]
fn smoke_monte_carlo_run() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = hawkesboot(&["mc", "--reps", "10", "--B", "19", "--models", "1B,3C", "--horizons", "50", "--out-dir", path(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(start.elapsed() < Duration::from_secs(60));
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["config"]["reps"], 10);
    for cell in report["cells"].as_array().unwrap() {
        let attempted = cell["attempted"].as_u64().unwrap();
        let parts = cell["valid"].as_u64().unwrap()
            + cell["sanity_failures"].as_u64().unwrap()
            + cell["optimizer_failures"].as_u64().unwrap();
        assert_eq!(parts, attempted);
        assert!(cell.get("wall_time").is_none());
    }
    let header = fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    let golden = fs::read_to_string(fixture("rates_header.csv")).unwrap();
    assert_eq!(header.lines().next(), golden.lines().next());
    for f in ["intervals.txt", "ellipsoids.txt", "lr_size.txt", "summary.txt", "timings.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "B = 5\n").unwrap();
    let o = hawkesboot(&["mc", "--config", path(&bad), "--out-dir", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn diagnose_accepts_exponential_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let mut passed = 0;
    for seed in 0..100u64 {
        let mut rng = stream(404, seed);
        let values: Vec<String> = (0..300).map(|_| format!("{:e}", -(1.0 - rng.random::<f64>()).ln())).collect();
        let file = dir.path().join(format!("r{seed}.txt"));
        fs::write(&file, values.join("\n")).unwrap();
        let out = dir.path().join(format!("d{seed}"));
        let o = hawkesboot(&["diagnose", "--residuals", path(&file), "--out-dir", path(&out)]);
        assert!(o.status.success());
        let summary = hawkesboot::diagnose::check_diagnostics(&out).unwrap();
        if summary.ks.p_value > 0.01 {
            passed += 1;
        }
    }
    assert!(passed >= 99, "{passed}/100");
}

#[test]
fn diagnose_fits_event_data_and_rejects_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.txt");
    assert!(hawkesboot(&["simulate", "--model", "2C", "--T", "100", "--seed", "8", "--out", path(&data)]).status.success());
    let out = dir.path().join("diag");
    assert!(hawkesboot(&["diagnose", "--data", path(&data), "--max-lag", "15", "--out-dir", path(&out)]).status.success());
    let s = hawkesboot::diagnose::check_diagnostics(&out).unwrap();
    assert_eq!(s.config.max_lag, 15);
    assert!(s.theta.is_some());

    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let o = hawkesboot(&["diagnose", "--residuals", path(&empty), "--out-dir", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn documented_mc_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{}/../../docs/examples/mc.toml", env!("CARGO_MANIFEST_DIR"));
    let o = hawkesboot(&["mc", "--config", &config, "--reps", "3", "--B", "19", "--out-dir", path(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["cells"].as_array().unwrap().len(), 4);
}
