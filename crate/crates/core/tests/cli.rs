use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use blin::io::read_matrix_csv;

fn blin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blin")).args(args).env_remove("BLIN_JOBS").output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = blin(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, seed: &str) {
    ok(&["simulate", "--seed", seed, "--s", "3", "--l", "3", "--q", "0.5", "--horizon", "40", "--replications", "2", "--out", path(dir)]);
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    simulate(&a, "7");
    simulate(&b, "7");
    simulate(&c, "8");
    for f in ["truth_a.csv", "truth_b.csv", "series_000.csv", "series_001.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("series_000.csv")).unwrap(), fs::read(a.join("series_001.csv")).unwrap());
    assert_ne!(fs::read(a.join("series_000.csv")).unwrap(), fs::read(c.join("series_000.csv")).unwrap());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    let r2 = manifest["calibration"]["achieved_r2"].as_f64().unwrap();
    assert!((r2 - 0.75).abs() <= 0.005);
}

#[test]
fn bcd_and_exact_fits_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "3");
    let input = sim.join("series_000.csv");
    let (exact, bcd) = (tmp.path().join("exact"), tmp.path().join("bcd"));
    ok(&["fit", "--input", path(&input), "--method", "exact", "--lags", "1,1", "--out", path(&exact)]);
    ok(&["fit", "--input", path(&input), "--method", "bcd", "--lags", "1,1", "--eta", "1e-16", "--max-iter", "200000", "--out", path(&bcd)]);
    for f in ["a.csv", "b.csv", "diag_effect.csv"] {
        let x = read_matrix_csv(fs::File::open(exact.join(f)).unwrap()).unwrap();
        let y = read_matrix_csv(fs::File::open(bcd.join(f)).unwrap()).unwrap();
        assert!((x - y).amax() < 1e-5, "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(bcd.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest.to_string().contains("spectral_radius"));
}

#[test]
fn cv_folds_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "4");
    let input = sim.join("series_000.csv");
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&["cv", "--seed", "2", "--input", path(&input), "--methods", "exact,sparse", "--lags", "1,1", "--folds", "5", "--out", path(&out)]);
        out
    };
    let (x, y) = (run("x"), run("y"));
    assert_eq!(fs::read(x.join("folds.csv")).unwrap(), fs::read(y.join("folds.csv")).unwrap());
    assert_eq!(fs::read(x.join("predictions.csv")).unwrap(), fs::read(y.join("predictions.csv")).unwrap());
}

#[test]
fn lagselect_and_scan_write_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "5");
    let input = sim.join("series_000.csv");
    let lag = tmp.path().join("lag");
    ok(&["lagselect", "--input", path(&input), "--grid", "1,1;2,1;1,2", "--out", path(&lag)]);
    let aic = fs::read_to_string(lag.join("aic.csv")).unwrap();
    assert_eq!(aic.lines().count(), 4, "{aic}");

    let scan = tmp.path().join("scan");
    ok(&[
        "scan",
        "--train",
        path(&input),
        "--test",
        path(&sim.join("series_001.csv")),
        "--truth-a",
        path(&sim.join("truth_a.csv")),
        "--truth-b",
        path(&sim.join("truth_b.csv")),
        "--points",
        "11",
        "--out",
        path(&scan),
    ]);
    assert_eq!(fs::read_to_string(scan.join("scan.csv")).unwrap().lines().count(), 12);
}

#[test]
fn rankcheck_reports_json() {
    let out = ok(&["rankcheck", "--s", "3", "--l", "2", "--horizon", "6", "--lags", "1,1"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // 5 slices of 3×2 give 30 rows for 3² + 2² − 1 = 12 free parameters
    assert_eq!(v["rank"], 12);
    assert_eq!(v["unique"], true);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(blin(&["fit", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(blin(&["simulate", "--q", "1.5", "--out", "/nonexistent/never"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one_with_json() {
    let out = blin(&["--error-json", "fit", "--input", "/nonexistent/series.csv", "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert_eq!(err["error"], "io");
    assert!(err["message"].as_str().unwrap().contains("/nonexistent/series.csv"), "{err}");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("blin.toml");
    fs::write(&cfg, "[simulate]\ns = 2\nl = 2\nhorizon = 15\n").unwrap();
    let out = tmp.path().join("sim");
    ok(&["--config", path(&cfg), "simulate", "--horizon", "12", "--out", path(&out)]);
    let series = fs::read_to_string(out.join("series_000.csv")).unwrap();
    // header plus 12 slices of 2×2 cells
    assert_eq!(series.lines().count(), 1 + 12 * 4);

    fs::write(&cfg, "[simulate]\nno_such_key = 1\n").unwrap();
    assert_eq!(blin(&["--config", path(&cfg), "simulate", "--out", path(&out)]).status.code(), Some(2));
}
