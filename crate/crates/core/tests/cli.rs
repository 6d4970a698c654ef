//! End-to-end runs of the command-line binary.

use std::path::Path;
use std::process::{Command, Output};

use gmwmx::io::{parse_mom, read_mom};
use gmwmx::wavelet::empirical_wv;

fn gmwmx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmwmx")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, setting: &str, n: &str, seed: &str) -> std::path::PathBuf {
    let file = dir.join(format!("{setting}_{seed}.mom"));
    let out =
        gmwmx(&["simulate", "--setting", setting, "--n", n, "--missing", "3", "--seed", seed, "--output", path(&file)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    file
}

#[test]
fn simulate_then_estimate_writes_valid_json() {
    let dir = tempfile::tempdir().unwrap();
    let file = simulate(dir.path(), "A1", "2000", "4");
    let ts = read_mom(&file).unwrap();
    assert_eq!(ts.len(), 2000);
    assert!(ts.mask.contains(&0));

    let json = dir.path().join("fit.json");
    let out = gmwmx(&["estimate", "--input", path(&file), "--noise", "wn+pl", "--output", path(&json)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let beta = v["beta"].as_array().unwrap();
    assert_eq!(beta.len(), 6);
    for b in beta {
        let est = b["estimate"].as_f64().unwrap();
        let se = b["std_error"].as_f64().unwrap();
        assert!(se > 0.0 && b["ci_low"].as_f64().unwrap() < est && est < b["ci_high"].as_f64().unwrap());
    }
    assert_eq!(v["gamma"].as_array().unwrap().len(), 3);
    assert_eq!(v["wv"].as_array().unwrap().len(), 9);
    assert!(v["timings"].is_object());
    for key in ["p1", "p2", "mu"] {
        assert!(v["missingness"][key].is_f64());
    }
}

#[test]
fn simulate_estimate_round_trip_recovers_noise() {
    let dir = tempfile::tempdir().unwrap();
    let file = simulate(dir.path(), "A1", "7300", "17");
    let out = gmwmx(&["estimate", "--input", path(&file), "--noise", "wn+pl", "--no-timings"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let gamma: Vec<f64> = v["gamma"].as_array().unwrap().iter().map(|g| g["value"].as_f64().unwrap()).collect();
    assert!((gamma[2] - 0.9).abs() <= 0.1, "alpha {}", gamma[2]);
    assert!((gamma[0] - 10.0).abs() <= 3.0, "white noise variance {}", gamma[0]);
}

#[test]
fn estimate_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let file = simulate(dir.path(), "B1", "1500", "2");
    let run = || gmwmx(&["estimate", "--input", path(&file), "--noise", "wn+fl", "--no-timings"]);
    let a = run();
    let b = run();
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulated_files_parse_and_match_wv_command() {
    let dir = tempfile::tempdir().unwrap();
    let file = simulate(dir.path(), "C1", "1000", "6");
    let text = std::fs::read_to_string(&file).unwrap();
    let ts = parse_mom(&text).unwrap();
    let out = gmwmx(&["wv", "--input", path(&file), "--scales", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("scale,n_coefficients,wv"));
    let want = empirical_wv(&ts.values, Some(5)).unwrap();
    for (j, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0].parse::<usize>().unwrap(), j + 1);
        assert_eq!(cols[1].parse::<usize>().unwrap(), want.counts[j]);
        assert_eq!(cols[2].parse::<f64>().unwrap(), want.values[j]);
    }
}

#[test]
fn unknown_noise_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = simulate(dir.path(), "A1", "500", "1");
    let out = gmwmx(&["estimate", "--input", path(&file), "--noise", "wn+bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    let out = gmwmx(&["estimate", "--noise", "wn"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.mom");
    std::fs::write(&file, "51544 1.0\n51545 2.0\n51545 3.0\n").unwrap();
    let out = gmwmx(&["wv", "--input", path(&file)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    let out = gmwmx(&["wv", "--input", path(&dir.path().join("absent.mom"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn benchmark_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bench");
    let out = gmwmx(&["benchmark", "--setting", "B1", "--reps", "3", "--n", "730", "--output", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("setting,n,parameter,"));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(v["replicates"].as_u64().unwrap() + v["failures"].as_u64().unwrap(), 3);
}
