//! End-to-end runs of the binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn levirotor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levirotor")).args(args).output().expect("binary runs")
}

fn header_value(path: &Path, key: &str) -> Option<String> {
    let prefix = format!("# {key}: ");
    fs::read_to_string(path).ok()?.lines().find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
}

/// Data rows of a table, skipping the manifest and the column header.
fn rows(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).expect("table exists");
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().expect("number")).collect())
        .collect()
}

fn columns(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).expect("table exists");
    let line = text.lines().find(|l| !l.starts_with('#')).expect("column header");
    line.split(',').map(str::to_string).collect()
}

#[test]
fn presets_are_listed_and_round_trip() {
    let list = levirotor(&["presets"]);
    assert!(list.status.success());
    let names = String::from_utf8(list.stdout).unwrap();
    for name in ["fig2", "fig4", "fig5", "fig6"] {
        assert!(names.contains(name));
    }

    let dir = tempfile::tempdir().unwrap();
    let text = levirotor(&["presets", "fig5"]).stdout;
    let file = dir.path().join("fig5.toml");
    fs::write(&file, text).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(levirotor(&["rates", "--preset", "fig5", "--out", a.to_str().unwrap()]).status.success());
    assert!(levirotor(&["rates", "--config", file.to_str().unwrap(), "--out", b.to_str().unwrap()]).status.success());
    let hash = |d: &Path| header_value(&d.join("manifest.txt"), "config_sha256").unwrap();
    assert_eq!(hash(&a), hash(&b));
}

#[test]
fn normalized_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = levirotor(&["rates", "--preset", "fig5", "-o", "circuit.resistance=\"5 MOhm\"", "--out", a.to_str().unwrap()]);
    assert!(out.status.success());
    let cfg = a.join("config.toml");
    assert!(levirotor(&["rates", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]).status.success());
    let hash = |d: &Path| header_value(&d.join("rates.csv"), "config_sha256").unwrap();
    assert_eq!(hash(&a), hash(&b));
    assert_eq!(rows(&a.join("rates.csv")), rows(&b.join("rates.csv")));
}

#[test]
fn zero_duration_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = levirotor(&["simulate", "--preset", "fig2", "-o", "run.duration=\"0 s\"", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["trajectory.csv", "effective.csv"] {
        let path = dir.path().join(name);
        assert!(rows(&path).is_empty());
        assert_eq!(columns(&path)[..3], ["t", "x", "y"]);
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(format!("{sub}{seed}"));
        let args = ["simulate", "--preset", "fig4", "--seed", seed, "-o", "run.duration=\"50 us\"", "-o", "run.members=2", "--out"];
        let status = levirotor(&[&args[..], &[out.to_str().unwrap()]].concat()).status;
        assert!(status.success());
        fs::read(out.join("trajectory_001.csv")).unwrap()
    };
    let first = run("a", "7");
    assert_eq!(first, run("b", "7"));
    assert_ne!(first, run("c", "8"));
}

#[test]
fn bad_input_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for bad in ["trap.frequency=\"75 furlongs\"", "trap.frequency=\"75 V\"", "trap.colour=\"red\""] {
        let res = levirotor(&["pseudopotential", "--preset", "fig2", "-o", bad, "--out", out]);
        assert_eq!(res.status.code(), Some(2), "{bad}");
        assert!(!res.stderr.is_empty());
    }
    assert_eq!(levirotor(&["simulate", "--preset", "nope", "--out", out]).status.code(), Some(2));
}

#[test]
fn rates_vanish_at_zero_frequency_for_a_parallel_circuit() {
    let dir = tempfile::tempdir().unwrap();
    assert!(levirotor(&["rates", "--preset", "fig5", "--out", dir.path().to_str().unwrap()]).status.success());
    let path = dir.path().join("rates.csv");
    assert_eq!(header_value(&path, "gamma_at_zero").unwrap().parse::<f64>().unwrap(), 0.0);
    let table = rows(&path);
    assert_eq!(table.len(), 1001);
    let peak = table.iter().max_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
    // Parallel resonance 1 / (2 pi sqrt(L C)) of the base circuit.
    let f_lc = 1.0 / (std::f64::consts::TAU * (0.565f64 * 5.8e-9).sqrt());
    assert!((peak[0] - f_lc).abs() < 20.0, "peak at {} Hz", peak[0]);
}

#[test]
fn psd_peaks_at_the_secular_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    assert!(levirotor(&["psd", "--preset", "fig5", "--out", dir.path().to_str().unwrap()]).status.success());
    let path = dir.path().join("psd.csv");
    let cols = columns(&path);
    let table = rows(&path);
    let peak = |name: &str| {
        let c = cols.iter().position(|x| x == name).unwrap();
        table.iter().max_by(|a, b| a[c].total_cmp(&b[c])).unwrap()[0]
    };
    assert!((peak("S_z:cm") - 2117.0).abs() < 10.0);
    assert!((peak("S_beta:rot") - 4999.0).abs() < 10.0);
    let t_z: f64 = header_value(&path, "stage cm").unwrap().split(' ').nth(1).unwrap().parse().unwrap();
    assert!(t_z > 1.0 && t_z < 20.0, "{t_z}");
}

#[test]
fn cool_ensemble_writes_members_and_mean() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "cool", "--preset", "fig5", "-o", "run.duration=\"2 s\"", "-o", "run.members=3", "-o", "cool.window=\"0.5 s\"",
        "--jobs", "2", "--out",
    ];
    let out = levirotor(&[&args[..], &[dir.path().to_str().unwrap()]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mean = rows(&dir.path().join("cool_mean.csv"));
    assert_eq!(mean.len(), 4);
    let members: Vec<_> = (0..3).map(|k| rows(&dir.path().join(format!("cool_{k:03}.csv")))).collect();
    let e_z = members.iter().map(|m| m[3][7]).sum::<f64>() / 3.0;
    approx_eq(mean[3][1], e_z);
    approx_eq(mean[3][0], 2.0);
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("# file: cool_002.csv"));
}

#[test]
fn pseudopotential_reports_linear_trap_stability() {
    let dir = tempfile::tempdir().unwrap();
    assert!(levirotor(&["pseudopotential", "--preset", "fig5", "--out", dir.path().to_str().unwrap()]).status.success());
    let minima = dir.path().join("minima.csv");
    assert_eq!(header_value(&minima, "stable").as_deref(), Some("true"));
    assert!(!rows(&minima).is_empty());
    assert_eq!(rows(&dir.path().join("veff.csv")).len(), 201);
}

#[test]
fn escape_is_reported_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--preset", "fig4", "-o", "trap.u_ac=\"-1 V\"", "-o", "run.members=1", "-o", "integrator.escape_radius=2", "--out"];
    let out = levirotor(&[&args[..], &[dir.path().to_str().unwrap()]].concat());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("trajectory.csv");
    assert!(header_value(&path, "failure").is_some());
    assert!(!rows(&path).is_empty());
}

fn approx_eq(a: f64, b: f64) {
    assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()), "{a} vs {b}");
}

#[test]
fn empty_schedule_is_a_plain_run() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["cool", "--preset", "fig5", "-o", "schedule=[]", "-o", "run.duration=\"1 s\"", "--out"];
    let out = levirotor(&[&args[..], &[dir.path().to_str().unwrap()]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("cool.csv");
    assert_eq!(rows(&path).len(), 10);
    assert!(header_value(&path, "stage base").is_some());
}
