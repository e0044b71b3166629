use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_datri-lab"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("datri-lab-test-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of a sweep CSV, comment lines skipped.
fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn report_json(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

/// Small battery so exit-code tests stay quick.
const LIGHT: &str = r#""hemisphere_axes": 2, "evenness_samples": 4, "steiner_samples": 4,
    "sphere_radii": [0.4], "tube_radii": [0.25],
    "sphere": {"polar_nodes": 12, "azimuth_nodes": 24},
    "tube": {"t_nodes": 12, "phi_nodes": 24}"#;

fn light_config(dir: &Path, tolerances: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(
        &path,
        format!(r#"{{"model": "euclidean", "battery": {{{LIGHT}, "tolerances": {{{tolerances}}}}}}}"#),
    )
    .unwrap();
    path
}

#[test]
fn report_euclidean_matches() {
    let dir = scratch("report-euclidean");
    let o = run(&["report", "--model", "euclidean", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report_json(&dir);
    assert_eq!(r["report"]["classification"], "D'ATRI-CONSISTENT");
    assert_eq!(r["config"]["model"], "euclidean");
    assert!(fs::read_to_string(dir.join("report.txt")).unwrap().contains("D'ATRI-CONSISTENT"));
}

#[test]
fn report_heisenberg_is_datri() {
    let dir = scratch("report-heisenberg");
    let o = run(&["report", "--model", "heisenberg", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(report_json(&dir)["report"]["classification"], "D'ATRI-CONSISTENT");
}

#[test]
fn report_perturbed_is_not_datri() {
    let dir = scratch("report-perturbed");
    let o = run(&["report", "--model", "perturbed_conformal", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report_json(&dir);
    assert_eq!(r["report"]["classification"], "NOT-D'ATRI");
    assert_eq!(r["report"]["expected"], "no");
}

#[test]
fn impossible_universal_tolerance_is_invalid() {
    let dir = scratch("invalid");
    let cfg = light_config(&dir, r#""universal": 1e-300"#);
    let o = run(&["report", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let r = report_json(&dir);
    assert_eq!(r["report"]["classification"], "INVALID");
    assert_eq!(r["report"]["failing_universal"][0], "gauss_bonnet_sphere");
}

#[test]
fn impossible_datri_tolerance_is_mismatch() {
    let dir = scratch("mismatch");
    let cfg = light_config(&dir, r#""datri_pass": 1e-300"#);
    let o = run(&["report", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_ne!(report_json(&dir)["report"]["classification"], "D'ATRI-CONSISTENT");
}

#[test]
fn unknown_model_prints_schema() {
    let o = run(&["report", "--model", "klein_bottle"]);
    assert_eq!(code(&o), 1);
    let e = stderr(&o);
    assert!(e.contains("unknown model 'klein_bottle'"));
    assert!(e.contains("berger_sphere: lambda=0.8 in [0.3, 1.5]"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = scratch("usage");
    assert_eq!(code(&run(&["report"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["sweep", "--model", "round_sphere", "--param", "kappa=9"])), 1);
    assert_eq!(code(&run(&["sweep", "--model", "euclidean", "--param", "kappa=1"])), 1);
    assert_eq!(code(&run(&["sweep", "--model", "euclidean", "--param", "kappa"])), 1);
    let bad = dir.join("bad.json");
    fs::write(&bad, r#"{"model": "euclidean", "radius": 0.3}"#).unwrap();
    let o = run(&["sweep", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown field"));
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn grid_beyond_working_radius_refused() {
    let dir = scratch("refused");
    let o = run(&["sweep", "--model", "euclidean", "--r", "0.3,1.5", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("exceeds the working radius"));
    assert!(fs::read_dir(&dir).unwrap().next().is_none());
}

#[test]
fn sphere_sweep_euclidean_constant() {
    let dir = scratch("sphere-sweep");
    let o = run(&["sweep", "--model", "euclidean", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.join("sweep_sphere-total_euclidean.csv"));
    assert_eq!(header, ["r", "total", "relative_defect"]);
    assert_eq!(rows.len(), 5);
    for (row, r) in rows.iter().zip([0.1, 0.2, 0.3, 0.4, 0.5]) {
        assert!((row[0] - r).abs() < 1e-15);
        assert!((row[1] - 25.13274).abs() < 1e-5);
    }
}

#[test]
fn hemisphere_sweep_berger_is_four_pi() {
    let dir = scratch("hemisphere-sweep");
    let o = run(&[
        "sweep",
        "--model",
        "berger_sphere",
        "--kind",
        "hemisphere-total",
        "--r",
        "0.1,0.2,0.3",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = csv_rows(&dir.join("sweep_hemisphere-total_berger_sphere.csv"));
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!((row[1] - 12.56637).abs() < 1e-5);
        assert!((row[2] - 4.0 * PI).abs() < 1e-9);
    }
}

#[test]
fn tube_sweep_perturbed_grows_cubically() {
    let dir = scratch("tube-sweep");
    let o = run(&[
        "sweep",
        "--model",
        "perturbed_conformal",
        "--kind",
        "tube-total",
        "--base",
        "1",
        "--r",
        "0.05,0.1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = csv_rows(&dir.join("sweep_tube-total_perturbed_conformal.csv"));
    assert!(rows[0][1].abs() > 1e-7);
    let ratio = rows[1][1] / rows[0][1];
    assert!((ratio - 8.0).abs() < 0.5, "ratio {ratio}");
}

#[test]
fn sweep_output_reproducible() {
    let dirs = [scratch("repro-a"), scratch("repro-b")];
    let mut bodies = Vec::new();
    for d in &dirs {
        let o = run(&[
            "sweep",
            "--model",
            "heisenberg",
            "--kind",
            "theta-profile",
            "--out",
            d.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let text = fs::read_to_string(d.join("sweep_theta-profile_heisenberg.csv")).unwrap();
        let stamped: Vec<&str> = text.lines().filter(|l| l.starts_with("# generated_at")).collect();
        assert_eq!(stamped.len(), 1);
        let out: Vec<String> = text
            .lines()
            .filter(|l| !l.starts_with("# generated_at"))
            .map(|l| l.replace(d.to_str().unwrap(), "OUT"))
            .collect();
        bodies.push(out);
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn knu_sweep_constant_on_space_form() {
    let dir = scratch("knu-sweep");
    let o = run(&["sweep", "--model", "hyperbolic", "--kind", "knu-profile", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.join("sweep_knu-profile_hyperbolic.csv"));
    assert_eq!(header, ["t", "knu", "fitted"]);
    for row in rows {
        // ½τ − ρ(γ′,γ′) = 3κ − 2κ
        assert!((row[1] + 1.0).abs() < 1e-9);
    }
}

fn series_json(model: &str, extra: &[&str], tag: &str) -> Value {
    let dir = scratch(tag);
    let mut args = vec!["series", "--model", model, "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let name = fs::read_dir(&dir).unwrap().next().unwrap().unwrap().path();
    serde_json::from_str(&fs::read_to_string(name).unwrap()).unwrap()
}

fn coefficient(v: &Value, name: &str) -> (f64, f64, f64) {
    let row = v["comparison"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["coefficient"] == name)
        .unwrap();
    (
        row["fitted"].as_f64().unwrap(),
        row["uncertainty"].as_f64().unwrap(),
        row["predicted"].as_f64().unwrap(),
    )
}

#[test]
fn series_euclidean_is_trivial() {
    let v = series_json("euclidean", &[], "series-euclidean");
    let a: Vec<f64> = v["theta"]["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_f64().unwrap())
        .collect();
    assert!((a[0] - 1.0).abs() < 1e-12);
    assert!(a[1..].iter().all(|c| c.abs() < 1e-9));
}

#[test]
fn series_round_sphere_a2() {
    let v = series_json("round_sphere", &[], "series-sphere");
    let (fit, sigma, pred) = coefficient(&v, "a2");
    assert!((pred + 1.0 / 3.0).abs() < 1e-12);
    assert!((fit + 1.0 / 3.0).abs() < 1e-6 + 10.0 * sigma);
}

#[test]
fn series_perturbed_odd_coefficient() {
    let v = series_json("perturbed_conformal", &["--base", "1"], "series-perturbed");
    let (fit, _, pred) = coefficient(&v, "a3");
    assert!(fit.abs() > 1e-3);
    assert!((fit - pred).abs() < 1e-4);
}
