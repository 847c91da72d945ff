use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use transonic::background::MultiplierCertificate;
use transonic::fixed_point::{ScalingStudy, SolveReport};
use transonic::io::{read_csv, read_json};
use transonic::verify::SuiteOutcome;

const SMALL: &str = "\
[gas]
gamma = 2.0
rho0 = 1.25
u0 = 0.8
L0 = -1.0
L1 = 1.0

[force]
kind = linear
slope = 1.0
calibrate = true

[discretization]
N_modes = 6
Q_nodes = 32
M_x1 = 64

[sigma]
levels = 30

[fixed_point]
eps = 1e-3
sweep_eps = 0, 1e-3, 5e-4

[outputs]
formats = csv, json, gnuplot, svg
";

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("transonic-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

fn bin(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_transonic")).args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn background_rows_match_grid() {
    let dir = scratch("bg");
    let cfg = write_config(&dir, SMALL);
    let out = dir.join("out");
    assert_eq!(transonic::cli::run_with("background", &cfg, &out, &[]), 0);
    let (header, rows) = read_csv(&out.join("background.csv")).unwrap();
    assert_eq!(header, ["x1", "u", "rho", "c2", "k11", "k1", "mach"]);
    assert_eq!(rows.len(), 64);
    let crossings = rows.windows(2).filter(|w| (w[0][6] - 1.0) * (w[1][6] - 1.0) < 0.0).count();
    assert_eq!(crossings, 1);
    for name in ["background.json", "u_bar.dat", "u_bar.svg", "mach.dat", "mach.svg"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let summary: serde_json::Value = read_json(&out.join("background.json")).unwrap();
    let cert: MultiplierCertificate = serde_json::from_value(summary["certificate"].clone()).unwrap();
    assert!(cert.d0 > 0.0);
}

#[test]
fn exit_codes() {
    let dir = scratch("codes");
    let cfg = write_config(&dir, SMALL);
    let cfg_s = cfg.to_str().unwrap();
    let out = dir.join("out");
    let out_s = out.to_str().unwrap();
    assert_eq!(bin(&["basis", "--config", cfg_s, "--out", out_s]), 0);
    // no config, unknown subcommand, invalid value
    assert_eq!(bin(&["basis", "--out", out_s]), 2);
    assert_eq!(bin(&["nonsense", "--config", cfg_s]), 2);
    let bad = write_config(&scratch("bad"), &SMALL.replace("gamma = 2.0", "gamma = 0.9"));
    assert_eq!(bin(&["background", "--config", bad.to_str().unwrap(), "--out", out_s]), 2);
    let dup = write_config(&scratch("dup"), &SMALL.replace("u0 = 0.8", "u0 = 0.8\nu0 = 0.7"));
    assert_eq!(bin(&["background", "--config", dup.to_str().unwrap(), "--out", out_s]), 2);
    // above eps_max the iteration is refused as non-contracting
    assert_eq!(bin(&["solve", "--config", cfg_s, "--out", out_s, "--eps", "0.5"]), 3);
}

#[test]
fn degenerate_force_is_a_config_level_refusal() {
    let dir = scratch("degenerate");
    let text = SMALL.replace("slope = 1.0", "slope = -1.0").replace("calibrate = true", "calibrate = false");
    let cfg = write_config(&dir, &text);
    assert_eq!(transonic::cli::run_with("background", &cfg, &dir.join("out"), &[]), 2);
    // zero acceleration at the sonic point (f = x³) is classified but not solved on a grid
    let text = SMALL.replace("kind = linear\nslope = 1.0", "kind = polynomial\ncoeffs = 0, 0, 0, 1");
    let cfg = write_config(&dir, &text);
    assert_eq!(transonic::cli::run_with("background", &cfg, &dir.join("out"), &[]), 2);
}

#[test]
fn solve_outputs_round_trip_and_are_deterministic() {
    let dir = scratch("solve");
    let cfg = write_config(&dir, SMALL);
    let (a, b) = (dir.join("a"), dir.join("b"));
    assert_eq!(transonic::cli::run_with("solve", &cfg, &a, &[]), 0);
    assert_eq!(transonic::cli::run_with("solve", &cfg, &b, &[]), 0);
    for name in ["solution.csv", "front.csv", "report.json", "norms.csv", "front.dat", "front.svg"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let report: SolveReport = read_json(&a.join("report.json")).unwrap();
    assert!(report.converged);
    let again = serde_json::to_string_pretty(&report).unwrap();
    assert_eq!(serde_json::from_str::<SolveReport>(&again).unwrap(), report);
    let (header, rows) = read_csv(&a.join("solution.csv")).unwrap();
    assert_eq!(header, ["x1", "r", "u1", "ur", "rho", "mach"]);
    assert_eq!(rows.len(), 64 * 32);
    let (_, front) = read_csv(&a.join("front.csv")).unwrap();
    assert_eq!(front.len(), 32);
    // the front sits near the background sonic point x1 = 0
    assert!(front.iter().all(|r| r[1].abs() < 1e-3));
}

#[test]
fn zero_eps_front_is_flat() {
    let dir = scratch("flat");
    let cfg = write_config(&dir, SMALL);
    let out = dir.join("out");
    assert_eq!(transonic::cli::run_with("solve", &cfg, &out, &["--eps", "0"]), 0);
    let (_, front) = read_csv(&out.join("front.csv")).unwrap();
    assert!(front.iter().all(|r| r[1].abs() <= 1e-10 && r[2].abs() <= 1e-10));
}

#[test]
fn sweep_and_verify() {
    let dir = scratch("sweep");
    let cfg = write_config(&dir, SMALL);
    let out = dir.join("out");
    assert_eq!(transonic::cli::run_with("sweep", &cfg, &out, &[]), 0);
    let study: ScalingStudy = read_json(&out.join("sweep.json")).unwrap();
    assert_eq!(study.rows.len(), 3);
    assert_eq!(study.rows[0].h2, 0.0);
    assert!((study.slope_h2 - 1.0).abs() < 0.1);
    let (_, rows) = read_csv(&out.join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), 3);

    assert_eq!(transonic::cli::run_with("verify", &cfg, &out, &["--seed", "7"]), 0);
    let suites: Vec<SuiteOutcome> = read_json(&out.join("verify.json")).unwrap();
    assert_eq!(suites.len(), 8);
    assert!(suites.iter().all(|s| s.passed));
}

#[test]
fn linear_and_basis_reports() {
    let dir = scratch("linear");
    let cfg = write_config(&dir, SMALL);
    let out = dir.join("out");
    assert_eq!(transonic::cli::run_with("basis", &cfg, &out, &[]), 0);
    let (_, basis) = read_csv(&out.join("basis.csv")).unwrap();
    assert_eq!(basis.len(), 6);
    assert!((basis[1][1].sqrt() - 3.8317059702).abs() < 1e-8);

    assert_eq!(transonic::cli::run_with("linear", &cfg, &out, &[]), 0);
    let summary: serde_json::Value = read_json(&out.join("linear_solve.json")).unwrap();
    assert_eq!(summary["report"]["converged"], true);
    assert!(summary["error_l2r"].as_f64().unwrap() < 1e-2);
    let (header, rows) = read_csv(&out.join("modes.csv")).unwrap();
    assert_eq!(header.len(), 7);
    assert_eq!(rows.len(), 64);
}

#[test]
fn output_formats_are_honoured() {
    let dir = scratch("formats");
    let cfg = write_config(&dir, &SMALL.replace("formats = csv, json, gnuplot, svg", "formats = json"));
    let out = dir.join("out");
    assert_eq!(transonic::cli::run_with("background", &cfg, &out, &[]), 0);
    assert!(out.join("background.json").exists());
    assert!(!out.join("background.csv").exists());
    assert!(!out.join("mach.svg").exists());
}
