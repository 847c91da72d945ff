//! Command line front end. `run` parses arguments, executes one subcommand
//! and maps the outcome to the exit-code contract (0 success, 2 bad config,
//! 3 convergence failure, 4 certificate failure).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::background::{
    calibrate_force, solve_background, verify_multiplier, BackgroundFlow1D, GasConfig, MultiplierCertificate,
    SonicClassification,
};
use crate::basis::RadialBasis;
use crate::config::{parse_config, Formats, RunConfig};
use crate::error::{Error, Result};
use crate::field::Jet;
use crate::fixed_point::{fixed_point_solve, perturbation_scaling_study, FixedPointSolution, SolveReport};
use crate::force::ForceModel;
use crate::io::{check_svg, svg_line_plot, write_csv, write_gnuplot, write_json, Series};
use crate::linear::{manufactured_problem, solve_linear, LinearOptions, LinearReport};
use crate::norms::{weighted_norms, NormReport};
use crate::verify::{run_all, SuiteOutcome, VerifySettings};

#[derive(Debug, Parser)]
#[command(name = "transonic", version, about = "Smooth transonic flows in a cylinder under an external force")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (bracketed sections of key = value lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides outputs.directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Perturbation amplitude; overrides fixed_point.eps.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Seed of the random verification fields.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// One-dimensional background flow and its multiplier certificate.
    Background,
    /// Radial eigenvalues and normalizations.
    Basis,
    /// Manufactured-solution solve of the linearized equation.
    Linear,
    /// Nonlinear fixed point, sonic front and report.
    Solve,
    /// ε-scaling study over fixed_point.sweep_eps.
    Sweep,
    /// All invariant suites, printed as a pass/fail table.
    Verify,
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("TOOL_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Validation { key: "--config".into(), msg: "a configuration file is required".into() })?;
    let text = fs::read_to_string(path).map_err(|e| Error::Validation {
        key: "--config".into(),
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(eps) = cli.eps {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Validation { key: "--eps".into(), msg: format!("{eps} is not a non-negative number") });
        }
        cfg.eps = eps;
        cfg.inlet.eps = eps;
    }
    Ok(cfg)
}

/// Configured force, rescaled when `force.calibrate` is set.
pub fn force_model(cfg: &RunConfig) -> Result<ForceModel> {
    let model = cfg.force.model();
    if cfg.force.calibrate {
        calibrate_force(&model, &cfg.gas)
    } else {
        Ok(model)
    }
}

struct Sink {
    dir: PathBuf,
    formats: Formats,
}

impl Sink {
    fn new(cli: &Cli, cfg: &RunConfig) -> Result<Self> {
        let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.outputs.directory));
        fs::create_dir_all(&dir)?;
        Ok(Sink { dir, formats: cfg.outputs.formats })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        if self.formats.csv {
            write_csv(&self.path(name), header, rows)?;
        }
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        if self.formats.json {
            write_json(&self.path(name), value)?;
        }
        Ok(())
    }

    fn plot(&self, stem: &str, title: &str, labels: (&str, &str), header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        if self.formats.gnuplot {
            write_gnuplot(&self.path(&format!("{stem}.dat")), header, rows)?;
        }
        if self.formats.svg {
            let series = Series { label: title.to_string(), points: rows.iter().map(|r| (r[0], r[1])).collect() };
            let svg = svg_line_plot(title, labels.0, labels.1, &[series]);
            check_svg(&svg)?;
            fs::write(self.path(&format!("{stem}.svg")), svg)?;
        }
        Ok(())
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = load_config(cli)?;
    let sink = Sink::new(cli, &cfg)?;
    match cli.command {
        Command::Background => cmd_background(&cfg, &sink),
        Command::Basis => cmd_basis(&cfg, &sink),
        Command::Linear => cmd_linear(&cfg, &sink),
        Command::Solve => cmd_solve(&cfg, &sink),
        Command::Sweep => cmd_sweep(&cfg, &sink),
        Command::Verify => cmd_verify(cli, &cfg, &sink),
    }
}

fn background(cfg: &RunConfig) -> Result<(ForceModel, BackgroundFlow1D)> {
    let force = force_model(cfg)?;
    let flow = solve_background(&cfg.gas, &force, cfg.discretization.m_x1)?;
    Ok((force, flow))
}

fn basis(cfg: &RunConfig) -> Result<RadialBasis> {
    RadialBasis::build(cfg.discretization.n_modes, cfg.discretization.q_nodes)
}

#[derive(Debug, Serialize)]
struct BackgroundSummary<'a> {
    gas: &'a GasConfig,
    force: &'a ForceModel,
    #[serde(rename = "J")]
    j: f64,
    c_star: f64,
    #[serde(rename = "B0")]
    b0: f64,
    nodes: usize,
    mass_flux_residual: f64,
    bernoulli_residual: f64,
    classification: &'a SonicClassification,
    certificate: &'a MultiplierCertificate,
}

fn cmd_background(cfg: &RunConfig, sink: &Sink) -> Result<i32> {
    let (force, flow) = background(cfg)?;
    let mach = flow.mach();
    let rows: Vec<Vec<f64>> = (0..flow.len())
        .map(|i| vec![flow.x1[i], flow.u_bar[i], flow.rho_bar[i], flow.c2_bar[i], flow.k11_bar[i], flow.k1_bar[i], mach[i]])
        .collect();
    sink.csv("background.csv", &["x1", "u", "rho", "c2", "k11", "k1", "mach"], &rows)?;
    let u_rows: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], r[1]]).collect();
    let m_rows: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], r[6]]).collect();
    sink.plot("u_bar", "background velocity", ("x1", "u"), &["x1", "u"], &u_rows)?;
    sink.plot("mach", "Mach number", ("x1", "M"), &["x1", "mach"], &m_rows)?;
    let certificate = verify_multiplier(&flow, None)?;
    let summary = BackgroundSummary {
        gas: &cfg.gas,
        force: &force,
        j: flow.j,
        c_star: flow.c_star,
        b0: flow.b0,
        nodes: flow.len(),
        mass_flux_residual: flow.mass_flux_residual(),
        bernoulli_residual: flow.bernoulli_residual(),
        classification: &flow.classification,
        certificate: &certificate,
    };
    sink.json("background.json", &summary)?;
    println!(
        "background: {} nodes, c* = {:.12}, sonic case {:?}, d0 = {}, kappa* = {:.6}",
        flow.len(),
        flow.c_star,
        flow.classification.case,
        certificate.d0,
        certificate.kappa_star
    );
    Ok(0)
}

fn cmd_basis(cfg: &RunConfig, sink: &Sink) -> Result<i32> {
    let b = basis(cfg)?;
    let rows: Vec<Vec<f64>> = b.table().into_iter().map(|(j, l, c)| vec![j as f64, l, c]).collect();
    sink.csv("basis.csv", &["j", "lambda_j", "normalization"], &rows)?;
    println!("basis: N = {}, Q = {}, Gram deviation {:.3e}", b.n, b.q(), b.gram_deviation());
    Ok(0)
}

fn norm_rows(rep: &NormReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (m, v) in rep.norms.iter().enumerate() {
        rows.push(vec![m.to_string(), v.to_string(), "total".into(), (v * v).to_string()]);
        for t in rep.components.iter().filter(|t| t.order == m) {
            rows.push(vec![m.to_string(), v.to_string(), t.name.clone(), t.value.to_string()]);
        }
    }
    rows
}

fn write_norms(sink: &Sink, rep: &NormReport) -> Result<()> {
    if sink.formats.csv {
        crate::io::write_csv_text(&sink.path("norms.csv"), &["m", "norm", "term", "value"], &norm_rows(rep))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct LinearSummary<'a> {
    nodes: usize,
    modes: usize,
    error_l2r: f64,
    error_h1r: f64,
    report: &'a LinearReport,
}

fn cmd_linear(cfg: &RunConfig, sink: &Sink) -> Result<i32> {
    let (_, flow) = background(cfg)?;
    let b = basis(cfg)?;
    let cert = verify_multiplier(&flow, None)?;
    let (coeffs, exact) = manufactured_problem(&flow, &b)?;
    let options = LinearOptions { d0: Some(cert.d0), ..LinearOptions::default() };
    let sol = solve_linear(&coeffs, &b, &cfg.sigma, &options)?;
    let err = weighted_norms(&sol.field.axpy(-1.0, &exact)?, &b, 1)?;
    let summary = LinearSummary {
        nodes: flow.len(),
        modes: b.n,
        error_l2r: err.l2r(),
        error_h1r: err.h1r(),
        report: &sol.report,
    };
    sink.json("linear_solve.json", &summary)?;
    let header: Vec<String> = std::iter::once("x1".to_string()).chain((0..b.n).map(|j| format!("A{j}"))).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = (0..sol.field.m)
        .map(|i| std::iter::once(sol.field.x(i)).chain(sol.field.node(i).iter().copied()).collect())
        .collect();
    sink.csv("modes.csv", &header, &rows)?;
    write_norms(sink, &weighted_norms(&sol.field, &b, 4)?)?;
    println!(
        "linear: {} sigma levels, converged {}, manufactured L2r error {:.3e}, energy ratio {:.4}",
        sol.report.sigmas.len(),
        sol.report.converged,
        err.l2r(),
        sol.report.energy_ratio
    );
    sol.require_converged()?;
    Ok(0)
}

/// Rows `(x1, r, u1, ur, rho, mach)` of the perturbed flow on the grid.
pub fn solution_rows(sol: &FixedPointSolution, flow: &BackgroundFlow1D, basis: &RadialBasis) -> Result<Vec<Vec<f64>>> {
    let jet = Jet::from_field(&sol.psi, basis, 1)?;
    let (dx, dr) = (jet.f(1, 0), jet.f(0, 1));
    let eps = sol.report.eps;
    let gamma = flow.model.gas.gamma;
    let q = basis.q();
    let mut rows = Vec::with_capacity(flow.len() * q);
    for i in 0..flow.len() {
        for p in 0..q {
            let k = i * q + p;
            let u1 = flow.u_bar[i] + dx[k] + eps * sol.psi0.dx[k];
            let ur = dr[k] + eps * sol.psi0.dr[k];
            let c2 = (gamma - 1.0) * (flow.b0 + flow.potential[i] - 0.5 * (u1 * u1 + ur * ur));
            let rho = (c2 / gamma).powf(1.0 / (gamma - 1.0));
            let mach = (u1 * u1 + ur * ur).sqrt() / c2.sqrt();
            rows.push(vec![flow.x1[i], basis.quad.nodes[p], u1, ur, rho, mach]);
        }
    }
    Ok(rows)
}

fn cmd_solve(cfg: &RunConfig, sink: &Sink) -> Result<i32> {
    let (_, flow) = background(cfg)?;
    let b = basis(cfg)?;
    let sol = fixed_point_solve(&cfg.inlet, &flow, &b, &cfg.fixed_point)?;
    sink.csv("solution.csv", &["x1", "r", "u1", "ur", "rho", "mach"], &solution_rows(&sol, &flow, &b)?)?;
    let front = &sol.report.front;
    let rows: Vec<Vec<f64>> = (0..front.r.len()).map(|p| vec![front.r[p], front.xi[p], front.dxi[p]]).collect();
    sink.csv("front.csv", &["r", "xi", "dxi"], &rows)?;
    let plot_rows: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[1], r[0]]).collect();
    sink.plot("front", "sonic front", ("x1", "r"), &["xi", "r"], &plot_rows)?;
    sink.json("report.json", &sol.report)?;
    write_norms(sink, &sol.report.perturbation)?;
    print_solve(&sol.report);
    Ok(0)
}

fn print_solve(r: &SolveReport) {
    println!(
        "solve: eps = {:e}, {} iterations, max ratio {:.3e}, |phi - phi_bar|_H2 = {:.4e}, |xi|_C1 = {:.4e}, residual {:.3e}",
        r.eps,
        r.iterations.len(),
        r.max_ratio,
        r.perturbation.norms[2],
        r.front.c1_norm,
        r.residual.l2r
    );
}

fn cmd_sweep(cfg: &RunConfig, sink: &Sink) -> Result<i32> {
    let (_, flow) = background(cfg)?;
    let b = basis(cfg)?;
    let study = perturbation_scaling_study(&cfg.inlet, &cfg.sweep_eps, &flow, &b, &cfg.fixed_point)?;
    let rows: Vec<Vec<f64>> = study
        .rows
        .iter()
        .map(|r| vec![r.eps, r.h2, r.h4, r.c1_norm, r.iterations as f64, r.max_ratio])
        .collect();
    sink.csv("sweep.csv", &["eps", "h2", "h4", "c1_norm", "iterations", "max_ratio"], &rows)?;
    sink.json("sweep.json", &study)?;
    println!(
        "sweep: slope H2 {:.4}, slope H4 {:.4}, slope front {:.4}",
        study.slope_h2, study.slope_h4, study.slope_front
    );
    Ok(0)
}

/// Fixed-width pass/fail table.
pub fn format_table(outcomes: &[SuiteOutcome]) -> String {
    let mut s = String::new();
    for o in outcomes {
        s += &format!("{:<18} {}  {}\n", o.name, if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    s
}

fn cmd_verify(cli: &Cli, cfg: &RunConfig, sink: &Sink) -> Result<i32> {
    let force = force_model(cfg)?;
    let settings = VerifySettings { seed: cli.seed.unwrap_or(VerifySettings::default().seed), ..VerifySettings::default() };
    let outcomes = run_all(&cfg.gas, &force, cfg.discretization.m_x1, &settings);
    print!("{}", format_table(&outcomes));
    sink.json("verify.json", &outcomes)?;
    Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { 4 })
}

/// Convenience for tests: run with a config path and output directory.
pub fn run_with(command: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args: Vec<OsString> = vec!["transonic".into(), command.into()];
    args.push("--config".into());
    args.push(config.into());
    args.push("--out".into());
    args.push(out.into());
    args.extend(extra.iter().map(OsString::from));
    run(args)
}
