//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any fails.

use std::time::{Duration, Instant};

use transonic::background::{
    bernoulli_roots, calibrate_force, classify_sonic_point, extend_background, fit_exponent, sonic_speed,
    solve_background, verify_multiplier, Background, BackgroundFlow1D, GasConfig, SonicCase, SonicThermo,
};
use transonic::basis::RadialBasis;
use transonic::fixed_point::{fixed_point_solve, perturbation_scaling_study, FixedPointParams, InletData, InletProfile};
use transonic::force::{ForceModel, ForceShape};
use transonic::linear::{extend_problem, manufactured_problem, solve_extended, solve_linear, LinearOptions, SigmaSchedule};
use transonic::norms::weighted_norms;
use transonic::verify::{algebra_suite, equivalence_suite, linf_suite, VerifySettings};

// tolerances
const ROOT_TOL: f64 = 1e-12;
const C_STAR_TOL: f64 = 1e-12;
const SLOPE_TOL: f64 = 1e-6;
const CONSERVATION_TOL: f64 = 1e-10;
const MULTIPLIER_MARGIN_MIN: f64 = 4.0;
const SQRT_LAMBDA2: f64 = 3.8317059702;
const EIGEN_TOL: f64 = 1e-8;
const GRAM_TOL: f64 = 1e-10;
const ORDER_RANGE: (f64, f64) = (1.8, 2.2);
const SIGMA_TOL: f64 = 1e-8;
const ENERGY_SPREAD: f64 = 2.0;
const COINCIDENCE_FACTOR: f64 = 10.0;
const FP_MAX_ITER: usize = 20;
const FP_MAX_RATIO: f64 = 0.5;
const FP_RUNTIME: Duration = Duration::from_secs(60);
const SCALING_RANGE: (f64, f64) = (0.9, 1.1);
const ZERO_TOL: f64 = 1e-10;
const EXPONENT_REL: f64 = 0.05;

fn demo_gas() -> GasConfig {
    GasConfig { gamma: 2.0, rho0: 1.25, u0: 0.8, l0: -1.0, l1: 1.0 }
}

fn demo_force() -> ForceModel {
    calibrate_force(&ForceModel::linear(1.0), &demo_gas()).unwrap()
}

fn demo_flow(m: usize) -> BackgroundFlow1D {
    solve_background(&demo_gas(), &demo_force(), m).unwrap()
}

fn schedule() -> SigmaSchedule {
    SigmaSchedule { sigma0: 1e-2, levels: 30, tol: SIGMA_TOL }
}

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_bernoulli_roots() -> Outcome {
    // gamma = 2, J = 1: u²/2 + 2/u = 2.5, i.e. (u - 1)(u² + u - 4) = 0
    let th = SonicThermo::new(2.0, 1.0, 2.5);
    let (sub, sup) = th.roots_at_level(2.5).map_err(|e| e.to_string())?;
    let want = (1.0, (-1.0 + 17f64.sqrt()) / 2.0);
    let err = (sub - want.0).abs().max((sup - want.1).abs());
    // the public entry point agrees away from the sonic point
    let gas = demo_gas();
    let (s2, p2) = bernoulli_roots(-0.5, &gas, &demo_force()).map_err(|e| e.to_string())?;
    check(err <= ROOT_TOL && s2 < p2, format!("roots ({sub:.15}, {sup:.15}), max error {err:.2e}"))
}

fn c2_sonic_slope() -> Outcome {
    let c = sonic_speed(1.0, 2.0);
    let c_err = (c - 2f64.cbrt()).abs();
    let gas = demo_gas();
    let force = demo_force();
    let flow = solve_background(&gas, &force, 161).map_err(|e| e.to_string())?;
    let target = (force.value_over_x(0.0) / 3.0).sqrt();
    // second-order one-sided difference of the sampled state, Richardson-extrapolated over h
    let model = &flow.model;
    let u = |x: f64| model.state(x).unwrap().u;
    let u0 = u(0.0);
    let d = |h: f64| (-3.0 * u0 + 4.0 * u(h) - u(2.0 * h)) / (2.0 * h);
    let hs = [1e-2, 5e-3, 2.5e-3];
    let ds: Vec<f64> = hs.iter().map(|&h| d(h)).collect();
    let r1 = (4.0 * ds[1] - ds[0]) / 3.0;
    let r2 = (4.0 * ds[2] - ds[1]) / 3.0;
    let slope = (8.0 * r2 - r1) / 7.0;
    let s_err = (slope - target).abs();
    check(
        c_err <= C_STAR_TOL && s_err <= SLOPE_TOL,
        format!("|c* - 2^(1/3)| = {c_err:.2e}, u'(0) = {slope:.10} vs {target:.10} (error {s_err:.2e})"),
    )
}

fn c3_conservation() -> Outcome {
    let mut worst: f64 = 0.0;
    for m in [160, 320, 640] {
        let f = demo_flow(m);
        worst = worst.max(f.mass_flux_residual()).max(f.bernoulli_residual());
    }
    check(worst <= CONSERVATION_TOL, format!("max residual {worst:.2e} over M = 160, 320, 640"))
}

fn c4_multiplier() -> Outcome {
    let cert = verify_multiplier(&demo_flow(160), None).map_err(|e| e.to_string())?;
    let coercive = cert.coercivity_margins.iter().copied().fold(f64::INFINITY, f64::min);
    let multiplier = cert.multiplier_margins.iter().copied().fold(f64::INFINITY, f64::min);
    check(coercive > 0.0 && multiplier >= MULTIPLIER_MARGIN_MIN, format!("d0 = {}, coercivity margin = {coercive:.4}, multiplier margin = {multiplier:.4}", cert.d0))
}

// J1 by its power series, independent of the library's evaluator
fn j1_series(x: f64) -> f64 {
    let mut term = x / 2.0;
    let mut sum = term;
    for k in 1..80 {
        term *= -(x * x) / (4.0 * k as f64 * (k as f64 + 1.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn c5_eigenbasis() -> Outcome {
    let (mut a, mut b) = (3.5, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if j1_series(a) * j1_series(mid) <= 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    let oracle = 0.5 * (a + b);
    let basis = RadialBasis::build(16, 128).map_err(|e| e.to_string())?;
    let root = basis.lambda[1].sqrt();
    let gram = basis.gram_deviation();
    let e1 = (root - SQRT_LAMBDA2).abs();
    let e2 = (root - oracle).abs();
    check(
        e1 <= EIGEN_TOL && e2 <= EIGEN_TOL && gram <= GRAM_TOL,
        format!("sqrt(lambda_2) = {root:.12} (bisection {oracle:.12}), Gram deviation {gram:.2e}"),
    )
}

struct LinearRun {
    m: usize,
    h: f64,
    err: f64,
    energy: f64,
    converged: bool,
    last_change: f64,
    coincidence: f64,
}

fn linear_runs() -> Result<Vec<LinearRun>, String> {
    let basis = RadialBasis::build(16, 96).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for m in [101, 201, 401] {
        let flow = demo_flow(m);
        let (c, exact) = manufactured_problem(&flow, &basis).map_err(|e| e.to_string())?;
        let sol = solve_linear(&c, &basis, &schedule(), &LinearOptions::default()).map_err(|e| e.to_string())?;
        let err = weighted_norms(&sol.field.axpy(-1.0, &exact).unwrap(), &basis, 0).unwrap().l2r();
        let ext = extend_background(&flow, None, None).map_err(|e| e.to_string())?;
        let ep = extend_problem(&c, &ext).map_err(|e| e.to_string())?;
        let es = solve_extended(&ep, &basis, &schedule()).map_err(|e| e.to_string())?;
        let coincidence =
            weighted_norms(&es.field.restrict(m).axpy(-1.0, &sol.field).unwrap(), &basis, 0).unwrap().l2r();
        out.push(LinearRun {
            m,
            h: flow.h,
            err,
            energy: sol.report.energy_ratio,
            converged: sol.report.converged && es.report.converged,
            last_change: sol.report.changes.last().copied().unwrap_or(f64::NAN),
            coincidence,
        });
    }
    Ok(out)
}

fn c6_order(runs: &[LinearRun]) -> Outcome {
    let orders: Vec<f64> = runs.windows(2).map(|w| (w[0].err / w[1].err).ln() / (w[0].h / w[1].h).ln()).collect();
    let in_range = orders.iter().all(|p| (ORDER_RANGE.0..=ORDER_RANGE.1).contains(p));
    let sigma_ok = runs.iter().all(|r| r.converged && r.last_change < SIGMA_TOL);
    let errs: Vec<String> = runs.iter().map(|r| format!("M={} {:.3e}", r.m, r.err)).collect();
    check(
        in_range && sigma_ok,
        format!("errors [{}], orders {:.3?}, sigma schedule converged: {sigma_ok}", errs.join(", "), orders),
    )
}

fn c7_energy(runs: &[LinearRun]) -> Outcome {
    let lo = runs.iter().map(|r| r.energy).fold(f64::INFINITY, f64::min);
    let hi = runs.iter().map(|r| r.energy).fold(0.0, f64::max);
    check(hi / lo < ENERGY_SPREAD, format!("|psi|_H1 / |F0|_L2 in [{lo:.5}, {hi:.5}], spread {:.4}", hi / lo))
}

fn c8_coincidence(runs: &[LinearRun]) -> Outcome {
    let worst = runs.iter().map(|r| r.coincidence / r.err).fold(0.0, f64::max);
    let items: Vec<String> = runs.iter().map(|r| format!("M={} {:.2e}", r.m, r.coincidence)).collect();
    check(worst <= COINCIDENCE_FACTOR, format!("|Psi|_D - psi| [{}], worst ratio to error {worst:.3}", items.join(", ")))
}

fn fp_params() -> FixedPointParams {
    let mut p = FixedPointParams::default();
    p.schedule.levels = 30;
    p
}

fn c9_fixed_point() -> Outcome {
    let eps = 1e-3;
    let inlet = InletData::new(eps, 0.2, InletProfile::Bump { amplitude: 2e-5 }).map_err(|e| e.to_string())?;
    let basis = RadialBasis::build(12, 96).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let sol = fixed_point_solve(&inlet, &demo_flow(160), &basis, &fp_params()).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let r = &sol.report;
    let gate = r.iterations.iter().all(|it| it.h4 <= eps.sqrt());
    let fine = fixed_point_solve(&inlet, &demo_flow(320), &basis, &fp_params()).map_err(|e| e.to_string())?;
    let (res_c, res_f) = (r.residual.projected_l2r, fine.report.residual.projected_l2r);
    check(
        r.converged
            && r.iterations.len() <= FP_MAX_ITER
            && r.max_ratio <= FP_MAX_RATIO
            && gate
            && res_f < res_c
            && elapsed <= FP_RUNTIME,
        format!(
            "{} iterations, max ratio {:.2e}, H4 gate held: {gate}, residual {res_c:.3e} (M=160) -> {res_f:.3e} (M=320), {:.2}s",
            r.iterations.len(),
            r.max_ratio,
            elapsed.as_secs_f64()
        ),
    )
}

fn c10_scaling() -> Outcome {
    let basis = RadialBasis::build(12, 96).map_err(|e| e.to_string())?;
    let flow = demo_flow(160);
    let inlet = InletData::new(1e-3, 0.2, InletProfile::Bump { amplitude: 2e-5 }).map_err(|e| e.to_string())?;
    let study = perturbation_scaling_study(&inlet, &[0.0, 1e-3, 5e-4, 2.5e-4], &flow, &basis, &fp_params())
        .map_err(|e| e.to_string())?;
    let zero = &study.rows[0];
    let zero_ok = zero.h2 == 0.0 && zero.h4 == 0.0 && zero.c1_norm <= ZERO_TOL;
    let within = |s: f64| (SCALING_RANGE.0..=SCALING_RANGE.1).contains(&s);
    check(
        within(study.slope_h2) && within(study.slope_front) && zero_ok,
        format!(
            "slope H2 {:.4}, slope front {:.4}, eps = 0: |phi - phi_bar|_H2 = {:.1e}, |xi|_C1 = {:.1e}",
            study.slope_h2, study.slope_front, zero.h2, zero.c1_norm
        ),
    )
}

fn c11_suites() -> Outcome {
    let s = VerifySettings::default();
    let out = [equivalence_suite(&s), algebra_suite(&s), linf_suite(&s)];
    let detail: Vec<String> = out.iter().map(|o| format!("{}: {}", o.name, o.detail)).collect();
    check(out.iter().all(|o| o.passed), detail.join("; "))
}

fn c12_degenerate() -> Outcome {
    let gas = demo_gas();
    let poly = |c: Vec<f64>| ForceModel::new(ForceShape::Polynomial { coeffs: c });
    let cases = [
        (poly(vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]), SonicCase::ZeroAccelSmooth { m: 1 }, 3.0),
        (poly(vec![0.0, 0.0, 0.0, 1.0]), SonicCase::ZeroAccelJump { m: 1 }, 2.0),
        (ForceModel::new(ForceShape::Piecewise { left: vec![-1.0], right: vec![1.0] }), SonicCase::Holder { m: 0 }, 0.5),
    ];
    let xs: Vec<f64> = (0..9).map(|k| 1e-4 * 2f64.powi(k)).collect();
    let mut ok = true;
    let mut items = Vec::new();
    for (shape, case, expect) in cases {
        let force = calibrate_force(&shape, &gas).map_err(|e| e.to_string())?;
        let class = classify_sonic_point(&force, gas.gamma).map_err(|e| e.to_string())?;
        let model = Background::new(&gas, &force, 0.0).map_err(|e| e.to_string())?;
        let p = fit_exponent(&model, &xs).map_err(|e| e.to_string())?;
        let rel = (p - expect).abs() / expect;
        ok &= class.case == case && rel <= EXPONENT_REL;
        items.push(format!("{:?}: exponent {p:.4} (expected {expect})", class.case));
    }
    check(ok, items.join("; "))
}

fn main() {
    let started = Instant::now();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {n:>2} [{name}] {detail} ({:.2}s)", t.elapsed().as_secs_f64());
    };
    report(1, "Bernoulli roots", &c1_bernoulli_roots);
    report(2, "sonic speed and slope", &c2_sonic_slope);
    report(3, "conservation", &c3_conservation);
    report(4, "multiplier certificate", &c4_multiplier);
    report(5, "eigenbasis", &c5_eigenbasis);
    match linear_runs() {
        Ok(runs) => {
            report(6, "manufactured convergence", &|| c6_order(&runs));
            report(7, "energy estimate", &|| c7_energy(&runs));
            report(8, "extended-domain coincidence", &|| c8_coincidence(&runs));
        }
        Err(e) => {
            for (n, name) in [(6, "manufactured convergence"), (7, "energy estimate"), (8, "extended-domain coincidence")] {
                report(n, name, &|| Err(e.clone()));
            }
        }
    }
    report(9, "fixed point", &c9_fixed_point);
    report(10, "eps scaling", &c10_scaling);
    report(11, "function-space suites", &c11_suites);
    report(12, "degenerate classification", &c12_degenerate);
    println!("acceptance: {} of 12 passed in {:.1}s", 12 - failed, started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
