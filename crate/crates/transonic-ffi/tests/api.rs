use std::ffi::{CStr, CString};
use std::ptr;

use transonic_ffi::*;

const CONFIG: &str = "\
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
";

fn last_error() -> String {
    let p = transonic_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn parse(text: &str) -> (TransonicStatus, *mut TransonicConfig) {
    let c = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let status = unsafe { transonic_config_parse(c.as_ptr(), &mut cfg) };
    (status, cfg)
}

#[test]
fn background_through_handles() {
    let (status, cfg) = parse(CONFIG);
    assert_eq!(status, TransonicStatus::Ok);
    let mut bg = ptr::null_mut();
    assert_eq!(unsafe { transonic_background_solve(cfg, &mut bg) }, TransonicStatus::Ok);
    let n = unsafe { transonic_background_len(bg) };
    assert_eq!(n, 64);
    let (mut c_star, mut j) = (0.0, 0.0);
    assert_eq!(unsafe { transonic_background_constants(bg, &mut c_star, &mut j) }, TransonicStatus::Ok);
    // gamma = 2: c*^2 = 2 rho*, J = rho* c*, so c*^3 = 2 J
    assert!((c_star - (2.0 * j).cbrt()).abs() < 1e-12);
    let mut mach = vec![0.0; n];
    assert_eq!(
        unsafe { transonic_background_column(bg, TransonicColumn::Mach, mach.as_mut_ptr(), n) },
        TransonicStatus::Ok
    );
    assert!(mach[0] < 1.0 && mach[n - 1] > 1.0);
    let mut short = vec![0.0; n - 1];
    assert_eq!(
        unsafe { transonic_background_column(bg, TransonicColumn::X1, short.as_mut_ptr(), n - 1) },
        TransonicStatus::BufferTooSmall
    );
    assert!(last_error().contains("needed"));
    unsafe {
        transonic_background_free(bg);
        transonic_config_free(cfg);
    }
}

#[test]
fn solve_through_handles() {
    let (_, cfg) = parse(CONFIG);
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { transonic_solve(cfg, &mut sol) }, TransonicStatus::Ok);
    let (mut it, mut ratio, mut h2) = (0usize, 0.0, 0.0);
    assert_eq!(unsafe { transonic_solution_summary(sol, &mut it, &mut ratio, &mut h2) }, TransonicStatus::Ok);
    assert!((1..=20).contains(&it) && ratio <= 0.5 && h2 > 0.0);
    let n = unsafe { transonic_solution_front_len(sol) };
    assert_eq!(n, 32);
    let (mut r, mut xi) = (vec![0.0; n], vec![0.0; n]);
    assert_eq!(unsafe { transonic_solution_front(sol, r.as_mut_ptr(), xi.as_mut_ptr(), n) }, TransonicStatus::Ok);
    assert!(r.windows(2).all(|w| w[0] < w[1]));
    let (mut u1, mut ur) = (0.0, 0.0);
    assert_eq!(unsafe { transonic_solution_velocity(sol, 10, 3, &mut u1, &mut ur) }, TransonicStatus::Ok);
    assert!(u1 > 0.0);
    assert_eq!(
        unsafe { transonic_solution_velocity(sol, 64, 0, &mut u1, &mut ur) },
        TransonicStatus::OutOfRange
    );
    let json = unsafe { transonic_solution_report_json(sol) };
    assert!(!json.is_null());
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["converged"], true);
    unsafe {
        transonic_string_free(json);
        transonic_solution_free(sol);
        transonic_config_free(cfg);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let (status, cfg) = parse(&CONFIG.replace("gamma = 2.0", "gamma = 0.9"));
    assert_eq!(status, TransonicStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("gamma"));

    let (_, cfg) = parse(CONFIG);
    assert_eq!(unsafe { transonic_config_set_eps(cfg, -1.0) }, TransonicStatus::Config);
    assert_eq!(unsafe { transonic_config_set_eps(cfg, 0.5) }, TransonicStatus::Ok);
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { transonic_solve(cfg, &mut sol) }, TransonicStatus::Convergence);
    assert!(sol.is_null());
    unsafe { transonic_config_free(cfg) };

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { transonic_config_parse(ptr::null(), &mut out) }, TransonicStatus::NullArgument);
    assert_eq!(unsafe { transonic_background_solve(ptr::null(), &mut ptr::null_mut()) }, TransonicStatus::NullArgument);
    assert_eq!(unsafe { transonic_background_len(ptr::null()) }, 0);
    unsafe {
        transonic_config_free(ptr::null_mut());
        transonic_solution_free(ptr::null_mut());
        transonic_string_free(ptr::null_mut());
    }
}

#[test]
fn run_entry_point() {
    let args: Vec<CString> = ["transonic", "--version"].iter().map(|s| CString::new(*s).unwrap()).collect();
    let argv: Vec<*const i8> = args.iter().map(|a| a.as_ptr()).collect();
    assert_eq!(unsafe { transonic_run(argv.len() as i32, argv.as_ptr().cast()) }, 0);
    let args: Vec<CString> = ["transonic", "basis"].iter().map(|s| CString::new(*s).unwrap()).collect();
    let argv: Vec<*const i8> = args.iter().map(|a| a.as_ptr()).collect();
    assert_eq!(unsafe { transonic_run(argv.len() as i32, argv.as_ptr().cast()) }, 2);
    let v = unsafe { CStr::from_ptr(transonic_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
