//! C interface to the transonic solver.
//!
//! Objects cross the boundary as opaque handles created by `*_parse`/`*_solve`
//! functions and released by the matching `*_free`. Every fallible call
//! returns a [`TransonicStatus`]; on failure the message is kept per thread
//! and read back with [`transonic_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use transonic::background::{solve_background, BackgroundFlow1D};
use transonic::basis::RadialBasis;
use transonic::cli::{force_model, solution_rows};
use transonic::config::{parse_config, RunConfig};
use transonic::error::Error;
use transonic::fixed_point::{fixed_point_solve, FixedPointSolution};

/// Status codes. The first four match the command line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransonicStatus {
    Ok = 0,
    /// File or serialization failure.
    Io = 1,
    /// Malformed or invalid configuration, or a force outside the supported class.
    Config = 2,
    /// A solve did not converge or an assembled system was singular.
    Convergence = 3,
    /// The multiplier or extension certificate could not be established.
    Certificate = 4,
    NullArgument = 10,
    InvalidUtf8 = 11,
    OutOfRange = 12,
    BufferTooSmall = 13,
    Panic = 99,
}

/// Parsed and validated run configuration.
pub struct TransonicConfig {
    inner: RunConfig,
}

/// One-dimensional background flow on the configured grid.
pub struct TransonicBackground {
    flow: BackgroundFlow1D,
}

/// Converged fixed point with its report.
pub struct TransonicSolution {
    flow: BackgroundFlow1D,
    basis: RadialBasis,
    sol: FixedPointSolution,
}

/// Column selector for [`transonic_background_column`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransonicColumn {
    X1 = 0,
    Velocity = 1,
    Density = 2,
    SoundSpeedSquared = 3,
    K11 = 4,
    K1 = 5,
    Mach = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TransonicStatus {
    match e.exit_code() {
        1 => TransonicStatus::Io,
        2 => TransonicStatus::Config,
        4 => TransonicStatus::Certificate,
        _ => TransonicStatus::Convergence,
    }
}

fn fail(status: TransonicStatus, msg: impl Into<String>) -> TransonicStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), TransonicStatus>) -> TransonicStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TransonicStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(TransonicStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: transonic::error::Result<T>) -> Result<T, TransonicStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, TransonicStatus> {
    p.as_ref().ok_or_else(|| fail(TransonicStatus::NullArgument, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, TransonicStatus> {
    p.as_mut().ok_or_else(|| fail(TransonicStatus::NullArgument, format!("{what} is null")))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, TransonicStatus> {
    if p.is_null() {
        return Err(fail(TransonicStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(TransonicStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn fill(src: &[f64], buf: *mut f64, cap: usize) -> Result<(), TransonicStatus> {
    if buf.is_null() {
        return Err(fail(TransonicStatus::NullArgument, "output buffer is null"));
    }
    if cap < src.len() {
        return Err(fail(
            TransonicStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn transonic_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn transonic_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse configuration text. On success `*out` owns a new handle.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn transonic_config_parse(text: *const c_char, out: *mut *mut TransonicConfig) -> TransonicStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let cfg = lift(parse_config(c_str(text, "text")?))?;
        *out = Box::into_raw(Box::new(TransonicConfig { inner: cfg }));
        Ok(())
    })
}

/// Override the perturbation amplitude.
///
/// # Safety
/// `cfg` must be a live handle from [`transonic_config_parse`].
#[no_mangle]
pub unsafe extern "C" fn transonic_config_set_eps(cfg: *mut TransonicConfig, eps: f64) -> TransonicStatus {
    guard(|| {
        let cfg = out_ptr(cfg, "cfg")?;
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(fail(TransonicStatus::Config, format!("eps = {eps} must be a non-negative number")));
        }
        cfg.inner.eps = eps;
        cfg.inner.inlet.eps = eps;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn transonic_config_free(cfg: *mut TransonicConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Solve the background flow for `cfg` (calibrating the force if requested).
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn transonic_background_solve(
    cfg: *const TransonicConfig,
    out: *mut *mut TransonicBackground,
) -> TransonicStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let cfg = &borrow(cfg, "cfg")?.inner;
        let force = lift(force_model(cfg))?;
        let flow = lift(solve_background(&cfg.gas, &force, cfg.discretization.m_x1))?;
        *out = Box::into_raw(Box::new(TransonicBackground { flow }));
        Ok(())
    })
}

/// Number of grid nodes, or 0 for a null handle.
///
/// # Safety
/// `bg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn transonic_background_len(bg: *const TransonicBackground) -> usize {
    bg.as_ref().map_or(0, |b| b.flow.len())
}

/// Sonic speed c* and mass flux J.
///
/// # Safety
/// `bg` must be a live handle; `c_star` and `j` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn transonic_background_constants(
    bg: *const TransonicBackground,
    c_star: *mut f64,
    j: *mut f64,
) -> TransonicStatus {
    guard(|| {
        let b = borrow(bg, "bg")?;
        *out_ptr(c_star, "c_star")? = b.flow.c_star;
        *out_ptr(j, "j")? = b.flow.j;
        Ok(())
    })
}

/// Copy one nodal column into `buf`, which must hold `transonic_background_len` values.
///
/// # Safety
/// `bg` must be a live handle and `buf` valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn transonic_background_column(
    bg: *const TransonicBackground,
    column: TransonicColumn,
    buf: *mut f64,
    cap: usize,
) -> TransonicStatus {
    guard(|| {
        let f = &borrow(bg, "bg")?.flow;
        let mach;
        let src: &[f64] = match column {
            TransonicColumn::X1 => &f.x1,
            TransonicColumn::Velocity => &f.u_bar,
            TransonicColumn::Density => &f.rho_bar,
            TransonicColumn::SoundSpeedSquared => &f.c2_bar,
            TransonicColumn::K11 => &f.k11_bar,
            TransonicColumn::K1 => &f.k1_bar,
            TransonicColumn::Mach => {
                mach = f.mach();
                &mach
            }
        };
        fill(src, buf, cap)
    })
}

/// # Safety
/// `bg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn transonic_background_free(bg: *mut TransonicBackground) {
    if !bg.is_null() {
        drop(Box::from_raw(bg));
    }
}

/// Run the full fixed point for `cfg`.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn transonic_solve(cfg: *const TransonicConfig, out: *mut *mut TransonicSolution) -> TransonicStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let cfg = &borrow(cfg, "cfg")?.inner;
        let force = lift(force_model(cfg))?;
        let flow = lift(solve_background(&cfg.gas, &force, cfg.discretization.m_x1))?;
        let basis = lift(RadialBasis::build(cfg.discretization.n_modes, cfg.discretization.q_nodes))?;
        let sol = lift(fixed_point_solve(&cfg.inlet, &flow, &basis, &cfg.fixed_point))?;
        *out = Box::into_raw(Box::new(TransonicSolution { flow, basis, sol }));
        Ok(())
    })
}

/// Iteration count, final contraction ratio and ‖φ−φ̄‖ in H²ᵣ.
///
/// # Safety
/// `sol` must be a live handle; the output pointers valid.
#[no_mangle]
pub unsafe extern "C" fn transonic_solution_summary(
    sol: *const TransonicSolution,
    iterations: *mut usize,
    max_ratio: *mut f64,
    h2_norm: *mut f64,
) -> TransonicStatus {
    guard(|| {
        let r = &borrow(sol, "sol")?.sol.report;
        *out_ptr(iterations, "iterations")? = r.iterations.len();
        *out_ptr(max_ratio, "max_ratio")? = r.max_ratio;
        *out_ptr(h2_norm, "h2_norm")? = r.perturbation.norms[2];
        Ok(())
    })
}

/// Number of radial nodes on the sonic front.
///
/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn transonic_solution_front_len(sol: *const TransonicSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.sol.report.front.r.len())
}

/// Copy the front `x1 = xi(r)` into `r` and `xi`, each holding `cap` values.
///
/// # Safety
/// `sol` must be a live handle; `r` and `xi` valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn transonic_solution_front(
    sol: *const TransonicSolution,
    r: *mut f64,
    xi: *mut f64,
    cap: usize,
) -> TransonicStatus {
    guard(|| {
        let front = &borrow(sol, "sol")?.sol.report.front;
        fill(&front.r, r, cap)?;
        fill(&front.xi, xi, cap)
    })
}

/// Velocity `(u1, ur)` at grid node `(i, q)`: x₁-node `i`, radial node `q`.
///
/// # Safety
/// `sol` must be a live handle; `u1`, `ur` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn transonic_solution_velocity(
    sol: *const TransonicSolution,
    i: usize,
    q: usize,
    u1: *mut f64,
    ur: *mut f64,
) -> TransonicStatus {
    guard(|| {
        let s = borrow(sol, "sol")?;
        let nq = s.basis.q();
        if i >= s.flow.len() || q >= nq {
            return Err(fail(TransonicStatus::OutOfRange, format!("node ({i}, {q}) outside {} x {nq}", s.flow.len())));
        }
        let rows = lift(solution_rows(&s.sol, &s.flow, &s.basis))?;
        let row = &rows[i * nq + q];
        *out_ptr(u1, "u1")? = row[2];
        *out_ptr(ur, "ur")? = row[3];
        Ok(())
    })
}

/// Solve report as a JSON string owned by the caller; release it with
/// [`transonic_string_free`]. Returns null on failure.
///
/// # Safety
/// `sol` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn transonic_solution_report_json(sol: *const TransonicSolution) -> *mut c_char {
    let mut s = ptr::null_mut();
    let status = guard(|| {
        let report = &borrow(sol, "sol")?.sol.report;
        let json = serde_json::to_string(report).map_err(|e| fail(TransonicStatus::Io, e.to_string()))?;
        s = CString::new(json).map_err(|e| fail(TransonicStatus::Io, e.to_string()))?.into_raw();
        Ok(())
    });
    if status == TransonicStatus::Ok {
        s
    } else {
        ptr::null_mut()
    }
}

/// # Safety
/// `sol` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn transonic_solution_free(sol: *mut TransonicSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn transonic_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Run the command line tool with `argc` arguments (program name first) and
/// return its exit code.
///
/// # Safety
/// `argv` must hold `argc` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn transonic_run(argc: c_int, argv: *const *const c_char) -> c_int {
    let mut args = Vec::new();
    if argc > 0 {
        if argv.is_null() {
            set_error("argv is null".into());
            return 2;
        }
        for k in 0..argc as usize {
            match c_str(*argv.add(k), "argv") {
                Ok(a) => args.push(a.to_string()),
                Err(_) => return 2,
            }
        }
    }
    catch_unwind(|| transonic::cli::run(args)).unwrap_or_else(|_| {
        set_error("internal panic".into());
        3
    })
}
