//! One-dimensional transonic background flow driven by an external force.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::{smooth_step, Diff};
use crate::force::{ForceModel, ForceShape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasConfig {
    pub gamma: f64,
    pub rho0: f64,
    pub u0: f64,
    #[serde(rename = "L0")]
    pub l0: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
}

impl GasConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::Validation { key: format!("gas.{key}"), msg: msg.into() });
        if !(self.gamma > 1.0) || !self.gamma.is_finite() {
            return bad("gamma", "gamma must exceed 1");
        }
        if !(self.rho0 > 0.0) || !self.rho0.is_finite() {
            return bad("rho0", "inlet density must be positive");
        }
        if !(self.u0 > 0.0) || !self.u0.is_finite() {
            return bad("u0", "inlet velocity must be positive");
        }
        if !(self.l0 < 0.0) || !self.l0.is_finite() {
            return bad("L0", "inlet coordinate must be negative");
        }
        if !(self.l1 > 0.0) || !self.l1.is_finite() {
            return bad("L1", "outlet coordinate must be positive");
        }
        if self.u0 * self.u0 >= self.gamma * self.rho0.powf(self.gamma - 1.0) {
            return bad("u0", "inlet state must be subsonic");
        }
        Ok(())
    }

    pub fn mass_flux(&self) -> f64 {
        self.rho0 * self.u0
    }

    pub fn bernoulli(&self) -> f64 {
        0.5 * self.u0 * self.u0 + self.gamma / (self.gamma - 1.0) * self.rho0.powf(self.gamma - 1.0)
    }
}

/// `c* = γ^{1/(γ+1)} J^{(γ-1)/(γ+1)}`
pub fn sonic_speed(j: f64, gamma: f64) -> f64 {
    (gamma * j.powf(gamma - 1.0)).powf(1.0 / (gamma + 1.0))
}

/// Bracketed Newton: keeps a sign-change bracket and falls back to bisection
/// whenever the Newton step leaves it.
pub(crate) fn safeguarded_newton(
    f: impl Fn(f64) -> (f64, f64),
    a: f64,
    b: f64,
    guess: f64,
    rtol: f64,
) -> Option<f64> {
    let (fa, _) = f(a);
    let (fb, _) = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    // neg has f < 0, pos has f > 0
    let (mut neg, mut pos) = if fa < 0.0 { (a, b) } else { (b, a) };
    let mut x = if (guess - a) * (guess - b) < 0.0 { guess } else { 0.5 * (a + b) };
    for _ in 0..400 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Some(x);
        }
        if fx < 0.0 {
            neg = x;
        } else {
            pos = x;
        }
        let mut next = x - fx / dfx;
        if !next.is_finite() || (next - neg) * (next - pos) >= 0.0 {
            next = 0.5 * (neg + pos);
        }
        let dx = next - x;
        x = next;
        if dx.abs() <= rtol * x.abs() || (pos - neg).abs() <= rtol * x.abs() {
            return Some(x);
        }
    }
    None
}

fn binomial_tail(p: f64, sigma: f64, skip: usize) -> f64 {
    // Σ_{k>skip} C(p,k) σ^{k-skip-1}
    let mut coef = 1.0;
    for k in 1..=skip {
        coef *= (p - k as f64 + 1.0) / k as f64;
    }
    let mut sum = 0.0;
    let mut pw = 1.0;
    for k in skip + 1..skip + 40 {
        coef *= (p - k as f64 + 1.0) / k as f64;
        let term = coef * pw;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        pw *= sigma;
    }
    sum
}

/// Sonic-point thermodynamics for a fixed (γ, J, B₀). The Bernoulli function is
/// `g(t) = ½t² + K t^{1-γ}` with `K = γJ^{γ-1}/(γ-1)`, minimal at `t = c*`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SonicThermo {
    pub gamma: f64,
    pub j: f64,
    pub b0: f64,
    pub c_star: f64,
    pub k: f64,
}

impl SonicThermo {
    pub fn new(gamma: f64, j: f64, b0: f64) -> Self {
        SonicThermo {
            gamma,
            j,
            b0,
            c_star: sonic_speed(j, gamma),
            k: gamma * j.powf(gamma - 1.0) / (gamma - 1.0),
        }
    }

    pub fn from_gas(gas: &GasConfig) -> Self {
        Self::new(gas.gamma, gas.mass_flux(), gas.bernoulli())
    }

    pub fn g(&self, t: f64) -> f64 {
        0.5 * t * t + self.k * t.powf(1.0 - self.gamma)
    }

    pub fn dg(&self, t: f64) -> f64 {
        t - self.gamma * self.j.powf(self.gamma - 1.0) * t.powf(-self.gamma)
    }

    /// `g(c*) = (γ+1)c*² / (2(γ-1))`
    pub fn g_star(&self) -> f64 {
        (self.gamma + 1.0) * self.c_star * self.c_star / (2.0 * (self.gamma - 1.0))
    }

    /// `φ(s) = g(c*+s) - g(c*)`, free of cancellation near s = 0.
    pub fn phi(&self, s: f64) -> f64 {
        let p = 1.0 - self.gamma;
        let sig = s / self.c_star;
        let r = if sig.abs() < 0.1 {
            sig * sig * binomial_tail(p, sig, 1)
        } else {
            (p * sig.ln_1p()).exp_m1() - p * sig
        };
        0.5 * s * s + self.c_star * self.c_star / (self.gamma - 1.0) * r
    }

    /// `φ(s)/s²`, equal to (γ+1)/2 at 0.
    pub fn phi_over_s2(&self, s: f64) -> f64 {
        let p = 1.0 - self.gamma;
        let sig = s / self.c_star;
        let r2 = if sig.abs() < 0.1 {
            binomial_tail(p, sig, 1)
        } else {
            ((p * sig.ln_1p()).exp_m1() - p * sig) / (sig * sig)
        };
        0.5 + r2 / (self.gamma - 1.0)
    }

    /// `φ'(s) = g'(c*+s)`
    pub fn dphi(&self, s: f64) -> f64 {
        let t = self.c_star + s;
        -t * (-(self.gamma + 1.0) * (s / self.c_star).ln_1p()).exp_m1()
    }

    /// `φ'(s)/s`, equal to γ+1 at 0.
    pub fn dphi_over_s(&self, s: f64) -> f64 {
        let sig = s / self.c_star;
        let q = -(self.gamma + 1.0);
        let e = if sig.abs() < 0.1 {
            -binomial_tail(q, sig, 0)
        } else {
            -(q * sig.ln_1p()).exp_m1() / sig
        };
        (1.0 + sig) * e
    }

    /// Solve `φ(s) = p` for `p ≥ 0` on the branch `sign(s) = branch`.
    pub fn solve_branch(&self, p: f64, branch: f64) -> Result<f64> {
        if p < 0.0 {
            return Err(Error::NoRoot(format!("Bernoulli deficit {p:.3e} is negative")));
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        let cs = self.c_star;
        let guess = branch.signum() * (2.0 * p / (self.gamma + 1.0)).sqrt();
        let root = if branch < 0.0 {
            let mut lo = -0.5 * cs;
            let mut tries = 0;
            while self.phi(lo) < p {
                lo = 0.5 * (lo - cs);
                tries += 1;
                if tries > 80 {
                    return Err(Error::NoRoot(format!("no subsonic root for level {p:.3e}")));
                }
            }
            safeguarded_newton(|s| (self.phi(s) - p, self.dphi(s)), lo, 0.0, guess, 1e-15)
        } else {
            let mut hi = cs;
            while self.phi(hi) < p {
                hi *= 2.0;
                if hi > 1e12 * cs {
                    return Err(Error::NoRoot(format!("no supersonic root for level {p:.3e}")));
                }
            }
            safeguarded_newton(|s| (self.phi(s) - p, self.dphi(s)), 0.0, hi, guess, 1e-15)
        };
        root.ok_or_else(|| Error::Convergence(format!("branch root for level {p:.3e}")))
    }

    /// Both roots of `g(t) = level`.
    pub fn roots_at_level(&self, level: f64) -> Result<(f64, f64)> {
        let cs = self.c_star;
        let deficit = level - self.g_star();
        let tol = 4.0 * f64::EPSILON * level.abs().max(1.0);
        if deficit < -tol {
            return Err(Error::NoRoot(format!(
                "level {level} lies below the minimum g(c*) = {}",
                self.g_star()
            )));
        }
        if deficit <= tol {
            return Ok((cs, cs));
        }
        let f = |t: f64| (self.g(t) - level, self.dg(t));
        let mut lo = 0.5 * cs;
        while self.g(lo) < level {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::NoRoot("subsonic root not bracketed".into()));
            }
        }
        let hi = (2.0 * level).sqrt() + cs;
        let t_sub = safeguarded_newton(f, lo, cs, 0.5 * (lo + cs), 1e-16)
            .ok_or_else(|| Error::Convergence("subsonic root".into()))?;
        let t_sup = safeguarded_newton(f, cs, hi, 0.5 * (cs + hi), 1e-16)
            .ok_or_else(|| Error::Convergence("supersonic root".into()))?;
        Ok((t_sub, t_sup))
    }
}

/// Rescale the force amplitude so that `∫_{L0}^0 f̄ = g(c*) - B₀`.
pub fn calibrate_force(shape: &ForceModel, gas: &GasConfig) -> Result<ForceModel> {
    gas.validate()?;
    shape.validate()?;
    shape.check_sign_pattern(gas.l0, gas.l1)?;
    let th = SonicThermo::from_gas(gas);
    let target = th.g_star() - th.b0;
    let current = -shape.primitive(gas.l0);
    if !(current < 0.0) {
        return Err(Error::Infeasible(format!("inlet integral of the force is {current:.3e}, not negative")));
    }
    let factor = target / current;
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::Infeasible(format!("required amplitude factor {factor:.3e}")));
    }
    let mut out = shape.clone();
    if (factor - 1.0).abs() > 1e-13 {
        out.amplitude *= factor;
    }
    Ok(out)
}

/// Relative mismatch of the compatibility integral.
pub fn calibration_error(force: &ForceModel, gas: &GasConfig) -> f64 {
    let th = SonicThermo::from_gas(gas);
    let target = th.g_star() - th.b0;
    (-force.primitive(gas.l0) - target).abs() / target.abs()
}

/// Subsonic and supersonic roots of the Bernoulli relation at `x`.
pub fn bernoulli_roots(x: f64, gas: &GasConfig, force: &ForceModel) -> Result<(f64, f64)> {
    if x == 0.0 {
        return Err(Error::Precondition("Bernoulli roots are requested away from the sonic point".into()));
    }
    let th = SonicThermo::from_gas(gas);
    let level = th.b0 + force.primitive(x) - force.primitive(gas.l0);
    th.roots_at_level(level)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum SonicCase {
    PositiveAccel,
    ZeroAccelSmooth { m: u32 },
    ZeroAccelJump { m: u32 },
    Holder { m: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SonicClassification {
    #[serde(flatten)]
    pub case: SonicCase,
    pub predicted_exponent: f64,
    /// `ū^{(n)}(0)` (right limit) at the leading order n when it is finite.
    pub leading_derivative: Option<f64>,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Classify the sonic point from the vanishing pattern of the force at 0.
pub fn classify_sonic_point(force: &ForceModel, gamma: f64) -> Result<SonicClassification> {
    if let ForceShape::Table { .. } = force.shape {
        if force.assume_positive_accel {
            return Ok(SonicClassification {
                case: SonicCase::PositiveAccel,
                predicted_exponent: 1.0,
                leading_derivative: Some((force.value_over_x(0.0) / (gamma + 1.0)).sqrt()),
            });
        }
        return Err(Error::Unclassifiable(
            "tabulated forces carry no derivatives at 0; set assume_positive_accel".into(),
        ));
    }
    for k in 0..=24usize {
        let (l, r) = force.derivative_at_zero(k).expect("analytic force");
        if l == 0.0 && r == 0.0 {
            continue;
        }
        if l != r {
            if k % 2 == 0 && l < 0.0 && r > 0.0 {
                let m = (k / 2) as u32;
                return Ok(SonicClassification {
                    case: SonicCase::Holder { m },
                    predicted_exponent: m as f64 + 0.5,
                    leading_derivative: None,
                });
            }
            return Err(Error::Unclassifiable(format!("one-sided derivatives of order {k} are {l} and {r}")));
        }
        if r < 0.0 || k % 2 == 0 {
            return Err(Error::Unclassifiable(format!("first non-vanishing derivative has order {k} and value {r}")));
        }
        let g1 = gamma + 1.0;
        if k % 4 == 1 {
            let m = ((k - 1) / 4) as u32;
            let n = 2 * m + 1;
            let lead = factorial(n) * (2.0 * r / (g1 * factorial(4 * m + 2))).sqrt();
            let case = if m == 0 { SonicCase::PositiveAccel } else { SonicCase::ZeroAccelSmooth { m } };
            return Ok(SonicClassification { case, predicted_exponent: n as f64, leading_derivative: Some(lead) });
        }
        let m = ((k + 1) / 4) as u32;
        let lead = factorial(2 * m) * (2.0 / g1 * r / factorial(4 * m)).sqrt();
        return Ok(SonicClassification {
            case: SonicCase::ZeroAccelJump { m },
            predicted_exponent: 2.0 * m as f64,
            leading_derivative: Some(lead),
        });
    }
    Err(Error::Unclassifiable("force vanishes to all checked orders at 0".into()))
}

/// Background state at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointState {
    pub x: f64,
    pub u: f64,
    pub du: f64,
    pub rho: f64,
    pub c2: f64,
    pub k11: f64,
    pub k1: f64,
    pub f: f64,
    /// `∫_{L0}^x f̄`
    pub potential: f64,
}

/// Pointwise evaluator of the background flow for a calibrated force.
#[derive(Debug, Clone, Serialize)]
pub struct Background {
    pub gas: GasConfig,
    pub force: ForceModel,
    pub thermo: SonicThermo,
    pub classification: SonicClassification,
    /// Half-width of the desingularized window around the sonic point.
    pub window: f64,
    /// `ū'(0)` for positive acceleration.
    pub nu: f64,
}

impl Background {
    pub fn new(gas: &GasConfig, force: &ForceModel, window: f64) -> Result<Self> {
        gas.validate()?;
        force.validate()?;
        force.check_sign_pattern(gas.l0, gas.l1)?;
        let err = calibration_error(force, gas);
        if err > 1e-9 {
            return Err(Error::Precondition(format!("force is not calibrated (relative mismatch {err:.3e})")));
        }
        let classification = classify_sonic_point(force, gas.gamma)?;
        let nu = match classification.case {
            SonicCase::PositiveAccel => (force.value_over_x(0.0) / (gas.gamma + 1.0)).sqrt(),
            _ => 0.0,
        };
        Ok(Background { gas: *gas, force: force.clone(), thermo: SonicThermo::from_gas(gas), classification, window, nu })
    }

    pub fn positive(&self) -> bool {
        self.classification.case == SonicCase::PositiveAccel
    }

    /// `ū - c*` by branch root finding (any classification).
    pub fn branch_offset(&self, x: f64) -> Result<f64> {
        let p = self.force.primitive(x);
        if x == 0.0 {
            return Ok(0.0);
        }
        self.thermo.solve_branch(p.max(0.0), x.signum())
    }

    /// Newton on `H(y) = y² (φ/s²)(xy) - P(x)/x²` from `y = ν`.
    fn window_slope(&self, x: f64) -> Result<f64> {
        let target = self.force.primitive_over_x2(x);
        let mut y = self.nu;
        let mut last = f64::INFINITY;
        for _ in 0..60 {
            let s = x * y;
            let h = y * y * self.thermo.phi_over_s2(s) - target;
            let dh = y * self.thermo.dphi_over_s(s);
            let dy = h / dh;
            y -= dy;
            if !(y > 0.0) || !y.is_finite() {
                return Err(Error::NewtonDivergence(format!("slope iterate {y} at x = {x:e}")));
            }
            // steps that stop shrinking near round-off are a limit cycle, not divergence
            if dy.abs() <= 1e-15 * y || (dy.abs() <= 1e-13 * y && dy.abs() >= last) {
                return Ok(y);
            }
            last = dy.abs();
        }
        Err(Error::NewtonDivergence(format!("no convergence at x = {x:e}")))
    }

    /// `(ū - c*, ū')` at x.
    pub fn offset_and_slope(&self, x: f64) -> Result<(f64, f64)> {
        if !self.positive() {
            return Err(Error::ClassificationMismatch(format!(
                "derivatives need positive acceleration, found {:?}",
                self.classification.case
            )));
        }
        if x == 0.0 {
            return Ok((0.0, self.nu));
        }
        if x.abs() < self.window {
            let y = self.window_slope(x)?;
            let s = x * y;
            let du = self.force.value_over_x(x) / (y * self.thermo.dphi_over_s(s));
            return Ok((s, du));
        }
        let s = self.branch_offset(x)?;
        Ok((s, self.force.value(x) / self.thermo.dphi(s)))
    }

    pub fn state(&self, x: f64) -> Result<PointState> {
        let (s, du) = self.offset_and_slope(x)?;
        let th = &self.thermo;
        let g = self.gas.gamma;
        let u = th.c_star + s;
        let sig = s / th.c_star;
        let c2 = th.c_star.powf(g + 1.0) * u.powf(1.0 - g);
        let k11 = -((g + 1.0) * sig.ln_1p()).exp_m1();
        let f = self.force.value(x);
        let k1 = (f - (g + 1.0) * u * du) / c2;
        Ok(PointState {
            x,
            u,
            du,
            rho: th.j / u,
            c2,
            k11,
            k1,
            f,
            potential: self.force.primitive(x) - self.force.primitive(self.gas.l0),
        })
    }

    /// `k̄₁` at the sonic point.
    pub fn sonic_k1(&self) -> f64 {
        -((self.gas.gamma + 1.0) * self.force.value_over_x(0.0)).sqrt() / self.thermo.c_star
    }
}

/// Sampled background flow on a uniform grid.
#[derive(Debug, Clone, Serialize)]
pub struct BackgroundFlow1D {
    pub x1: Vec<f64>,
    pub u_bar: Vec<f64>,
    pub du_bar: Vec<f64>,
    pub rho_bar: Vec<f64>,
    pub c2_bar: Vec<f64>,
    pub k11_bar: Vec<f64>,
    pub k1_bar: Vec<f64>,
    pub force: Vec<f64>,
    pub potential: Vec<f64>,
    #[serde(rename = "J")]
    pub j: f64,
    pub c_star: f64,
    #[serde(rename = "B0")]
    pub b0: f64,
    pub h: f64,
    pub classification: SonicClassification,
    #[serde(skip)]
    pub model: Background,
}

/// Uniform grid of `m` nodes on [a, b].
pub fn uniform_grid(a: f64, b: f64, m: usize) -> Vec<f64> {
    let h = (b - a) / (m - 1) as f64;
    (0..m).map(|i| if i + 1 == m { b } else { a + h * i as f64 }).collect()
}

fn sample(model: &Background, x: &[f64], h: f64) -> Result<BackgroundFlow1D> {
    let states: Vec<PointState> = x.iter().map(|&xi| model.state(xi)).collect::<Result<_>>()?;
    let col = |f: fn(&PointState) -> f64| states.iter().map(f).collect::<Vec<_>>();
    Ok(BackgroundFlow1D {
        x1: x.to_vec(),
        u_bar: col(|s| s.u),
        du_bar: col(|s| s.du),
        rho_bar: col(|s| s.rho),
        c2_bar: col(|s| s.c2),
        k11_bar: col(|s| s.k11),
        k1_bar: col(|s| s.k1),
        force: col(|s| s.f),
        potential: col(|s| s.potential),
        j: model.thermo.j,
        c_star: model.thermo.c_star,
        b0: model.thermo.b0,
        h,
        classification: model.classification,
        model: model.clone(),
    })
}

/// Solve the background on `m` uniform nodes of [L0, L1].
pub fn solve_background(gas: &GasConfig, force: &ForceModel, m: usize) -> Result<BackgroundFlow1D> {
    if m < 5 {
        return Err(Error::Resolution(format!("M={m} background nodes are too few")));
    }
    let h = (gas.l1 - gas.l0) / (m - 1) as f64;
    let model = Background::new(gas, force, 10.0 * h)?;
    if !model.positive() {
        return Err(Error::ClassificationMismatch(format!(
            "grid solve needs positive acceleration, found {:?}",
            model.classification.case
        )));
    }
    sample(&model, &uniform_grid(gas.l0, gas.l1, m), h)
}

impl BackgroundFlow1D {
    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    pub fn mach(&self) -> Vec<f64> {
        self.u_bar.iter().zip(&self.c2_bar).map(|(u, c2)| u / c2.sqrt()).collect()
    }

    pub fn mass_flux_residual(&self) -> f64 {
        self.u_bar
            .iter()
            .zip(&self.rho_bar)
            .map(|(u, r)| (r * u - self.j).abs())
            .fold(0.0, f64::max)
    }

    pub fn bernoulli_residual(&self) -> f64 {
        let g = self.model.gas.gamma;
        (0..self.len())
            .map(|i| {
                let u = self.u_bar[i];
                (0.5 * u * u + g / (g - 1.0) * self.rho_bar[i].powf(g - 1.0) - self.potential[i] - self.b0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn strictly_increasing(&self) -> bool {
        self.u_bar.windows(2).all(|w| w[1] > w[0])
    }

    /// Indices `i` where `k̄₁₁` changes sign between nodes i and i+1 (or vanishes at i).
    pub fn k11_sign_changes(&self) -> Vec<usize> {
        let k = &self.k11_bar;
        let mut out = Vec::new();
        for i in 0..k.len() - 1 {
            if k[i] == 0.0 || (k[i] > 0.0 && k[i + 1] < 0.0) || (k[i] < 0.0 && k[i + 1] > 0.0) {
                out.push(i);
            }
        }
        out
    }

    pub fn dk11(&self) -> Vec<f64> {
        Diff::new(self.len(), self.h, 1).apply(1, &self.k11_bar, 1)
    }
}

/// Margins of the multiplier inequalities for a chosen shift `d0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierCertificate {
    pub d0: f64,
    pub kappa_star: f64,
    pub coercivity_margins: [f64; 4],
    pub multiplier_margins: [f64; 4],
    /// Largest value of `d = 6(x - d0)` on the grid.
    pub d_max: f64,
}

fn coercivity_margin(k1: &[f64], dk11: &[f64], j: usize) -> f64 {
    let c = 2.0 * j as f64 - 1.0;
    k1.iter().zip(dk11).map(|(a, b)| -(2.0 * a + c * b)).fold(f64::INFINITY, f64::min)
}

fn shifted_margin(x: &[f64], k11: &[f64], k1: &[f64], dk11: &[f64], j: usize, d0: f64) -> f64 {
    let jf = j as f64;
    (0..x.len())
        .map(|i| {
            let d = 6.0 * (x[i] - d0);
            (k1[i] + jf * dk11[i]) * d - 0.5 * (dk11[i] * d + 6.0 * k11[i])
        })
        .fold(f64::INFINITY, f64::min)
}

fn certify(
    x: &[f64],
    k11: &[f64],
    k1: &[f64],
    dk11: &[f64],
    j_coercive: usize,
    j_multiplier: usize,
    d0: Option<f64>,
    d_start: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let coercive: Vec<f64> = (0..=j_coercive).map(|j| coercivity_margin(k1, dk11, j)).collect();
    let kappa = coercive.iter().copied().fold(f64::INFINITY, f64::min);
    if !(kappa > 0.0) {
        return Err(Error::NoCertificate(format!("coercivity margin {kappa:.3e} is not positive")));
    }
    let eval = |d0: f64| (0..=j_multiplier).map(|j| shifted_margin(x, k11, k1, dk11, j, d0)).collect::<Vec<_>>();
    let candidates: Vec<f64> = match d0 {
        Some(d) => vec![d],
        None => (1..=200).map(|i| d_start + 0.5 * i as f64).collect(),
    };
    let mut worst = f64::NEG_INFINITY;
    for d in candidates {
        if d <= *x.last().unwrap() {
            return Err(Error::NoCertificate(format!("shift d0 = {d} does not exceed the domain")));
        }
        let multiplier = eval(d);
        let lo = multiplier.iter().copied().fold(f64::INFINITY, f64::min);
        if lo >= 4.0 {
            return Ok((d, coercive, multiplier));
        }
        worst = worst.max(lo);
    }
    Err(Error::NoCertificate(format!("best multiplier margin {worst:.4} stays below 4")))
}

/// Check the multiplier inequalities, searching the shift when none is given.
pub fn verify_multiplier(flow: &BackgroundFlow1D, d0: Option<f64>) -> Result<MultiplierCertificate> {
    if !flow.model.positive() {
        return Err(Error::ClassificationMismatch("multiplier needs positive acceleration".into()));
    }
    let dk11 = flow.dk11();
    let l1 = *flow.x1.last().unwrap();
    let (d0, coercive, multiplier) = certify(&flow.x1, &flow.k11_bar, &flow.k1_bar, &dk11, 3, 3, d0, l1)?;
    Ok(MultiplierCertificate {
        d0,
        kappa_star: coercive.iter().copied().fold(f64::INFINITY, f64::min),
        coercivity_margins: [coercive[0], coercive[1], coercive[2], coercive[3]],
        multiplier_margins: [multiplier[0], multiplier[1], multiplier[2], multiplier[3]],
        d_max: 6.0 * (l1 - d0),
    })
}

/// Background extended to [L0, L2] with the modified coefficients.
#[derive(Debug, Clone, Serialize)]
pub struct ExtendedBackground {
    pub x1: Vec<f64>,
    pub h: f64,
    /// Number of nodes belonging to [L0, L1].
    pub m_inner: usize,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub l: f64,
    pub k0: f64,
    pub d0: f64,
    pub kappa_star: f64,
    pub k11_bar: Vec<f64>,
    pub k1_bar: Vec<f64>,
    pub a11_bar: Vec<f64>,
    pub a1_bar: Vec<f64>,
    pub zeta1: Vec<f64>,
    pub zeta2: Vec<f64>,
    pub extended_coercivity_margins: [f64; 5],
    pub extended_multiplier_margins: [f64; 4],
    pub states: Vec<PointState>,
}

/// Extend the background to `L2 ≈ 2L1` on the same spacing, doubling `k0` from
/// 1 (or from the given value) until the extended multiplier margins hold.
pub fn extend_background(flow: &BackgroundFlow1D, k0: Option<f64>, l: Option<f64>) -> Result<ExtendedBackground> {
    let model = &flow.model;
    if let ForceShape::Table { .. } = model.force.shape {
        return Err(Error::Extension("tabulated forces have no smooth extension beyond L1".into()));
    }
    let cert = verify_multiplier(flow, None)?;
    let m = flow.len();
    let h = flow.h;
    let l1 = model.gas.l1;
    let l = l.unwrap_or(l1 / 20.0);
    let extra = (l1 / h).round() as usize;
    let n = m + extra;
    let x: Vec<f64> = (0..n)
        .map(|i| if i < m { flow.x1[i] } else { l1 + h * (i + 1 - m) as f64 })
        .collect();
    let l2 = x[n - 1];
    for i in 1..=4000 {
        let xi = l2 * i as f64 / 4000.0;
        if model.force.value(xi) <= 0.0 {
            return Err(Error::Extension(format!("force is not positive at x = {xi:.6}")));
        }
    }
    let mut states: Vec<PointState> = Vec::with_capacity(n);
    for (i, &xi) in x.iter().enumerate() {
        if i < m {
            let s = PointState {
                x: xi,
                u: flow.u_bar[i],
                du: flow.du_bar[i],
                rho: flow.rho_bar[i],
                c2: flow.c2_bar[i],
                k11: flow.k11_bar[i],
                k1: flow.k1_bar[i],
                f: flow.force[i],
                potential: flow.potential[i],
            };
            states.push(s);
        } else {
            states.push(model.state(xi).map_err(|e| Error::Extension(e.to_string()))?);
        }
    }
    let k11: Vec<f64> = states.iter().map(|s| s.k11).collect();
    let k1: Vec<f64> = states.iter().map(|s| s.k1).collect();
    let zeta1: Vec<f64> = x.iter().map(|&v| 1.0 - smooth_step((v - (l1 + 2.0 * l)) / (2.0 * l))).collect();
    let zeta2: Vec<f64> = x.iter().map(|&v| 1.0 - smooth_step((v - (l1 + l)) / l)).collect();
    let a11: Vec<f64> = (0..n).map(|i| k11[i] * zeta1[i] + (1.0 - zeta1[i])).collect();
    let da11 = Diff::new(n, h, 1).apply(1, &a11, 1);
    let kappa = cert.kappa_star;
    let mut k0 = k0.unwrap_or(1.0);
    let mut last_err = String::new();
    for _ in 0..40 {
        let a1: Vec<f64> = (0..n).map(|i| k1[i] * zeta2[i] - k0 * (1.0 - zeta2[i])).collect();
        let ext_coercive: Vec<f64> = (0..=4).map(|j| coercivity_margin(&a1, &da11, j)).collect();
        let lo8 = ext_coercive.iter().copied().fold(f64::INFINITY, f64::min);
        if lo8 >= kappa {
            match certify(&x, &a11, &a1, &da11, 4, 3, None, l2) {
                Ok((d0, _, ext_multiplier)) => {
                    return Ok(ExtendedBackground {
                        x1: x,
                        h,
                        m_inner: m,
                        l2,
                        l,
                        k0,
                        d0,
                        kappa_star: kappa,
                        k11_bar: k11,
                        k1_bar: k1,
                        a11_bar: a11,
                        a1_bar: a1,
                        zeta1,
                        zeta2,
                        extended_coercivity_margins: [ext_coercive[0], ext_coercive[1], ext_coercive[2], ext_coercive[3], ext_coercive[4]],
                        extended_multiplier_margins: [ext_multiplier[0], ext_multiplier[1], ext_multiplier[2], ext_multiplier[3]],
                        states,
                    })
                }
                Err(e) => last_err = e.to_string(),
            }
        } else {
            last_err = format!("margin {lo8:.4} below {kappa:.4} at k0 = {k0}");
        }
        k0 *= 2.0;
    }
    Err(Error::NoCertificate(format!("extended margins never held: {last_err}")))
}

/// Least-squares slope of `log|ū - c*|` against `log|x|` over `xs`.
pub fn fit_exponent(model: &Background, xs: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| Ok((x.abs().ln(), model.branch_offset(x)?.abs().ln())))
        .collect::<Result<_>>()?;
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_gas() -> GasConfig {
        GasConfig { gamma: 2.0, rho0: 1.25, u0: 0.8, l0: -1.0, l1: 1.0 }
    }

    #[test]
    fn stable_phi_matches_direct_formula() {
        let th = SonicThermo::new(1.4, 1.3, 5.0);
        for &s in &[-0.5, -0.05, -1e-3, 1e-3, 0.02, 0.3, 2.0] {
            let direct = th.g(th.c_star + s) - th.g(th.c_star);
            assert!((th.phi(s) - direct).abs() < 1e-12 * (1.0 + direct.abs()), "s={s}");
            assert!((th.phi_over_s2(s) - direct / (s * s)).abs() < 1e-7 * th.phi_over_s2(s));
            assert!((th.dphi(s) - th.dg(th.c_star + s)).abs() < 1e-13);
            assert!((th.dphi_over_s(s) - th.dphi(s) / s).abs() < 1e-9 * th.dphi_over_s(s));
        }
        assert!((th.phi_over_s2(0.0) - 1.2).abs() < 1e-15);
        assert!((th.dphi_over_s(0.0) - 2.4).abs() < 1e-14);
    }

    #[test]
    fn regular_k1_agrees_with_quotient_form() {
        let gas = demo_gas();
        let force = calibrate_force(&ForceModel::linear(1.0), &gas).unwrap();
        let bg = Background::new(&gas, &force, 0.05).unwrap();
        for &x in &[-0.9, -0.2, -0.04, 0.03, 0.4, 0.95] {
            let s = bg.state(x).unwrap();
            let q = s.f * (s.c2 + 2.0 * s.u * s.u) / (s.c2 * (s.c2 - s.u * s.u));
            assert!((s.k1 - q).abs() < 1e-8 * q.abs(), "x={x}: {} vs {q}", s.k1);
        }
        let at0 = bg.state(0.0).unwrap().k1;
        assert!((at0 - bg.sonic_k1()).abs() < 1e-12);
        let left = bg.state(-1e-4).unwrap().k1;
        let right = bg.state(1e-4).unwrap().k1;
        assert!((0.5 * (left + right) - at0).abs() < 1e-6);
    }

    #[test]
    fn window_and_branch_solutions_agree() {
        let gas = demo_gas();
        let force = calibrate_force(&ForceModel::linear(1.0), &gas).unwrap();
        let inner = Background::new(&gas, &force, 0.5).unwrap();
        let outer = Background::new(&gas, &force, 0.0).unwrap();
        for &x in &[-0.3, -0.01, 0.002, 0.2] {
            let a = inner.offset_and_slope(x).unwrap();
            let b = outer.offset_and_slope(x).unwrap();
            assert!((a.0 - b.0).abs() < 1e-13, "x={x}");
            assert!((a.1 - b.1).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn classification_patterns() {
        let poly = |c: Vec<f64>| ForceModel::new(ForceShape::Polynomial { coeffs: c });
        let c = classify_sonic_point(&poly(vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]), 2.0).unwrap();
        assert_eq!(c.case, SonicCase::ZeroAccelSmooth { m: 1 });
        assert_eq!(c.predicted_exponent, 3.0);
        // f⁽⁵⁾(0) = 120 so ū'''(0) = 6 √(240 / (3·720))
        assert!((c.leading_derivative.unwrap() - 6.0 * (240.0f64 / 2160.0).sqrt()).abs() < 1e-12);
        let c = classify_sonic_point(&poly(vec![0.0, 0.0, 0.0, 2.0]), 2.0).unwrap();
        assert_eq!(c.case, SonicCase::ZeroAccelJump { m: 1 });
        let jump = ForceModel::new(ForceShape::Piecewise { left: vec![-1.0], right: vec![1.0] });
        assert_eq!(classify_sonic_point(&jump, 2.0).unwrap().case, SonicCase::Holder { m: 0 });
        assert!(classify_sonic_point(&poly(vec![0.0, 0.0, 1.0]), 2.0).is_err());
        let table = ForceModel::new(ForceShape::Table { x: vec![-1.0, 1.0], f: vec![-1.0, 1.0] });
        assert!(classify_sonic_point(&table, 2.0).is_err());
    }

    #[test]
    fn gas_validation() {
        let mut g = demo_gas();
        assert!(g.validate().is_ok());
        g.gamma = 0.9;
        assert!(g.validate().unwrap_err().to_string().contains("gamma must exceed 1"));
        let mut g = demo_gas();
        g.u0 = 3.0;
        assert!(g.validate().is_err());
    }
}
