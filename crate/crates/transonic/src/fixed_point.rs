//! Nonlinear solution map: inlet data, frozen coefficients from the current
//! iterate, Picard iteration, sonic front and ε-scaling diagnostics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::{verify_multiplier, BackgroundFlow1D, MultiplierCertificate};
use crate::basis::RadialBasis;
use crate::error::{Error, Result};
use crate::fd::{fornberg, smooth_step_derivs};
use crate::field::{Field2D, Jet};
use crate::linear::{solve_linear, CoefficientSet, CompatibilityFlags, LinearOptions, SigmaSchedule};
use crate::norms::{norms_from_jet, weighted_norms, GridMeasure, NormReport};

/// Radial inlet profile `h₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InletProfile {
    Zero,
    /// `amplitude · r (1 - (r/R)²)⁴` for `r < R = 1 - β₀`, zero beyond.
    Bump { amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InletData {
    pub eps: f64,
    pub beta0: f64,
    pub profile: InletProfile,
}

impl InletData {
    pub fn new(eps: f64, beta0: f64, profile: InletProfile) -> Result<Self> {
        let inlet = InletData { eps, beta0, profile };
        inlet.validate()?;
        Ok(inlet)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::Compatibility(format!("eps = {} must be finite and non-negative", self.eps)));
        }
        if !(self.beta0 > 0.0 && self.beta0 < 1.0) {
            return Err(Error::Compatibility(format!("beta0 = {} must lie in (0, 1)", self.beta0)));
        }
        if let InletProfile::Bump { amplitude } = self.profile {
            if !amplitude.is_finite() {
                return Err(Error::Compatibility("bump amplitude must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        InletData { eps, ..*self }
    }

    fn radius(&self) -> f64 {
        1.0 - self.beta0
    }

    /// `(h₁, h₁′, h₁/r, ∫₀ʳ h₁)` at r.
    pub fn profile_at(&self, r: f64) -> [f64; 4] {
        match self.profile {
            InletProfile::Zero => [0.0; 4],
            InletProfile::Bump { amplitude } => {
                let big = self.radius();
                let top = amplitude * big * big / 10.0;
                if r >= big {
                    return [0.0, 0.0, 0.0, top];
                }
                let u = (r / big).powi(2);
                let w = 1.0 - u;
                let w3 = w * w * w;
                [
                    amplitude * r * w3 * w,
                    amplitude * (w3 * w - 8.0 * u * w3),
                    amplitude * w3 * w,
                    top * (1.0 - w3 * w * w),
                ]
            }
        }
    }
}

/// `η₀` and its first two derivatives: 1 up to 15L₀/16, 0 from 7L₀/8 on,
/// infinitely smooth in between.
pub fn eta0(x: f64, l0: f64) -> [f64; 3] {
    let (a, b) = (15.0 * l0 / 16.0, 7.0 * l0 / 8.0);
    let w = b - a;
    let s = smooth_step_derivs((x - a) / w);
    [1.0 - s[0], -s[1] / w, -s[2] / (w * w)]
}

/// `ψ₀ = η₀(x₁) ∫₀ʳ h₁` with exact nodal derivatives (layout `i * Q + q`).
#[derive(Debug, Clone)]
pub struct Psi0 {
    pub field: Field2D,
    pub value: Vec<f64>,
    pub dx: Vec<f64>,
    pub dxx: Vec<f64>,
    pub dr: Vec<f64>,
    pub drr: Vec<f64>,
    pub dxr: Vec<f64>,
    /// `(∂ᵣ² + ∂ᵣ/r) ψ₀`
    pub radial_laplacian: Vec<f64>,
    /// `∂ᵣ(∂ᵣψ₀/r)`, finite on the axis.
    pub dr_over_r: Vec<f64>,
}

pub fn build_psi0(inlet: &InletData, flow: &BackgroundFlow1D, basis: &RadialBasis) -> Result<Psi0> {
    inlet.validate()?;
    let (m, q) = (flow.len(), basis.q());
    let l0 = flow.x1[0];
    let mut out = Psi0 {
        field: Field2D::zeros(l0, flow.h, m, basis.n),
        value: vec![0.0; m * q],
        dx: vec![0.0; m * q],
        dxx: vec![0.0; m * q],
        dr: vec![0.0; m * q],
        drr: vec![0.0; m * q],
        dxr: vec![0.0; m * q],
        radial_laplacian: vec![0.0; m * q],
        dr_over_r: vec![0.0; m * q],
    };
    let radial: Vec<[f64; 4]> = basis.quad.nodes.iter().map(|&r| inlet.profile_at(r)).collect();
    for (i, &x) in flow.x1.iter().enumerate() {
        let e = eta0(x, l0);
        for (p, rad) in radial.iter().enumerate() {
            let [h1, dh1, h1r, big_h] = *rad;
            let r = basis.quad.nodes[p];
            let k = i * q + p;
            out.value[k] = e[0] * big_h;
            out.dx[k] = e[1] * big_h;
            out.dxx[k] = e[2] * big_h;
            out.dr[k] = e[0] * h1;
            out.drr[k] = e[0] * dh1;
            out.dxr[k] = e[1] * h1;
            out.radial_laplacian[k] = e[0] * (dh1 + h1r);
            out.dr_over_r[k] = e[0] * (dh1 - h1r) / r;
        }
    }
    for i in 0..m {
        let a = basis.project(&out.value[i * q..(i + 1) * q])?;
        out.field.coeffs[i * basis.n..(i + 1) * basis.n].copy_from_slice(&a);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointParams {
    /// Radius of the admissible ball; `√ε` when absent.
    pub delta0: Option<f64>,
    pub tol_fp: f64,
    pub max_iter: usize,
    pub damping: f64,
    /// Largest ε for which the map is expected to contract.
    pub eps_max: f64,
    pub schedule: SigmaSchedule,
}

impl Default for FixedPointParams {
    fn default() -> Self {
        FixedPointParams {
            delta0: None,
            tol_fp: 1e-10,
            max_iter: 20,
            damping: 1.0,
            eps_max: 1e-2,
            schedule: SigmaSchedule::default(),
        }
    }
}

impl FixedPointParams {
    pub fn delta0_for(&self, eps: f64) -> f64 {
        self.delta0.unwrap_or_else(|| eps.sqrt())
    }
}

/// Pointwise gradient data of `ψ₁ = ψ + εψ₀` on the grid.
struct Gradients {
    px: Vec<f64>,
    pr: Vec<f64>,
    pxx: Vec<f64>,
    pxr: Vec<f64>,
    prr: Vec<f64>,
}

fn total_gradients(jet: &Jet, psi0: &Psi0, eps: f64) -> Gradients {
    let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u + eps * v).collect::<Vec<_>>();
    Gradients {
        px: add(jet.f(1, 0), &psi0.dx),
        pr: add(jet.f(0, 1), &psi0.dr),
        pxx: add(jet.f(2, 0), &psi0.dxx),
        pxr: add(jet.f(1, 1), &psi0.dxr),
        prr: add(jet.f(0, 2), &psi0.drr),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDiagnostics {
    pub h4: f64,
    pub min_denominator: f64,
    pub compatibility: CompatibilityFlags,
}

/// Frozen coefficients and source for the iterate `ψ̂`.
pub fn coefficients_from_state(
    psi_hat: &Field2D,
    psi0: &Psi0,
    eps: f64,
    delta0: f64,
    flow: &BackgroundFlow1D,
    basis: &RadialBasis,
) -> Result<(CoefficientSet, StateDiagnostics)> {
    let jet = Jet::from_field(psi_hat, basis, 4)?;
    let measure = GridMeasure::new(psi_hat.m, psi_hat.h, basis);
    let h4 = norms_from_jet(&jet, &measure, 4).norms[4];
    if h4 > delta0 {
        return Err(Error::GateViolation(format!("|psi|_H4 = {h4:.4e} exceeds delta0 = {delta0:.4e}")));
    }
    let g = total_gradients(&jet, psi0, eps);
    let gamma = flow.model.gas.gamma;
    let (m, q) = (flow.len(), basis.q());
    let mut c = CoefficientSet {
        x0: flow.x1[0],
        h: flow.h,
        m,
        q,
        k11: vec![0.0; m * q],
        k12: vec![0.0; m * q],
        k1: vec![0.0; m * q],
        k2: vec![0.0; m * q],
        f0: vec![0.0; m * q],
        dr_k12: Some(vec![0.0; m * q]),
    };
    let mut min_den = f64::INFINITY;
    for i in 0..m {
        let (u, du) = (flow.u_bar[i], flow.du_bar[i]);
        // f - (γ+1) ū ū′, in its regular form through the sonic point
        let accel = flow.k1_bar[i] * flow.c2_bar[i];
        let floor = 0.5 * flow.c2_bar[i];
        for p in 0..q {
            let k = i * q + p;
            let r = basis.quad.nodes[p];
            let (px, pr) = (g.px[k], g.pr[k]);
            let big_u = u + px;
            let c2 = (gamma - 1.0) * (flow.b0 + flow.potential[i] - 0.5 * (big_u * big_u + pr * pr));
            let den = c2 - pr * pr;
            min_den = min_den.min(den);
            if !(den >= floor) {
                return Err(Error::DenominatorDegeneracy(format!(
                    "c^2 - u_r^2 = {den:.4e} at x1 = {:.4}, r = {r:.4}",
                    flow.x1[i]
                )));
            }
            let k11 = (c2 - big_u * big_u) / den;
            let k12 = -big_u * pr / den;
            let k1 = accel / den;
            let k2 = pr * pr / (r * den);
            let force = du / den * (0.5 * (gamma + 1.0) * px * px + 0.5 * (gamma - 1.0) * pr * pr);
            let source = -eps
                * (k11 * psi0.dxx[k]
                    + k1 * psi0.dx[k]
                    + 2.0 * k12 * psi0.dxr[k]
                    + k2 * psi0.dr[k]
                    + psi0.radial_laplacian[k]);
            let (ur, qr) = (g.pxr[k], g.prr[k]);
            let dc2 = -(gamma - 1.0) * (big_u * ur + pr * qr);
            let dden = dc2 - 2.0 * pr * qr;
            c.k11[k] = k11;
            c.k12[k] = k12;
            c.k1[k] = k1;
            c.k2[k] = k2;
            c.f0[k] = force + source;
            c.dr_k12.as_mut().unwrap()[k] = -(ur * pr + big_u * qr) / den + big_u * pr * dden / (den * den);
        }
    }
    let compatibility = c.compatibility(basis);
    Ok((c, StateDiagnostics { h4, min_denominator: min_den, compatibility }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub increment_h1: f64,
    pub ratio: Option<f64>,
    pub h4: f64,
    pub damping: f64,
    pub sigma_levels: usize,
    pub sigma_converged: bool,
    pub energy_ratio: f64,
    pub compatibility_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearResidual {
    /// Pointwise residual of the full potential equation on interior nodes.
    pub l2r: f64,
    pub max: f64,
    /// Residual projected on the radial modes in use.
    pub projected_l2r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCheck {
    /// `max |ψ(L0, r)|`
    pub inlet_value: f64,
    /// `max |∂ᵣψ₁(L0, r) - ε h₁(r)|` over quadrature nodes.
    pub inlet_slope: f64,
    /// `max |∂ᵣψ|` at r = 0 and r = 1 over the grid.
    pub axis_slope: f64,
    pub wall_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SonicFront {
    pub r: Vec<f64>,
    pub xi: Vec<f64>,
    pub dxi: Vec<f64>,
    pub c1_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub eps: f64,
    pub delta0: f64,
    pub converged: bool,
    pub iterations: Vec<IterationRecord>,
    pub max_ratio: f64,
    /// Norms of `φ - φ̄ = ψ₁`.
    pub perturbation: NormReport,
    /// Norms of `ψ = ψ₁ - εψ₀`.
    pub psi: NormReport,
    /// `‖ψ - 𝒯ψ‖_{H¹ᵣ}` at the returned iterate.
    pub fixed_point_defect: f64,
    pub residual: NonlinearResidual,
    pub boundary: BoundaryCheck,
    pub front: SonicFront,
    pub certificate: MultiplierCertificate,
    pub energy_ratio: f64,
    pub multiplier_margin: Option<f64>,
    pub compatibility: CompatibilityFlags,
}

#[derive(Debug, Clone)]
pub struct FixedPointSolution {
    pub psi: Field2D,
    pub psi1: Field2D,
    pub psi0: Psi0,
    pub report: SolveReport,
}

/// Apply 𝒯 once: coefficients frozen at `psi_hat`, then the linear solve.
fn apply_map(
    psi_hat: &Field2D,
    psi0: &Psi0,
    inlet: &InletData,
    delta0: f64,
    flow: &BackgroundFlow1D,
    basis: &RadialBasis,
    params: &FixedPointParams,
    d0: f64,
) -> Result<(Field2D, StateDiagnostics, crate::linear::LinearReport)> {
    let (coeffs, diag) = coefficients_from_state(psi_hat, psi0, inlet.eps, delta0, flow, basis)?;
    let options = LinearOptions { d0: Some(d0), ..LinearOptions::default() };
    // ψ is as small as the data, so the σ-change test is taken relative to ‖F0‖
    let f0 = GridMeasure::new(coeffs.m, coeffs.h, basis).sq(&coeffs.f0).sqrt();
    let schedule = SigmaSchedule { tol: params.schedule.tol * f0.clamp(f64::MIN_POSITIVE, 1.0), ..params.schedule };
    let sol = solve_linear(&coeffs, basis, &schedule, &options)?;
    Ok((sol.field, diag, sol.report))
}

/// Picard iteration `ψ^{k+1} = ψ^k + θ(𝒯ψ^k - ψ^k)` from `ψ^0 = 0`.
pub fn fixed_point_solve(
    inlet: &InletData,
    flow: &BackgroundFlow1D,
    basis: &RadialBasis,
    params: &FixedPointParams,
) -> Result<FixedPointSolution> {
    inlet.validate()?;
    if inlet.eps > params.eps_max {
        return Err(Error::NoContraction(format!(
            "eps = {:e} exceeds eps_max = {:e}; contraction is only expected for small eps",
            inlet.eps, params.eps_max
        )));
    }
    if !(params.damping > 0.0 && params.damping <= 1.0) {
        return Err(Error::Precondition(format!("damping = {} must lie in (0, 1]", params.damping)));
    }
    let certificate = verify_multiplier(flow, None)?;
    let psi0 = build_psi0(inlet, flow, basis)?;
    let delta0 = params.delta0_for(inlet.eps);
    let mut psi = Field2D::zeros(flow.x1[0], flow.h, flow.len(), basis.n);
    let mut damping = params.damping;
    let mut halved = false;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut streak = 0;
    let mut converged = false;
    for it in 1..=params.max_iter {
        let (image, diag, lin) = apply_map(&psi, &psi0, inlet, delta0, flow, basis, params, certificate.d0)?;
        let next = psi.axpy(damping, &image.axpy(-1.0, &psi)?)?;
        let increment = weighted_norms(&next.axpy(-1.0, &psi)?, basis, 1)?.h1r();
        let h4 = weighted_norms(&next, basis, 4)?.norms[4];
        if h4 > delta0 {
            return Err(Error::GateViolation(format!(
                "iterate {it}: |psi|_H4 = {h4:.4e} exceeds delta0 = {delta0:.4e}"
            )));
        }
        let ratio = records
            .last()
            .filter(|r| r.increment_h1 > 0.0)
            .map(|r| increment / r.increment_h1);
        records.push(IterationRecord {
            iteration: it,
            increment_h1: increment,
            ratio,
            h4,
            damping,
            sigma_levels: lin.sigmas.len(),
            sigma_converged: lin.converged,
            energy_ratio: lin.energy_ratio,
            compatibility_ok: diag.compatibility.edges_ok,
        });
        psi = next;
        if increment < params.tol_fp {
            converged = true;
            break;
        }
        streak = if ratio.is_some_and(|r| r >= 1.0) { streak + 1 } else { 0 };
        if streak >= 3 {
            if halved {
                return Err(Error::NoContraction(format!(
                    "increment ratios {:?} at damping {damping}",
                    records.iter().rev().take(3).filter_map(|r| r.ratio).collect::<Vec<_>>()
                )));
            }
            halved = true;
            damping *= 0.5;
            streak = 0;
        }
    }
    if !converged {
        return Err(Error::NoContraction(format!(
            "no convergence in {} iterations, last increment {:.3e}",
            params.max_iter,
            records.last().map_or(f64::NAN, |r| r.increment_h1)
        )));
    }
    let (image, diag, lin) = apply_map(&psi, &psi0, inlet, delta0, flow, basis, params, certificate.d0)?;
    let fixed_point_defect = weighted_norms(&image.axpy(-1.0, &psi)?, basis, 1)?.h1r();
    let psi1 = psi.axpy(inlet.eps, &psi0.field)?;
    let residual = nonlinear_residual(&psi, &psi0, inlet.eps, flow, basis)?;
    let front = sonic_front(&psi, &psi0, inlet.eps, flow, basis)?;
    let boundary = boundary_check(&psi, &psi0, inlet, basis);
    let max_ratio = records.iter().filter_map(|r| r.ratio).fold(0.0, f64::max);
    let report = SolveReport {
        eps: inlet.eps,
        delta0,
        converged,
        iterations: records,
        max_ratio,
        perturbation: weighted_norms(&psi1, basis, 4)?,
        psi: weighted_norms(&psi, basis, 4)?,
        fixed_point_defect,
        residual,
        boundary,
        front,
        certificate,
        energy_ratio: lin.energy_ratio,
        multiplier_margin: lin.multiplier_margin,
        compatibility: diag.compatibility,
    };
    Ok(FixedPointSolution { psi, psi1, psi0, report })
}

fn boundary_check(psi: &Field2D, psi0: &Psi0, inlet: &InletData, basis: &RadialBasis) -> BoundaryCheck {
    let n = basis.n;
    let q = basis.q();
    let inlet_value = psi.node(0).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let dr_inlet = crate::field::synthesize(psi.node(0), 1, basis, &basis.db);
    let inlet_slope = (0..q)
        .map(|p| {
            let want = inlet.eps * inlet.profile_at(basis.quad.nodes[p])[0];
            (dr_inlet[p] + inlet.eps * psi0.dr[p] - want).abs()
        })
        .fold(0.0, f64::max);
    let ends: Vec<(f64, f64)> = (0..n).map(|j| (basis.eval(j, 0.0).1, basis.eval(j, 1.0).1)).collect();
    let (mut axis, mut wall) = (0.0f64, 0.0f64);
    for i in 0..psi.m {
        let a = psi.node(i);
        axis = axis.max(a.iter().zip(&ends).map(|(c, e)| c * e.0).sum::<f64>().abs());
        wall = wall.max(a.iter().zip(&ends).map(|(c, e)| c * e.1).sum::<f64>().abs());
    }
    BoundaryCheck { inlet_value, inlet_slope, axis_slope: axis, wall_slope: wall }
}

/// Residual of the full potential equation for `φ = φ̄ + ψ + εψ₀`.
pub fn nonlinear_residual(
    psi: &Field2D,
    psi0: &Psi0,
    eps: f64,
    flow: &BackgroundFlow1D,
    basis: &RadialBasis,
) -> Result<NonlinearResidual> {
    let jet = Jet::from_field(psi, basis, 2)?;
    let g = total_gradients(&jet, psi0, eps);
    let lap_psi: Vec<f64> = jet.f(0, 2).iter().zip(jet.g1(0, 0)).map(|(a, b)| a + b).collect();
    let gamma = flow.model.gas.gamma;
    let (m, q) = (flow.len(), basis.q());
    let mut res = vec![0.0; m * q];
    for i in 0..m {
        for p in 0..q {
            let k = i * q + p;
            let ux = flow.u_bar[i] + g.px[k];
            let ur = g.pr[k];
            let uxx = flow.du_bar[i] + g.pxx[k];
            let c2 = (gamma - 1.0) * (flow.b0 + flow.potential[i] - 0.5 * (ux * ux + ur * ur));
            let lap = lap_psi[k] + eps * psi0.radial_laplacian[k];
            // (c²-φᵣ²)φᵣᵣ + c²φᵣ/r = c² Δᵣφ - φᵣ² φᵣᵣ
            res[k] = (c2 - ux * ux) * uxx + c2 * lap - ur * ur * g.prr[k] - 2.0 * ux * ur * g.pxr[k]
                + flow.force[i] * ux;
        }
    }
    let interior = 2..m.saturating_sub(2);
    let mut sq = 0.0;
    let mut max = 0.0f64;
    let mut projected = 0.0;
    for i in interior {
        let row = &res[i * q..(i + 1) * q];
        sq += flow.h * basis.quad.sum(&row.iter().map(|v| v * v).collect::<Vec<_>>());
        max = row.iter().fold(max, |a, v| a.max(v.abs()));
        projected += flow.h * basis.project(row)?.iter().map(|a| a * a).sum::<f64>();
    }
    Ok(NonlinearResidual { l2r: sq.sqrt(), max, projected_l2r: projected.sqrt() })
}

/// Sonic front `x₁ = ξ(r)` where `c²(ρ) = |∇φ|²`, per quadrature node.
pub fn sonic_front(
    psi: &Field2D,
    psi0: &Psi0,
    eps: f64,
    flow: &BackgroundFlow1D,
    basis: &RadialBasis,
) -> Result<SonicFront> {
    let jet = Jet::from_field(psi, basis, 1)?;
    let g = total_gradients_first(&jet, psi0, eps);
    let (m, q) = (flow.len(), basis.q());
    let model = &flow.model;
    let gamma = model.gas.gamma;
    let indicator = |x: f64, px: f64, pr: f64| -> Result<f64> {
        let st = model.state(x)?;
        let ux = st.u + px;
        let c2 = (gamma - 1.0) * (flow.b0 + st.potential - 0.5 * (ux * ux + pr * pr));
        Ok(c2 - ux * ux - pr * pr)
    };
    let xi: Vec<f64> = (0..q)
        .into_par_iter()
        .map(|p| -> Result<f64> {
            let col = |v: &[f64]| (0..m).map(|i| v[i * q + p]).collect::<Vec<f64>>();
            let (cx, cr) = (col(&g.0), col(&g.1));
            let nodal: Vec<f64> =
                (0..m).map(|i| indicator(flow.x1[i], cx[i], cr[i])).collect::<Result<_>>()?;
            let cells: Vec<usize> = (0..m - 1).filter(|&i| (nodal[i] > 0.0) != (nodal[i + 1] > 0.0)).collect();
            if cells.len() != 1 {
                return Err(Error::MultipleCrossings(format!(
                    "{} sign changes at r = {:.4}",
                    cells.len(),
                    basis.quad.nodes[p]
                )));
            }
            let c = cells[0];
            let base = c.saturating_sub(1).min(m - 4);
            let stencil: Vec<f64> = (base..base + 4).map(|i| flow.x1[i]).collect();
            let at = |x: f64| -> Result<f64> {
                let w = &fornberg(x, &stencil, 0)[0];
                let px: f64 = w.iter().zip(&cx[base..base + 4]).map(|(a, b)| a * b).sum();
                let pr: f64 = w.iter().zip(&cr[base..base + 4]).map(|(a, b)| a * b).sum();
                indicator(x, px, pr)
            };
            let (mut a, mut b) = (flow.x1[c], flow.x1[c + 1]);
            let mut fa = at(a)?;
            while b - a > 1e-13 {
                let mid = 0.5 * (a + b);
                let fm = at(mid)?;
                if fm == 0.0 {
                    return Ok(mid);
                }
                if (fm > 0.0) == (fa > 0.0) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            Ok(0.5 * (a + b))
        })
        .collect::<Result<_>>()?;
    let r = basis.quad.nodes.clone();
    let dxi: Vec<f64> = (0..q)
        .map(|p| {
            let idx: Vec<usize> = if p == 0 {
                vec![0, 1, 2]
            } else if p == q - 1 {
                vec![q - 3, q - 2, q - 1]
            } else {
                vec![p - 1, p, p + 1]
            };
            let nodes: Vec<f64> = idx.iter().map(|&k| r[k]).collect();
            let w = &fornberg(r[p], &nodes, 1)[1];
            idx.iter().zip(w).map(|(&k, c)| c * xi[k]).sum()
        })
        .collect();
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let c1_norm = sup(&xi) + sup(&dxi);
    Ok(SonicFront { r, xi, dxi, c1_norm })
}

fn total_gradients_first(jet: &Jet, psi0: &Psi0, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u + eps * v).collect::<Vec<_>>();
    (add(jet.f(1, 0), &psi0.dx), add(jet.f(0, 1), &psi0.dr))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub eps: f64,
    pub h2: f64,
    pub h4: f64,
    pub c1_norm: f64,
    pub iterations: usize,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of log ‖φ-φ̄‖_{H²ᵣ} against log ε (ε > 0 rows).
    pub slope_h2: f64,
    pub slope_h4: f64,
    pub slope_front: f64,
}

fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = pts.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Solve for every ε in the list (concurrently) and fit the scaling slopes.
pub fn perturbation_scaling_study(
    template: &InletData,
    eps_list: &[f64],
    flow: &BackgroundFlow1D,
    basis: &RadialBasis,
    params: &FixedPointParams,
) -> Result<ScalingStudy> {
    let rows: Vec<ScalingRow> = eps_list
        .par_iter()
        .map(|&eps| {
            let sol = fixed_point_solve(&template.with_eps(eps), flow, basis, params)?;
            let rep = &sol.report;
            Ok(ScalingRow {
                eps,
                h2: rep.perturbation.norms[2],
                h4: rep.perturbation.norms[4],
                c1_norm: rep.front.c1_norm,
                iterations: rep.iterations.len(),
                max_ratio: rep.max_ratio,
            })
        })
        .collect::<Result<_>>()?;
    let pick = |f: fn(&ScalingRow) -> f64| rows.iter().map(|r| (r.eps, f(r))).collect::<Vec<_>>();
    Ok(ScalingStudy {
        slope_h2: loglog_slope(&pick(|r| r.h2)),
        slope_h4: loglog_slope(&pick(|r| r.h4)),
        slope_front: loglog_slope(&pick(|r| r.c1_norm)),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;

    #[test]
    fn bump_profile_compatibility() {
        let inlet = InletData::new(1e-3, 0.2, InletProfile::Bump { amplitude: 1.0 }).unwrap();
        let [h0, _, _, _] = inlet.profile_at(0.0);
        assert_eq!(h0, 0.0);
        // h₁ is odd in r, so h₁″(0) = 0; check by a symmetric difference
        let d = 1e-5;
        let second = (inlet.profile_at(2.0 * d)[0] - 2.0 * inlet.profile_at(d)[0]) / (d * d);
        assert!(second.abs() < 1e-2);
        assert_eq!(inlet.profile_at(0.85), [0.0, 0.0, 0.0, 0.8 * 0.8 / 10.0]);
        let (t, w) = gauss_legendre(40);
        for r in [0.1, 0.37, 0.79] {
            let integral: f64 = t.iter().zip(&w).map(|(s, wi)| 0.5 * r * wi * inlet.profile_at(0.5 * r * (s + 1.0))[0]).sum();
            assert!((integral - inlet.profile_at(r)[3]).abs() < 1e-13);
        }
    }

    #[test]
    fn eta_supports() {
        let l0 = -1.0;
        assert_eq!(eta0(-1.0, l0), [1.0, 0.0, 0.0]);
        assert_eq!(eta0(15.0 * l0 / 16.0, l0)[0], 1.0);
        assert_eq!(eta0(7.0 * l0 / 8.0, l0), [0.0, 0.0, 0.0]);
        let x = -0.9;
        let fd = (eta0(x + 1e-6, l0)[0] - eta0(x - 1e-6, l0)[0]) / 2e-6;
        assert!((fd - eta0(x, l0)[1]).abs() < 1e-6);
        assert!(eta0(x, l0)[1] < 0.0);
    }

    #[test]
    fn log_slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1e-3, 5e-4, 2.5e-4].iter().map(|&e| (e, 3.0 * e)).collect();
        assert!((loglog_slope(&pts) - 1.0).abs() < 1e-12);
    }
}
