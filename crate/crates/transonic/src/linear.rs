//! Galerkin–σ solver for the linearized mixed-type equation
//!
//! `k11 ψₓₓ + 2k12 ψₓᵣ + ψᵣᵣ + ψᵣ/r + k1 ψₓ + k2 ψᵣ = F0`
//!
//! in `(L0, L1) × (0, 1)` with `ψ(L0, ·) = 0` and Neumann conditions in r.
//! Each radial mode `A_j(x₁)` satisfies an ODE system that is regularized by
//! `σ A‴` and solved with one banded LU per σ level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::{BackgroundFlow1D, ExtendedBackground};
use crate::banded::{solve_refined, BandMatrix};
use crate::basis::RadialBasis;
use crate::error::{Error, Result};
use crate::fd::{fornberg, Diff};
use crate::field::Field2D;
use crate::norms::{weighted_norms, GridMeasure};

/// Coefficient fields sampled on the x₁ grid times the radial quadrature nodes
/// (layout `i * Q + q`).
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub x0: f64,
    pub h: f64,
    pub m: usize,
    pub q: usize,
    pub k11: Vec<f64>,
    pub k12: Vec<f64>,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub f0: Vec<f64>,
    /// `∂ᵣk12`, when the producer knows it.
    pub dr_k12: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityFlags {
    pub k12_edges: f64,
    pub k2_edges: f64,
    pub dr_k11_edges: f64,
    pub dr_k1_edges: f64,
    pub dr_f0_edges: f64,
    pub tolerance: f64,
    pub edges_ok: bool,
    /// `k11 > 0` at the inlet and `< 0` at the outlet.
    pub transonic: bool,
}

impl CoefficientSet {
    pub fn from_profiles(
        x: &[f64],
        h: f64,
        basis: &RadialBasis,
        k11: impl Fn(usize) -> f64,
        k1: impl Fn(usize) -> f64,
        f0: Vec<f64>,
    ) -> Result<Self> {
        let m = x.len();
        let q = basis.q();
        if f0.len() != m * q {
            return Err(Error::Dimension(format!("F0 has {} samples, expected {}", f0.len(), m * q)));
        }
        let spread = |f: &dyn Fn(usize) -> f64| (0..m * q).map(|k| f(k / q)).collect::<Vec<_>>();
        Ok(CoefficientSet {
            x0: x[0],
            h,
            m,
            q,
            k11: spread(&k11),
            k12: vec![0.0; m * q],
            k1: spread(&k1),
            k2: vec![0.0; m * q],
            f0,
            dr_k12: None,
        })
    }

    /// Frozen background coefficients with a zero source.
    pub fn background(flow: &BackgroundFlow1D, basis: &RadialBasis) -> Self {
        let zero = vec![0.0; flow.len() * basis.q()];
        Self::from_profiles(&flow.x1, flow.h, basis, |i| flow.k11_bar[i], |i| flow.k1_bar[i], zero)
            .expect("sizes agree")
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + self.h * i as f64
    }

    /// Discrete boundary compatibilities at r = 0 and r = 1, by polynomial
    /// extrapolation from the six quadrature nodes nearest each end.
    pub fn compatibility(&self, basis: &RadialBasis) -> CompatibilityFlags {
        let q = self.q;
        let nodes = &basis.quad.nodes;
        let k = 6.min(q);
        let ends = [(0.0, 0..k), (1.0, q - k..q)];
        let weights: Vec<(std::ops::Range<usize>, Vec<Vec<f64>>)> = ends
            .iter()
            .map(|(z, r)| (r.clone(), fornberg(*z, &nodes[r.clone()], 1)))
            .collect();
        let edge = |field: &[f64], deriv: usize| -> (f64, f64) {
            let mut worst: f64 = 0.0;
            for i in 0..self.m {
                for (range, w) in &weights {
                    let v: f64 = range.clone().zip(&w[deriv]).map(|(p, c)| c * field[i * q + p]).sum();
                    worst = worst.max(v.abs());
                }
            }
            let scale = field.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
            (worst, scale)
        };
        let checks = [
            edge(&self.k12, 0),
            edge(&self.k2, 0),
            edge(&self.k11, 1),
            edge(&self.k1, 1),
            edge(&self.f0, 1),
        ];
        let tolerance = 1e-8;
        let edges_ok = checks.iter().all(|(v, s)| *v <= tolerance * s);
        let k11_at = |i: usize| (0..q).map(|p| self.k11[i * q + p]).sum::<f64>() / q as f64;
        CompatibilityFlags {
            k12_edges: checks[0].0,
            k2_edges: checks[1].0,
            dr_k11_edges: checks[2].0,
            dr_k1_edges: checks[3].0,
            dr_f0_edges: checks[4].0,
            tolerance,
            edges_ok,
            transonic: k11_at(0) > 0.0 && k11_at(self.m - 1) < 0.0,
        }
    }
}

/// Per-node Galerkin matrices; `a[i][m*N + j]` couples mode j into equation m.
#[derive(Debug, Clone)]
pub struct GalerkinMatrices {
    pub m: usize,
    pub n: usize,
    pub h: f64,
    pub x0: f64,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
}

pub fn galerkin_matrices(coeffs: &CoefficientSet, basis: &RadialBasis) -> Result<GalerkinMatrices> {
    let q = basis.q();
    if coeffs.q != q {
        return Err(Error::Dimension(format!("coefficients on {} radial nodes, basis has {q}", coeffs.q)));
    }
    let n = basis.n;
    let w = &basis.quad.weights;
    let per_node: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = (0..coeffs.m)
        .into_par_iter()
        .map(|i| {
            let at = |v: &[f64], p: usize| v[i * q + p];
            let mut a = vec![0.0; n * n];
            let mut b = vec![0.0; n * n];
            let mut c = vec![0.0; n * n];
            let mut f = vec![0.0; n];
            for mm in 0..n {
                let bm = basis.row(&basis.b, mm);
                f[mm] = (0..q).map(|p| w[p] * at(&coeffs.f0, p) * bm[p]).sum();
                for j in 0..n {
                    let bj = basis.row(&basis.b, j);
                    let dbj = basis.row(&basis.db, j);
                    let (mut sa, mut sb, mut sc) = (0.0, 0.0, 0.0);
                    for p in 0..q {
                        let wb = w[p] * bm[p];
                        sa += wb * at(&coeffs.k11, p) * bj[p];
                        sb += wb * (at(&coeffs.k1, p) * bj[p] + 2.0 * at(&coeffs.k12, p) * dbj[p]);
                        sc += wb * at(&coeffs.k2, p) * dbj[p];
                    }
                    if j == mm {
                        sc -= basis.lambda[j];
                    }
                    a[mm * n + j] = sa;
                    b[mm * n + j] = sb;
                    c[mm * n + j] = sc;
                }
            }
            (a, b, c, f)
        })
        .collect();
    let mut out = GalerkinMatrices {
        m: coeffs.m,
        n,
        h: coeffs.h,
        x0: coeffs.x0,
        a: Vec::with_capacity(coeffs.m),
        b: Vec::with_capacity(coeffs.m),
        c: Vec::with_capacity(coeffs.m),
        f: Vec::with_capacity(coeffs.m),
    };
    for (a, b, c, f) in per_node {
        out.a.push(a);
        out.b.push(b);
        out.c.push(c);
        out.f.push(f);
    }
    Ok(out)
}

/// Outlet closure of the σ-system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// `A″(L1) = 0`
    SecondDerivative,
    /// `A′(L2) = 0`, used on the extended cylinder.
    FirstDerivative,
}

#[derive(Debug, Clone)]
pub struct SigmaSystem {
    pub matrix: BandMatrix,
    pub rhs: Vec<f64>,
    pub sigma: f64,
    pub closure: Closure,
    /// Node carrying the differentiated equation (σ > 0 only).
    pub sonic_node: Option<usize>,
    pub m: usize,
    pub n: usize,
    pub h: f64,
}

const D1: [f64; 3] = [-0.5, 0.0, 0.5];
const D2: [f64; 3] = [1.0, -2.0, 1.0];
const D3: [f64; 5] = [-0.5, 1.0, 0.0, -1.0, 0.5];
const D3_SHIFT: [f64; 4] = [-1.0, 3.0, -3.0, 1.0];
const D4: [f64; 5] = [1.0, -4.0, 6.0, -4.0, 1.0];

struct Rows<'a> {
    mat: &'a mut BandMatrix,
    n: usize,
}

impl Rows<'_> {
    fn put(&mut self, block: usize, eq: usize, node: usize, mode: usize, v: f64) -> Result<()> {
        if v == 0.0 {
            return Ok(());
        }
        self.mat.add(block * self.n + eq, node * self.n + mode, v)
    }

    /// Same stencil on every mode (diagonal coupling).
    fn diag_stencil(&mut self, block: usize, first: usize, w: &[f64], scale: f64) -> Result<()> {
        for eq in 0..self.n {
            for (o, &c) in w.iter().enumerate() {
                self.put(block, eq, first + o, eq, scale * c)?;
            }
        }
        Ok(())
    }

    /// Stencil weighted by a full N×N coupling matrix.
    fn coupled_stencil(&mut self, block: usize, first: usize, w: &[f64], scale: f64, coupling: &[f64]) -> Result<()> {
        for eq in 0..self.n {
            for j in 0..self.n {
                let k = coupling[eq * self.n + j];
                if k == 0.0 {
                    continue;
                }
                for (o, &c) in w.iter().enumerate() {
                    self.put(block, eq, first + o, j, scale * c * k)?;
                }
            }
        }
        Ok(())
    }
}

/// Node used for the differentiated equation: where the mean of `k11` is
/// closest to zero among nodes 2..=limit.
fn sonic_row_node(g: &GalerkinMatrices, limit: usize) -> usize {
    (2..=limit)
        .min_by(|&p, &q| g.a[p][0].abs().total_cmp(&g.a[q][0].abs()))
        .unwrap_or(2)
}

/// One-sided differencing of the first-order term at nodes from `from` on,
/// wherever the leading coefficient is positive or the cell Péclet number
/// `|b|h/2|a|` exceeds one. Central differences there leave an odd-even mode
/// nearly free, worst where `a` changes sign. Returns -1 for the backward
/// difference (b < 0), +1 for the forward one, 0 for central.
fn upwind_direction(g: &GalerkinMatrices, i: usize, from: Option<usize>) -> i32 {
    let Some(from) = from else { return 0 };
    if i < from {
        return 0;
    }
    let n = g.n;
    let diag = |v: &[f64], k: usize| v[k * n + k];
    let (mut pe, mut elliptic, mut pos, mut neg) = (0.0f64, true, 0, 0);
    for k in 0..n {
        let (a, b) = (diag(&g.a[i], k), diag(&g.b[i], k));
        elliptic &= a > 0.0;
        pe = pe.max(if a != 0.0 { b.abs() * g.h / (2.0 * a.abs()) } else { f64::INFINITY });
        if b > 0.0 {
            pos += 1;
        } else if b < 0.0 {
            neg += 1;
        }
    }
    if !elliptic && pe <= 1.0 {
        0
    } else if neg == n {
        -1
    } else if pos == n {
        1
    } else {
        0
    }
}

/// Assemble the block-banded system for one σ.
///
/// Rows (N each): `A(L0) = 0`, `A″(L0) = 0`, the equation at nodes
/// 2..=M-3, the x₁-derivative of the equation at the sonic node, and the
/// outlet closure. For σ = 0 the equation is imposed at nodes 1..=M-2 with
/// `A(L0) = 0` and `A′ = 0` at the outlet. With one-sided differences at the
/// outlet (extended mode) the equation runs to M-2 and is dropped instead at
/// the node past `upwind_from` where `k11` crosses zero.
pub fn assemble_sigma_system(
    g: &GalerkinMatrices,
    sigma: f64,
    options: &LinearOptions,
) -> Result<SigmaSystem> {
    let (closure, sonic_limit) = (options.closure, options.sonic_limit);
    let (m, n, h) = (g.m, g.n, g.h);
    if m < 7 {
        return Err(Error::SingularAssembly(format!("{m} x1-nodes cannot hold the 5-point stencils")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::Precondition(format!("sigma = {sigma} must be non-negative")));
    }
    let mut matrix = BandMatrix::new(m * n, 4 * n - 1, 3 * n - 1);
    let mut rhs = vec![0.0; m * n];
    let mut rows = Rows { mat: &mut matrix, n };
    let pde = |rows: &mut Rows, rhs: &mut [f64], block: usize, i: usize| -> Result<()> {
        let dir = upwind_direction(g, i, options.upwind_from);
        if sigma > 0.0 {
            // the five-point third difference carries a parasitic root that
            // grows toward the outlet once convection dominates
            match dir {
                0 => rows.diag_stencil(block, i - 2, &D3, sigma / (h * h * h))?,
                d if d < 0 => rows.diag_stencil(block, i - 2, &D3_SHIFT, sigma / (h * h * h))?,
                _ => rows.diag_stencil(block, i - 1, &D3_SHIFT, sigma / (h * h * h))?,
            }
        }
        rows.coupled_stencil(block, i - 1, &D2, 1.0 / (h * h), &g.a[i])?;
        match dir {
            0 => rows.coupled_stencil(block, i - 1, &D1, 1.0 / h, &g.b[i])?,
            d if d < 0 => rows.coupled_stencil(block, i - 1, &[-1.0, 1.0], 1.0 / h, &g.b[i])?,
            _ => rows.coupled_stencil(block, i, &[-1.0, 1.0], 1.0 / h, &g.b[i])?,
        }
        rows.coupled_stencil(block, i, &[1.0], 1.0, &g.c[i])?;
        rhs[block * n..(block + 1) * n].copy_from_slice(&g.f[i]);
        Ok(())
    };
    rows.diag_stencil(0, 0, &[1.0], 1.0)?;
    let mut sonic_node = None;
    if sigma == 0.0 {
        for i in 1..m - 1 {
            pde(&mut rows, &mut rhs, i, i)?;
        }
        rows.diag_stencil(m - 1, m - 3, &[0.5, -2.0, 1.5], 1.0)?;
    } else {
        rows.diag_stencil(1, 0, &[2.0, -5.0, 4.0, -1.0], 1.0)?;
        let s = sonic_row_node(g, sonic_limit.unwrap_or(m - 3).clamp(2, m - 3));
        sonic_node = Some(s);
        // With one-sided stencils at the outlet the equation must hold up to
        // M-2. One row is then surplus; it is dropped where the leading
        // coefficient turns positive again, since there both one-sided
        // characteristics leave the node.
        let skip = match (options.upwind_from, upwind_direction(g, m - 2, options.upwind_from) < 0) {
            (Some(from), true) => Some(
                (from.max(s + 1)..m - 1)
                    .min_by(|&p, &q| g.a[p][0].abs().total_cmp(&g.a[q][0].abs()))
                    .ok_or_else(|| Error::SingularAssembly("no node left after the sonic row".into()))?,
            ),
            _ => None,
        };
        let last = if skip.is_some() { m - 1 } else { m - 2 };
        for i in 2..last {
            let block = match skip {
                Some(k) if i == k => continue,
                Some(k) if i > k => i,
                _ if i < s => i,
                _ => i + 1,
            };
            pde(&mut rows, &mut rhs, block, i)?;
        }
        // differentiated equation, scaled by h² to keep row norms comparable
        let dd = |v: &[Vec<f64>], k: usize| (v[s + 1][k] - v[s - 1][k]) / (2.0 * h);
        let nn = n * n;
        let ap: Vec<f64> = (0..nn).map(|k| dd(&g.a, k)).collect();
        let bp: Vec<f64> = (0..nn).map(|k| dd(&g.b, k)).collect();
        let cp: Vec<f64> = (0..nn).map(|k| dd(&g.c, k)).collect();
        let a_plus_b: Vec<f64> = (0..nn).map(|k| ap[k] + g.b[s][k]).collect();
        let b_plus_c: Vec<f64> = (0..nn).map(|k| bp[k] + g.c[s][k]).collect();
        rows.diag_stencil(s, s - 2, &D4, sigma / (h * h))?;
        rows.coupled_stencil(s, s - 2, &D3, 1.0 / h, &g.a[s])?;
        rows.coupled_stencil(s, s - 1, &D2, 1.0, &a_plus_b)?;
        rows.coupled_stencil(s, s - 1, &D1, h, &b_plus_c)?;
        rows.coupled_stencil(s, s, &[1.0], h * h, &cp)?;
        for k in 0..n {
            rhs[s * n + k] = h * h * (g.f[s + 1][k] - g.f[s - 1][k]) / (2.0 * h);
        }
        match closure {
            Closure::SecondDerivative => rows.diag_stencil(m - 1, m - 4, &[-1.0, 4.0, -5.0, 2.0], 1.0)?,
            Closure::FirstDerivative => rows.diag_stencil(m - 1, m - 3, &[0.5, -2.0, 1.5], 1.0)?,
        }
    }
    // equilibrate rows so the residual test sees comparable row scales
    for i in 0..m * n {
        let big = matrix.row_max(i);
        if big > 0.0 {
            matrix.scale_row(i, 1.0 / big);
            rhs[i] /= big;
        }
    }
    Ok(SigmaSystem { matrix, rhs, sigma, closure, sonic_node, m, n, h })
}

#[derive(Debug, Clone)]
pub struct SigmaSolution {
    pub coeffs: Vec<f64>,
    pub residual: f64,
}

/// Banded LU with partial pivoting plus one refinement step.
pub fn solve_sigma(system: &SigmaSystem) -> Result<SigmaSolution> {
    let grid = format!("M={} N={} h={:.4e}", system.m, system.n, system.h);
    let (coeffs, residual) = solve_refined(&system.matrix, &system.rhs).map_err(|e| Error::SingularMatrix {
        sigma: system.sigma,
        grid: grid.clone(),
        msg: e.to_string(),
    })?;
    let fmax = system.rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if residual > 1e-10 * fmax || !residual.is_finite() {
        return Err(Error::SingularMatrix {
            sigma: system.sigma,
            grid,
            msg: format!("residual {residual:.3e} exceeds 1e-10 * {fmax:.3e}"),
        });
    }
    Ok(SigmaSolution { coeffs, residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSchedule {
    pub sigma0: f64,
    pub levels: usize,
    pub tol: f64,
}

impl Default for SigmaSchedule {
    fn default() -> Self {
        SigmaSchedule { sigma0: 1e-2, levels: 8, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearReport {
    pub sigmas: Vec<f64>,
    pub h1_norms: Vec<f64>,
    /// `‖ψ^{σ_k} - ψ^{σ_{k-1}}‖_{H¹ᵣ}` for k ≥ 1.
    pub changes: Vec<f64>,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub sonic_node: Option<usize>,
    pub psi_h1r: f64,
    pub f0_l2r: f64,
    pub energy_ratio: f64,
    /// Minimum over nodes of `d k1 - ½∂ₓ(d k11) - d ∂ᵣk12 - d k12/r`.
    pub multiplier_margin: Option<f64>,
    pub closure: Closure,
}

#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub field: Field2D,
    pub report: LinearReport,
}

impl LinearSolution {
    pub fn require_converged(self) -> Result<Self> {
        if self.report.converged {
            Ok(self)
        } else {
            Err(Error::NoSigmaConvergence(format!(
                "last change {:.3e} after {} levels",
                self.report.changes.last().copied().unwrap_or(f64::NAN),
                self.report.sigmas.len()
            )))
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearOptions {
    pub closure: Closure,
    /// Search the sonic row node only among x₁-nodes up to this index.
    pub sonic_limit: Option<usize>,
    /// Nodes from this index on may take one-sided convection differences.
    pub upwind_from: Option<usize>,
    /// Shift of the multiplier `d = 6(x₁ - d0)` for the certificate.
    pub d0: Option<f64>,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions { closure: Closure::SecondDerivative, sonic_limit: None, upwind_from: None, d0: None }
    }
}

/// Multiplier integrand of the energy estimate, minimized over the grid.
pub fn multiplier_margin(coeffs: &CoefficientSet, basis: &RadialBasis, d0: f64) -> f64 {
    let (m, q) = (coeffs.m, coeffs.q);
    let diff = Diff::new(m, coeffs.h, 1);
    let dk: Vec<f64> = (0..m * q)
        .map(|k| 6.0 * (coeffs.x(k / q) - d0) * coeffs.k11[k])
        .collect();
    let ddk = diff.apply(1, &dk, q);
    let mut worst = f64::INFINITY;
    for i in 0..m {
        let d = 6.0 * (coeffs.x(i) - d0);
        for p in 0..q {
            let k = i * q + p;
            let r = basis.quad.nodes[p];
            let drk12 = coeffs.dr_k12.as_ref().map_or(0.0, |v| v[k]);
            let v = d * coeffs.k1[k] - 0.5 * ddk[k] - d * drk12 - d * coeffs.k12[k] / r;
            worst = worst.min(v);
        }
    }
    worst
}

/// σ-continuation: solve for `σ_k = σ0 2^{-k}` until the H¹ᵣ change between
/// levels drops below the tolerance or the levels run out.
pub fn solve_linear(
    coeffs: &CoefficientSet,
    basis: &RadialBasis,
    schedule: &SigmaSchedule,
    options: &LinearOptions,
) -> Result<LinearSolution> {
    if schedule.levels == 0 || !(schedule.sigma0 > 0.0) {
        return Err(Error::Precondition("sigma schedule needs sigma0 > 0 and at least one level".into()));
    }
    let g = galerkin_matrices(coeffs, basis)?;
    let mut report = LinearReport {
        sigmas: Vec::new(),
        h1_norms: Vec::new(),
        changes: Vec::new(),
        residuals: Vec::new(),
        converged: false,
        sonic_node: None,
        psi_h1r: 0.0,
        f0_l2r: 0.0,
        energy_ratio: 0.0,
        multiplier_margin: None,
        closure: options.closure,
    };
    let mut prev: Option<Field2D> = None;
    for k in 0..schedule.levels {
        let sigma = schedule.sigma0 * 0.5f64.powi(k as i32);
        let system = assemble_sigma_system(&g, sigma, options)?;
        report.sonic_node = system.sonic_node;
        let sol = solve_sigma(&system)?;
        let field = Field2D::from_coeffs(coeffs.x0, coeffs.h, coeffs.m, basis.n, sol.coeffs)?;
        report.sigmas.push(sigma);
        report.residuals.push(sol.residual);
        report.h1_norms.push(weighted_norms(&field, basis, 1)?.h1r());
        if let Some(p) = &prev {
            let change = weighted_norms(&field.axpy(-1.0, p)?, basis, 1)?.h1r();
            report.changes.push(change);
            if change < schedule.tol {
                report.converged = true;
                prev = Some(field);
                break;
            }
        }
        prev = Some(field);
    }
    let field = prev.expect("at least one level");
    let measure = GridMeasure::new(coeffs.m, coeffs.h, basis);
    report.psi_h1r = *report.h1_norms.last().unwrap();
    report.f0_l2r = measure.sq(&coeffs.f0).sqrt();
    report.energy_ratio = if report.f0_l2r > 0.0 { report.psi_h1r / report.f0_l2r } else { 0.0 };
    report.multiplier_margin = options.d0.map(|d0| multiplier_margin(coeffs, basis, d0));
    Ok(LinearSolution { field, report })
}

/// Manufactured problem `ψ_m = (x₁ - L0)² cos(πr)` with frozen background
/// coefficients. The source is the continuum operator applied to ψ_m; the
/// reference solution is the modal projection of ψ_m.
pub fn manufactured_problem(flow: &BackgroundFlow1D, basis: &RadialBasis) -> Result<(CoefficientSet, Field2D)> {
    use std::f64::consts::PI;
    let l0 = flow.x1[0];
    let q = basis.q();
    let m = flow.len();
    let mut f0 = vec![0.0; m * q];
    for i in 0..m {
        let x = flow.x1[i];
        for (p, &r) in basis.quad.nodes.iter().enumerate() {
            let cr = (PI * r).cos();
            let radial = -PI * PI * cr - PI * (PI * r).sin() / r;
            f0[i * q + p] = flow.k11_bar[i] * 2.0 * cr + flow.k1_bar[i] * 2.0 * (x - l0) * cr + (x - l0).powi(2) * radial;
        }
    }
    let coeffs = CoefficientSet::from_profiles(&flow.x1, flow.h, basis, |i| flow.k11_bar[i], |i| flow.k1_bar[i], f0)?;
    let exact = Field2D::from_fn(basis, l0, flow.h, m, |x, r| (x - l0).powi(2) * (PI * r).cos());
    Ok((coeffs, exact))
}

/// Coefficients `c_j` with `Σ_j (-1/j)^k c_j = 1` for k = 0..3, and the
/// residual of the solved system.
pub fn reflection_coefficients() -> ([f64; 4], f64) {
    let mut a = [[0.0f64; 5]; 4];
    for (k, row) in a.iter_mut().enumerate() {
        for j in 0..4 {
            row[j] = (-1.0 / (j + 1) as f64).powi(k as i32);
        }
        row[4] = 1.0;
    }
    let orig = a;
    for col in 0..4 {
        let p = (col..4).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, p);
        for r in 0..4 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..5 {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let c = [a[0][4] / a[0][0], a[1][4] / a[1][1], a[2][4] / a[2][2], a[3][4] / a[3][3]];
    let residual = orig
        .iter()
        .map(|row| ((0..4).map(|j| row[j] * c[j]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    (c, residual)
}

/// `ℰf(x) = Σ c_j f(L1 + (L1 - x)/j)` for `x > L1`, `f(x)` otherwise.
pub fn reflect(c: &[f64; 4], l1: f64, x: f64, f: impl Fn(f64) -> f64) -> f64 {
    if x <= l1 {
        return f(x);
    }
    (0..4).map(|j| c[j] * f(l1 + (l1 - x) / (j + 1) as f64)).sum()
}

/// Extended coefficients on `(L0, L2) × (0, 1)`.
#[derive(Debug, Clone)]
pub struct ExtendedProblem {
    pub l2: f64,
    pub l: f64,
    pub k0: f64,
    pub c: [f64; 4],
    pub reflection_residual: f64,
    /// Nodes of the original domain.
    pub m_inner: usize,
    pub coeffs: CoefficientSet,
    pub d0: f64,
}

/// Interpolation weights (first node, weights) for the value at `y` from a
/// uniform column of `m` samples.
fn interp_weights(x0: f64, h: f64, m: usize, y: f64) -> (usize, Vec<f64>) {
    let t = (y - x0) / h;
    let k = t.round();
    if (t - k).abs() < 1e-12 && k >= 0.0 && (k as usize) < m {
        return (k as usize, vec![1.0]);
    }
    let width = 6.min(m);
    let base = (t.floor() as isize - 2).clamp(0, (m - width) as isize) as usize;
    let nodes: Vec<f64> = (base..base + width).map(|i| x0 + h * i as f64).collect();
    (base, fornberg(y, &nodes, 0).swap_remove(0))
}

/// Build the auxiliary problem on the longer cylinder.
pub fn extend_problem(coeffs: &CoefficientSet, ext: &ExtendedBackground) -> Result<ExtendedProblem> {
    let mi = ext.m_inner;
    if coeffs.m != mi || (coeffs.h - ext.h).abs() > 1e-12 * ext.h {
        return Err(Error::Dimension(format!(
            "coefficients on {} nodes, extended background built from {mi}",
            coeffs.m
        )));
    }
    let (c, reflection_residual) = reflection_coefficients();
    let q = coeffs.q;
    let n = ext.x1.len();
    let l1 = ext.x1[mi - 1];
    let mut out = CoefficientSet {
        x0: coeffs.x0,
        h: coeffs.h,
        m: n,
        q,
        k11: vec![0.0; n * q],
        k12: vec![0.0; n * q],
        k1: vec![0.0; n * q],
        k2: vec![0.0; n * q],
        f0: vec![0.0; n * q],
        dr_k12: coeffs.dr_k12.as_ref().map(|_| vec![0.0; n * q]),
    };
    let d11: Vec<f64> = (0..mi * q).map(|k| coeffs.k11[k] - ext.k11_bar[k / q]).collect();
    let d1: Vec<f64> = (0..mi * q).map(|k| coeffs.k1[k] - ext.k1_bar[k / q]).collect();
    for i in 0..n {
        let taps: Vec<(usize, Vec<f64>, f64)> = if i < mi {
            vec![(i, vec![1.0], 1.0)]
        } else {
            (0..4)
                .map(|j| {
                    let y = l1 + (l1 - ext.x1[i]) / (j + 1) as f64;
                    let (base, w) = interp_weights(coeffs.x0, coeffs.h, mi, y);
                    (base, w, c[j])
                })
                .collect()
        };
        let apply = |src: &[f64], p: usize| -> f64 {
            taps.iter()
                .map(|(base, w, cj)| cj * w.iter().enumerate().map(|(o, wt)| wt * src[(base + o) * q + p]).sum::<f64>())
                .sum()
        };
        for p in 0..q {
            let k = i * q + p;
            out.k11[k] = ext.a11_bar[i] + apply(&d11, p);
            out.k1[k] = ext.a1_bar[i] + apply(&d1, p);
            out.k12[k] = apply(&coeffs.k12, p);
            out.k2[k] = apply(&coeffs.k2, p);
            out.f0[k] = apply(&coeffs.f0, p);
            if let (Some(dst), Some(src)) = (out.dr_k12.as_mut(), coeffs.dr_k12.as_ref()) {
                dst[k] = apply(src, p);
            }
        }
    }
    Ok(ExtendedProblem {
        l2: ext.l2,
        l: ext.l,
        k0: ext.k0,
        c,
        reflection_residual,
        m_inner: mi,
        coeffs: out,
        d0: ext.d0,
    })
}

/// Solve the auxiliary problem with `A′(L2) = 0`; the sonic row stays in D.
pub fn solve_extended(ext: &ExtendedProblem, basis: &RadialBasis, schedule: &SigmaSchedule) -> Result<LinearSolution> {
    let options = LinearOptions {
        closure: Closure::FirstDerivative,
        sonic_limit: Some(ext.m_inner - 1),
        upwind_from: Some(ext.m_inner),
        d0: Some(ext.d0),
    };
    solve_linear(&ext.coeffs, basis, schedule, &options)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(m: usize, n: usize, h: f64, k11: f64, k1: f64, f: f64) -> GalerkinMatrices {
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n * n];
        for j in 0..n {
            a[j * n + j] = k11;
            b[j * n + j] = k1;
        }
        GalerkinMatrices {
            m,
            n,
            h,
            x0: 0.0,
            a: vec![a; m],
            b: vec![b; m],
            c: vec![vec![0.0; n * n]; m],
            f: vec![vec![f; n]; m],
        }
    }

    #[test]
    fn sigma_zero_reproduces_quadratic() {
        let m = 41;
        let h = 1.0 / (m - 1) as f64;
        let g = flat(m, 1, h, 1.0, 0.0, 2.0);
        let sys = assemble_sigma_system(&g, 0.0, &LinearOptions { closure: Closure::FirstDerivative, ..Default::default() }).unwrap();
        let sol = solve_sigma(&sys).unwrap();
        for i in 0..m {
            let x = i as f64 * h;
            assert!((sol.coeffs[i] - (x * x - 2.0 * x)).abs() < 1e-8);
        }
    }

    #[test]
    fn band_and_boundary_rows() {
        let n = 3;
        let g = flat(20, n, 0.1, -1.0, 1.0, 1.0);
        let sys = assemble_sigma_system(&g, 1e-2, &LinearOptions::default()).unwrap();
        let (lo, up) = sys.matrix.bandwidth();
        assert!(lo <= 4 * n - 1 && up <= 3 * n - 1);
        let last = (20 - 1) * n;
        let row: Vec<f64> = (0..20 * n).map(|c| sys.matrix.get(last, c)).filter(|v| *v != 0.0).collect();
        assert_eq!(row, vec![-0.2, 0.8, -1.0, 0.4]);
        let zero = solve_sigma(&SigmaSystem { rhs: vec![0.0; 20 * n], ..sys }).unwrap();
        assert!(zero.coeffs.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reflection_is_c3() {
        let (c, res) = reflection_coefficients();
        assert!(res < 1e-12);
        let f = |x: f64| x * x * x;
        let l1 = 1.0;
        let df = [f(l1), 3.0, 6.0, 6.0];
        for k in 0..4 {
            let right: f64 = (0..4).map(|j| c[j] * (-1.0 / (j + 1) as f64).powi(k as i32) * df[k]).sum();
            assert!((right - df[k]).abs() < 1e-10);
        }
        assert_eq!(reflect(&c, l1, 0.5, f), 0.125);
    }
}
