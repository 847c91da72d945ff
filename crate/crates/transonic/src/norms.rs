//! Weighted Sobolev norms `Hᵐᵣ(D)` with measure `r dr dx₁`, and the
//! inequalities relating them to Cartesian norms of the revolved field.
//!
//! Derivative tensors are measured in the Frobenius sense, so mixed
//! derivatives carry their multiplicity (`|∇²ψ|² = ψₓₓ² + 2ψₓᵣ² + ψᵣᵣ²`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basis::RadialBasis;
use crate::error::{Error, Result};
use crate::fd::gregory_weights;
use crate::field::{Field2D, Jet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormTerm {
    pub order: usize,
    pub name: String,
    /// Weighted integral of the squared term, multiplicity included.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    /// Cumulative norms `‖ψ‖_{Hᵐᵣ}` for `m = 0..=order`.
    pub norms: Vec<f64>,
    pub components: Vec<NormTerm>,
}

impl NormReport {
    pub fn order(&self) -> usize {
        self.norms.len() - 1
    }

    pub fn get(&self, m: usize) -> Option<f64> {
        self.norms.get(m).copied()
    }

    pub fn l2r(&self) -> f64 {
        self.norms[0]
    }

    pub fn h1r(&self) -> f64 {
        self.norms[1]
    }
}

/// Integrator for nodal samples laid out `i * Q + q`.
#[derive(Debug, Clone)]
pub struct GridMeasure {
    pub wx: Vec<f64>,
    pub wr: Vec<f64>,
}

impl GridMeasure {
    pub fn new(m: usize, h: f64, basis: &RadialBasis) -> Self {
        GridMeasure { wx: gregory_weights(m, h), wr: basis.quad.weights.clone() }
    }

    /// `∫∫ u v r dr dx₁`
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let q = self.wr.len();
        self.wx
            .iter()
            .enumerate()
            .map(|(i, wx)| {
                let s: f64 = (0..q).map(|k| self.wr[k] * u[i * q + k] * v[i * q + k]).sum();
                wx * s
            })
            .sum()
    }

    pub fn sq(&self, u: &[f64]) -> f64 {
        self.inner(u, u)
    }
}

fn multinomial(parts: &[usize]) -> f64 {
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    fact(parts.iter().sum()) / parts.iter().map(|&p| fact(p)).product::<f64>()
}

fn term_name(prefix: &str, a: usize, b: usize) -> String {
    if a + b == 0 {
        prefix.to_string()
    } else {
        format!("{prefix}_{}{}", "x".repeat(a), "r".repeat(b))
    }
}

/// Norms from a precomputed jet.
pub fn norms_from_jet(jet: &Jet, measure: &GridMeasure, up_to: usize) -> NormReport {
    let up_to = up_to.min(jet.order);
    let mut components = Vec::new();
    let mut norms = Vec::new();
    let mut total = 0.0;
    for k in 0..=up_to {
        for b in 0..=k {
            let a = k - b;
            let value = multinomial(&[a, b]) * measure.sq(jet.f(a, b));
            components.push(NormTerm { order: k, name: term_name("psi", a, b), value });
        }
        if k >= 2 {
            for b in 0..=k - 2 {
                let a = k - 2 - b;
                let value = multinomial(&[a, b]) * measure.sq(jet.g1(a, b));
                components.push(NormTerm { order: k, name: term_name("g1", a, b), value });
            }
        }
        if k == 4 {
            components.push(NormTerm { order: 4, name: "g2".into(), value: measure.sq(jet.g2()) });
        }
        total += components.iter().filter(|t| t.order == k).map(|t| t.value).sum::<f64>();
        norms.push(total.sqrt());
    }
    NormReport { norms, components }
}

/// Weighted norms `H⁰ᵣ … Hᵐᵣ` of a modal field.
pub fn weighted_norms(field: &Field2D, basis: &RadialBasis, up_to: usize) -> Result<NormReport> {
    if up_to > 4 {
        return Err(Error::Resolution(format!("norm order {up_to} above 4")));
    }
    if up_to == 4 && field.m < 9 {
        return Err(Error::Resolution(format!("H4 norm needs at least 9 x1-nodes, have {}", field.m)));
    }
    let jet = Jet::from_field(field, basis, up_to)?;
    Ok(norms_from_jet(&jet, &GridMeasure::new(field.m, field.h, basis), up_to))
}

/// Squared Frobenius norm of the k-th Cartesian derivative tensor of the
/// revolved field, integrated against `r dr dx₁` (one angle).
///
/// At the point (x₁, r, 0) the even z-derivatives of `f(x₁, √(y²+z²))`
/// are `∂²_z = ψᵣ/r` and `∂⁴_z = 3 (1/r)∂ᵣ(ψᵣ/r)`; odd ones vanish.
fn cartesian_level(jet: &Jet, measure: &GridMeasure, k: usize) -> f64 {
    let mut s = 0.0;
    for c in (0..=k).step_by(2) {
        for b in 0..=k - c {
            let a = k - c - b;
            let mult = multinomial(&[a, b, c]);
            s += match c {
                0 => mult * measure.sq(jet.f(a, b)),
                2 => mult * measure.sq(jet.g1(a, b)),
                _ => mult * 9.0 * measure.sq(jet.g2()),
            };
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    pub k: usize,
    pub weighted: f64,
    pub cartesian: f64,
    /// `cartesian² / (2π weighted²)`: exactly 1 for k ≤ 2, in [1, 9] for k = 3, 4.
    pub ratio: f64,
}

/// Compare `‖ψ‖_{Hᵏᵣ}` with the Hᵏ norm of the revolved field on the solid
/// cylinder. Frobenius norms are rotation invariant, so the angular integral
/// contributes the factor 2π.
pub fn norm_equivalence_check(field: &Field2D, basis: &RadialBasis, k: usize) -> Result<Equivalence> {
    let jet = Jet::from_field(field, basis, k)?;
    let measure = GridMeasure::new(field.m, field.h, basis);
    let weighted = norms_from_jet(&jet, &measure, k).norms[k];
    let cart_sq: f64 = 2.0 * PI * (0..=k).map(|l| cartesian_level(&jet, &measure, l)).sum::<f64>();
    let ratio = if weighted > 0.0 { cart_sq / (2.0 * PI * weighted * weighted) } else { 1.0 };
    Ok(Equivalence { k, weighted, cartesian: cart_sq.sqrt(), ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `max |g|²` against `‖g‖² + ‖∇g‖² + ‖∇²g‖²` for fields vanishing on the axis.
pub fn linf_bound_check(g: &Field2D, basis: &RadialBasis) -> Result<BoundCheck> {
    let jet = Jet::from_field(g, basis, 2)?;
    let measure = GridMeasure::new(g.m, g.h, basis);
    let rep = norms_from_jet(&jet, &measure, 2);
    let rhs: f64 = rep.components.iter().filter(|t| !t.name.starts_with("g1")).map(|t| t.value).sum();
    let axis = g.axis_values(basis).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if axis > 1e-8 * rep.l2r().max(f64::MIN_POSITIVE) {
        return Err(Error::Precondition(format!("field does not vanish on the axis (|g(x,0)| = {axis:.3e})")));
    }
    let lhs = jet.f(0, 0).iter().fold(0.0f64, |m, v| m.max(v * v));
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(BoundCheck { lhs, rhs, ratio })
}

/// `‖fg‖_{Hᵐᵣ}` against `‖f‖_{Hᵐᵣ} ‖g‖_{Hᵐᵣ}` for m in {2, 3}.
pub fn algebra_check(f: &Field2D, g: &Field2D, basis: &RadialBasis, m: usize) -> Result<BoundCheck> {
    if !(2..=3).contains(&m) {
        return Err(Error::Precondition(format!("algebra check is defined for m = 2, 3, not {m}")));
    }
    let jf = Jet::from_field(f, basis, m)?;
    let jg = Jet::from_field(g, basis, m)?;
    let measure = GridMeasure::new(f.m, f.h, basis);
    let lhs = norms_from_jet(&jf.product(&jg)?, &measure, m).norms[m];
    let rhs = norms_from_jet(&jf, &measure, m).norms[m] * norms_from_jet(&jg, &measure, m).norms[m];
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(BoundCheck { lhs, rhs, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_field_norms() {
        let basis = RadialBasis::build(4, 32).unwrap();
        let m = 41;
        let h = 2.0 / (m - 1) as f64;
        let psi = Field2D::from_fn(&basis, -1.0, h, m, |x, _| x);
        let rep = weighted_norms(&psi, &basis, 4).unwrap();
        assert!((rep.l2r().powi(2) - 1.0 / 3.0).abs() < 1e-12);
        assert!((rep.h1r().powi(2) - 4.0 / 3.0).abs() < 1e-10);
        let names: Vec<&str> = rep.components.iter().map(|t| t.name.as_str()).collect();
        assert!(names.contains(&"psi_xr") && names.contains(&"g1_xx") && names.contains(&"g2"));
        for w in rep.norms.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn insufficient_resolution() {
        let basis = RadialBasis::build(2, 16).unwrap();
        let psi = Field2D::zeros(0.0, 0.1, 8, 2);
        assert!(matches!(weighted_norms(&psi, &basis, 4), Err(Error::Resolution(_))));
    }
}
