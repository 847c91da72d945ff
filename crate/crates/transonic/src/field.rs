//! Scalar fields on the meridian domain (x₁, r), stored as radial modal
//! coefficients on a uniform x₁ grid, and their derivative jets.

use serde::Serialize;

use crate::basis::RadialBasis;
use crate::error::{Error, Result};
use crate::fd::Diff;

/// `ψ(x_i, r) = Σ_j A[i*n + j] b_j(r)` with `x_i = x0 + i h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field2D {
    pub x0: f64,
    pub h: f64,
    pub m: usize,
    pub n: usize,
    pub coeffs: Vec<f64>,
}

impl Field2D {
    pub fn zeros(x0: f64, h: f64, m: usize, n: usize) -> Self {
        Field2D { x0, h, m, n, coeffs: vec![0.0; m * n] }
    }

    pub fn from_coeffs(x0: f64, h: f64, m: usize, n: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != m * n {
            return Err(Error::Dimension(format!("expected {} coefficients, got {}", m * n, coeffs.len())));
        }
        Ok(Field2D { x0, h, m, n, coeffs })
    }

    /// Project `f(x, r)` mode by mode at every grid node.
    pub fn from_fn(basis: &RadialBasis, x0: f64, h: f64, m: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = basis.n;
        let mut coeffs = vec![0.0; m * n];
        for i in 0..m {
            let x = x0 + h * i as f64;
            let samples: Vec<f64> = basis.quad.nodes.iter().map(|&r| f(x, r)).collect();
            let a = basis.project(&samples).expect("sample count matches quadrature");
            coeffs[i * n..(i + 1) * n].copy_from_slice(&a);
        }
        Field2D { x0, h, m, n, coeffs }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + self.h * i as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.x(i)).collect()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.coeffs[i * self.n..(i + 1) * self.n]
    }

    fn check_compatible(&self, other: &Field2D) -> Result<()> {
        if self.m != other.m || self.n != other.n || (self.h - other.h).abs() > 1e-14 * self.h.abs() {
            return Err(Error::Dimension(format!(
                "fields on {}x{} and {}x{} grids",
                self.m, self.n, other.m, other.n
            )));
        }
        Ok(())
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &Field2D) -> Result<Field2D> {
        self.check_compatible(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + alpha * b).collect();
        Ok(Field2D { coeffs, ..self.clone() })
    }

    pub fn scale(&self, alpha: f64) -> Field2D {
        Field2D { coeffs: self.coeffs.iter().map(|a| alpha * a).collect(), ..self.clone() }
    }

    /// First `m` x₁-nodes.
    pub fn restrict(&self, m: usize) -> Field2D {
        Field2D { m, coeffs: self.coeffs[..m * self.n].to_vec(), ..self.clone() }
    }

    /// Nodal samples laid out `i * Q + q`.
    pub fn nodal(&self, basis: &RadialBasis) -> Vec<f64> {
        synthesize(&self.coeffs, self.m, basis, &basis.b)
    }

    /// `ψ(x_i, 0)` from the modal sum.
    pub fn axis_values(&self, basis: &RadialBasis) -> Vec<f64> {
        let at0: Vec<f64> = (0..self.n).map(|j| basis.eval(j, 0.0).0).collect();
        (0..self.m).map(|i| self.node(i).iter().zip(&at0).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `out[i*Q + q] = Σ_j coeffs[i*N + j] table[j*Q + q]`
pub fn synthesize(coeffs: &[f64], m: usize, basis: &RadialBasis, table: &[f64]) -> Vec<f64> {
    let n = basis.n;
    let q = basis.q();
    let mut out = vec![0.0; m * q];
    for i in 0..m {
        let row = &mut out[i * q..(i + 1) * q];
        for j in 0..n {
            let a = coeffs[i * n + j];
            if a == 0.0 {
                continue;
            }
            for (o, t) in row.iter_mut().zip(&table[j * q..(j + 1) * q]) {
                *o += a * t;
            }
        }
    }
    out
}

fn tri(a: usize, b: usize) -> usize {
    let s = a + b;
    s * (s + 1) / 2 + b
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Nodal samples of `∂ₓᵃ∂ᵣᵇψ` for `a+b ≤ order`, of `∂ₓᵃ∂ᵣᵇ(ψᵣ/r)` for
/// `a+b ≤ order-2`, and of `(1/r)∂ᵣ(ψᵣ/r)` when `order = 4`.
#[derive(Debug, Clone)]
pub struct Jet {
    pub m: usize,
    pub q: usize,
    pub order: usize,
    f: Vec<Vec<f64>>,
    g1: Vec<Vec<f64>>,
    g2: Option<Vec<f64>>,
}

impl Jet {
    pub fn from_field(field: &Field2D, basis: &RadialBasis, order: usize) -> Result<Jet> {
        if order > 4 {
            return Err(Error::Resolution(format!("derivative order {order} above 4")));
        }
        if field.n != basis.n {
            return Err(Error::Dimension(format!("field has {} modes, basis {}", field.n, basis.n)));
        }
        if field.m < order + 5 {
            return Err(Error::Resolution(format!(
                "order {order} needs at least {} x1-nodes, have {}",
                order + 5,
                field.m
            )));
        }
        let m = field.m;
        let diff = Diff::new(m, field.h, order);
        let dx: Vec<Vec<f64>> = (0..=order).map(|a| diff.apply(a, &field.coeffs, field.n)).collect();
        let radial = [&basis.b, &basis.db, &basis.d2b, &basis.d3b, &basis.d4b];
        let g1_tables = [&basis.g1, &basis.dg1, &basis.d2g1];
        let mut f = vec![Vec::new(); tri(0, order) + 1];
        let mut g1 = Vec::new();
        for s in 0..=order {
            for b in 0..=s {
                let a = s - b;
                f[tri(a, b)] = synthesize(&dx[a], m, basis, radial[b]);
            }
        }
        if order >= 2 {
            g1 = vec![Vec::new(); tri(0, order - 2) + 1];
            for s in 0..=order - 2 {
                for b in 0..=s {
                    let a = s - b;
                    g1[tri(a, b)] = synthesize(&dx[a], m, basis, g1_tables[b]);
                }
            }
        }
        let g2 = (order >= 4).then(|| synthesize(&dx[0], m, basis, &basis.g2));
        Ok(Jet { m, q: basis.q(), order, f, g1, g2 })
    }

    pub fn f(&self, a: usize, b: usize) -> &[f64] {
        &self.f[tri(a, b)]
    }

    pub fn g1(&self, a: usize, b: usize) -> &[f64] {
        &self.g1[tri(a, b)]
    }

    pub fn g2(&self) -> &[f64] {
        self.g2.as_deref().expect("jet of order 4")
    }

    /// Jet of the pointwise product, by the Leibniz rule.
    pub fn product(&self, other: &Jet) -> Result<Jet> {
        if self.m != other.m || self.q != other.q {
            return Err(Error::Dimension("jets on different grids".into()));
        }
        let order = self.order.min(other.order);
        let len = self.m * self.q;
        let mul_add = |out: &mut [f64], c: f64, u: &[f64], v: &[f64]| {
            for ((o, a), b) in out.iter_mut().zip(u).zip(v) {
                *o += c * a * b;
            }
        };
        let mut f = vec![Vec::new(); tri(0, order) + 1];
        for s in 0..=order {
            for b in 0..=s {
                let a = s - b;
                let mut out = vec![0.0; len];
                for i in 0..=a {
                    for j in 0..=b {
                        let c = binom(a, i) * binom(b, j);
                        mul_add(&mut out, c, self.f(i, j), other.f(a - i, b - j));
                    }
                }
                f[tri(a, b)] = out;
            }
        }
        let mut g1 = Vec::new();
        if order >= 2 {
            g1 = vec![Vec::new(); tri(0, order - 2) + 1];
            for s in 0..=order - 2 {
                for b in 0..=s {
                    let a = s - b;
                    let mut out = vec![0.0; len];
                    for i in 0..=a {
                        for j in 0..=b {
                            let c = binom(a, i) * binom(b, j);
                            mul_add(&mut out, c, self.g1(i, j), other.f(a - i, b - j));
                            mul_add(&mut out, c, self.f(i, j), other.g1(a - i, b - j));
                        }
                    }
                    g1[tri(a, b)] = out;
                }
            }
        }
        let g2 = (order >= 4).then(|| {
            let mut out = vec![0.0; len];
            mul_add(&mut out, 1.0, self.g2(), other.f(0, 0));
            mul_add(&mut out, 2.0, self.g1(0, 0), other.g1(0, 0));
            mul_add(&mut out, 1.0, self.f(0, 0), other.g2());
            out
        });
        Ok(Jet { m: self.m, q: self.q, order, f, g1, g2 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_of_separable_field() {
        let basis = RadialBasis::build(6, 32).unwrap();
        let m = 41;
        let h = 2.0 / (m - 1) as f64;
        // ψ = x³ b₂(r)
        let mut field = Field2D::zeros(-1.0, h, m, 6);
        for i in 0..m {
            field.coeffs[i * 6 + 1] = field.x(i).powi(3);
        }
        let jet = Jet::from_field(&field, &basis, 4).unwrap();
        let q = basis.q();
        for i in [0, 7, 20, 40] {
            let x = field.x(i);
            for k in 0..q {
                let idx = i * q + k;
                let b = basis.row(&basis.b, 1)[k];
                let db = basis.row(&basis.db, 1)[k];
                let g1 = basis.row(&basis.g1, 1)[k];
                assert!((jet.f(0, 0)[idx] - x.powi(3) * b).abs() < 1e-12);
                assert!((jet.f(1, 1)[idx] - 3.0 * x * x * db).abs() < 1e-9);
                assert!((jet.f(3, 0)[idx] - 6.0 * b).abs() < 1e-7);
                assert!(jet.f(4, 0)[idx].abs() < 1e-5);
                assert!((jet.g1(2, 0)[idx] - 6.0 * x * g1).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn product_rule_matches_direct_jet() {
        let basis = RadialBasis::build(4, 24).unwrap();
        let m = 21;
        let h = 0.05;
        let mut f = Field2D::zeros(0.0, h, m, 4);
        let mut one = Field2D::zeros(0.0, h, m, 4);
        for i in 0..m {
            f.coeffs[i * 4 + 2] = (f.x(i)).sin();
            one.coeffs[i * 4] = 1.0 / 2f64.sqrt();
        }
        let jf = Jet::from_field(&f, &basis, 4).unwrap();
        let j1 = Jet::from_field(&one, &basis, 4).unwrap();
        let p = jf.product(&j1).unwrap();
        for (a, b) in p.f(2, 1).iter().zip(jf.f(2, 1)) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
        for (a, b) in p.g2().iter().zip(jf.g2()) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }
}
