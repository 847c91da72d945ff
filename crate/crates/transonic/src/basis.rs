//! Neumann eigenfunctions of `-∂²ᵣ - (1/r)∂ᵣ` on [0, 1], orthonormal in the
//! weighted inner product `∫₀¹ f g r dr`.

use crate::error::{Error, Result};
use crate::quadrature::WeightedQuadrature;
use crate::special::{bessel_j, bessel_j_scaled, j1_zero};

/// Eigenvalues `λ₁ = 0 < λ₂ < ...`; `√λⱼ` is the (j-1)-th positive zero of `J1`.
pub fn find_eigenvalues(n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        if j == 0 {
            out.push(0.0);
        } else {
            let k = j1_zero(j)?;
            out.push(k * k);
        }
    }
    Ok(out)
}

/// Samples of the basis and of the radial derivative quantities used by the
/// weighted norms, all on the quadrature nodes. Arrays are laid out `j * Q + q`.
#[derive(Debug, Clone)]
pub struct RadialBasis {
    pub n: usize,
    pub quad: WeightedQuadrature,
    pub lambda: Vec<f64>,
    pub norm: Vec<f64>,
    pub b: Vec<f64>,
    pub db: Vec<f64>,
    pub d2b: Vec<f64>,
    pub d3b: Vec<f64>,
    pub d4b: Vec<f64>,
    /// `b'/r`
    pub g1: Vec<f64>,
    pub dg1: Vec<f64>,
    pub d2g1: Vec<f64>,
    /// `(1/r) (b'/r)'`
    pub g2: Vec<f64>,
}

impl RadialBasis {
    pub fn build(n: usize, q: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Resolution("at least one radial mode is required".into()));
        }
        if q < 4 * n || q < 8 {
            return Err(Error::Resolution(format!(
                "Q={q} quadrature nodes cannot resolve N={n} modes (need Q >= 4N and Q >= 8)"
            )));
        }
        let quad = WeightedQuadrature::new(q);
        let lambda = find_eigenvalues(n)?;
        let mut norm = vec![0.0; n];
        let size = n * q;
        let mut b = vec![0.0; size];
        let mut db = vec![0.0; size];
        let mut d2b = vec![0.0; size];
        let mut d3b = vec![0.0; size];
        let mut d4b = vec![0.0; size];
        let mut g1 = vec![0.0; size];
        let mut dg1 = vec![0.0; size];
        let mut d2g1 = vec![0.0; size];
        let mut g2 = vec![0.0; size];
        for j in 0..n {
            let k = lambda[j].sqrt();
            let mass = quad.integrate(|r| bessel_j(0, k * r).powi(2));
            let c = 1.0 / mass.sqrt();
            norm[j] = c;
            let lam = lambda[j];
            for (qi, &r) in quad.nodes.iter().enumerate() {
                let z = k * r;
                let (s1, s2, s3) = (
                    bessel_j_scaled(1, z),
                    bessel_j_scaled(2, z),
                    bessel_j_scaled(3, z),
                );
                let idx = j * q + qi;
                b[idx] = c * bessel_j(0, z);
                g1[idx] = -c * k * k * s1;
                db[idx] = g1[idx] * r;
                d2b[idx] = -g1[idx] - lam * b[idx];
                g2[idx] = c * k.powi(4) * s2;
                dg1[idx] = g2[idx] * r;
                d2g1[idx] = c * k.powi(4) * (s2 - z * z * s3);
                d3b[idx] = -dg1[idx] - lam * db[idx];
                d4b[idx] = -d2g1[idx] - lam * d2b[idx];
            }
        }
        Ok(RadialBasis { n, quad, lambda, norm, b, db, d2b, d3b, d4b, g1, dg1, d2g1, g2 })
    }

    pub fn q(&self) -> usize {
        self.quad.len()
    }

    /// `(b_j(r), b_j'(r))` at an arbitrary radius.
    pub fn eval(&self, j: usize, r: f64) -> (f64, f64) {
        let k = self.lambda[j].sqrt();
        let c = self.norm[j];
        let z = k * r;
        (c * bessel_j(0, z), -c * k * k * r * bessel_j_scaled(1, z))
    }

    pub fn row<'a>(&self, data: &'a [f64], j: usize) -> &'a [f64] {
        let q = self.q();
        &data[j * q..(j + 1) * q]
    }

    /// Weighted L² projection of nodal samples onto the span.
    pub fn project(&self, samples: &[f64]) -> Result<Vec<f64>> {
        let q = self.q();
        if samples.len() != q {
            return Err(Error::Dimension(format!("expected {q} samples, got {}", samples.len())));
        }
        Ok((0..self.n)
            .map(|j| {
                let bj = self.row(&self.b, j);
                (0..q).map(|i| self.quad.weights[i] * samples[i] * bj[i]).sum()
            })
            .collect())
    }

    /// Nodal samples of `Σ aⱼ bⱼ`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.synthesize(coeffs, &self.b)
    }

    /// Nodal samples of `Σ aⱼ Sⱼ` for any of the sample tables.
    pub fn synthesize(&self, coeffs: &[f64], table: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.n {
            return Err(Error::Dimension(format!(
                "expected {} coefficients, got {}",
                self.n,
                coeffs.len()
            )));
        }
        let q = self.q();
        let mut out = vec![0.0; q];
        for (j, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, s) in out.iter_mut().zip(self.row(table, j)) {
                *o += a * s;
            }
        }
        Ok(out)
    }

    /// Largest deviation of the discrete Gram matrix from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..=i {
                let g: f64 = self
                    .row(&self.b, i)
                    .iter()
                    .zip(self.row(&self.b, j))
                    .zip(&self.quad.weights)
                    .map(|((a, b), w)| a * b * w)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// Dump rows `(j, lambda_j, normalization)`.
    pub fn table(&self) -> Vec<(usize, f64, f64)> {
        (0..self.n).map(|j| (j + 1, self.lambda[j], self.norm[j])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_mode_and_second_eigenvalue() {
        let basis = RadialBasis::build(4, 32).unwrap();
        assert_eq!(basis.lambda[0], 0.0);
        assert!((basis.norm[0] - 2f64.sqrt()).abs() < 1e-14);
        assert!((basis.lambda[1].sqrt() - 3.831_705_970_2).abs() < 1e-9);
        assert!((basis.lambda[2].sqrt() - 7.015_586_7).abs() < 1e-7);
    }

    #[test]
    fn normalization_agrees_with_closed_form() {
        let basis = RadialBasis::build(8, 64).unwrap();
        for j in 1..8 {
            let analytic = 2f64.sqrt() / bessel_j(0, basis.lambda[j].sqrt()).abs();
            assert!((basis.norm[j] - analytic).abs() < 1e-11 * analytic);
        }
    }

    #[test]
    fn derivative_tables_match_differences() {
        let basis = RadialBasis::build(6, 24).unwrap();
        let h = 1e-4;
        for j in 0..6 {
            for (qi, &r) in basis.quad.nodes.iter().enumerate() {
                let idx = j * 24 + qi;
                let (bp, dp) = basis.eval(j, r + h);
                let (bm, dm) = basis.eval(j, r - h);
                let (b0, d0) = basis.eval(j, r);
                let scale = 1.0 + basis.lambda[j];
                assert!(((bp - bm) / (2.0 * h) - basis.db[idx]).abs() < 1e-6 * scale);
                assert!(((dp - dm) / (2.0 * h) - basis.d2b[idx]).abs() < 1e-6 * scale * scale);
                assert!(((bp - 2.0 * b0 + bm) / (h * h) - basis.d2b[idx]).abs() < 1e-4 * scale);
                assert!((d0 / r - basis.g1[idx]).abs() < 1e-10 * scale);
                let g1p = basis.eval(j, r + h).1 / (r + h);
                let g1m = basis.eval(j, r - h).1 / (r - h);
                assert!(((g1p - g1m) / (2.0 * h) - basis.dg1[idx]).abs() < 1e-5 * scale * scale);
            }
        }
    }

    #[test]
    fn project_reconstruct_round_trip() {
        let basis = RadialBasis::build(5, 40).unwrap();
        let coeffs = [0.3, -1.0, 0.25, 0.0, 2.0];
        let samples = basis.reconstruct(&coeffs).unwrap();
        let back = basis.project(&samples).unwrap();
        for (a, b) in coeffs.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(basis.project(&[1.0; 3]).is_err());
    }
}
