//! Gauss–Legendre rules, including the radial rule with weight `r` on (0, 1).

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Quadrature on (0, 1) with the factor `r` folded into the weights.
#[derive(Debug, Clone)]
pub struct WeightedQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedQuadrature {
    pub fn new(q: usize) -> Self {
        let (xi, wi) = gauss_legendre(q);
        let nodes: Vec<f64> = xi.iter().map(|&t| 0.5 * (1.0 + t)).collect();
        let weights = nodes.iter().zip(&wi).map(|(&r, &w)| 0.5 * w * r).collect();
        WeightedQuadrature { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫₀¹ f(r) r dr`
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&r, &w)| w * f(r)).sum()
    }

    /// Weighted sum of nodal samples.
    pub fn sum(&self, samples: &[f64]) -> f64 {
        samples.iter().zip(&self.weights).map(|(s, w)| s * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(7);
        for p in 0..14 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn radial_moments() {
        for q in [8, 32, 96, 128] {
            let rule = WeightedQuadrature::new(q);
            assert!((rule.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
            assert!((rule.integrate(|r| r * r) - 0.25).abs() < 1e-14);
            assert!(rule.nodes.iter().all(|&r| r > 0.0 && r < 1.0));
        }
        let rule = WeightedQuadrature::new(32);
        let exact = -2.0 / (PI * PI);
        assert!((rule.integrate(|r| (PI * r).cos()) - exact).abs() < 1e-12);
    }
}
