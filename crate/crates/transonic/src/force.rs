//! External force models `f̄(x₁)`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForceShape {
    Linear { slope: f64 },
    /// `Σ c_k x^k`
    Polynomial { coeffs: Vec<f64> },
    /// Separate polynomials for x < 0 and x > 0 (allows jumps at the origin).
    Piecewise { left: Vec<f64>, right: Vec<f64> },
    /// Linear interpolation of samples, extrapolated linearly beyond the ends.
    Table { x: Vec<f64>, f: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForceModel {
    pub shape: ForceShape,
    pub amplitude: f64,
    /// Tables carry no derivative data; the user may assert positive acceleration.
    pub assume_positive_accel: bool,
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn poly_primitive(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (k, &a)| acc * x + a / (k + 1) as f64)
        * x
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

impl ForceModel {
    pub fn new(shape: ForceShape) -> Self {
        ForceModel { shape, amplitude: 1.0, assume_positive_accel: false }
    }

    pub fn linear(slope: f64) -> Self {
        Self::new(ForceShape::Linear { slope })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Validation { key: "force".into(), msg: msg.into() });
        if !self.amplitude.is_finite() || self.amplitude <= 0.0 {
            return bad("amplitude must be positive");
        }
        match &self.shape {
            ForceShape::Linear { slope } if !slope.is_finite() => bad("slope must be finite"),
            ForceShape::Polynomial { coeffs } if coeffs.is_empty() => bad("no coefficients"),
            ForceShape::Piecewise { left, right } if left.is_empty() || right.is_empty() => {
                bad("piecewise force needs left and right coefficients")
            }
            ForceShape::Table { x, f } => {
                if x.len() != f.len() || x.len() < 2 {
                    return bad("table needs matching x and f lists of length >= 2");
                }
                if x.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("table abscissae must increase strictly");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn table_segment(x: &[f64], t: f64) -> usize {
        match x.iter().position(|&v| v > t) {
            Some(0) => 0,
            Some(p) => p - 1,
            None => x.len() - 2,
        }
    }

    fn shape_value(&self, x: f64) -> f64 {
        match &self.shape {
            ForceShape::Linear { slope } => slope * x,
            ForceShape::Polynomial { coeffs } => poly(coeffs, x),
            ForceShape::Piecewise { left, right } => {
                if x < 0.0 {
                    poly(left, x)
                } else if x > 0.0 {
                    poly(right, x)
                } else {
                    0.5 * (left[0] + right[0])
                }
            }
            ForceShape::Table { x: xs, f } => {
                let k = Self::table_segment(xs, x);
                let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
                f[k] + t * (f[k + 1] - f[k])
            }
        }
    }

    fn shape_primitive(&self, x: f64) -> f64 {
        match &self.shape {
            ForceShape::Linear { slope } => 0.5 * slope * x * x,
            ForceShape::Polynomial { coeffs } => poly_primitive(coeffs, x),
            ForceShape::Piecewise { left, right } => {
                if x < 0.0 {
                    poly_primitive(left, x)
                } else {
                    poly_primitive(right, x)
                }
            }
            ForceShape::Table { .. } => self.table_integral(0.0, x),
        }
    }

    fn table_integral(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        if b < a {
            return -self.table_integral(b, a);
        }
        let ForceShape::Table { x: xs, .. } = &self.shape else { unreachable!() };
        let mut cuts = vec![a];
        cuts.extend(xs.iter().copied().filter(|&v| v > a && v < b));
        cuts.push(b);
        cuts.windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (self.shape_value(w[0]) + self.shape_value(w[1])))
            .sum()
    }

    /// `f̄(x)`
    pub fn value(&self, x: f64) -> f64 {
        self.amplitude * self.shape_value(x)
    }

    /// `∫₀ˣ f̄`
    pub fn primitive(&self, x: f64) -> f64 {
        self.amplitude * self.shape_primitive(x)
    }

    /// `f̄(x)/x`, continuous at 0 for forces vanishing there.
    pub fn value_over_x(&self, x: f64) -> f64 {
        let a = self.amplitude;
        match &self.shape {
            ForceShape::Linear { slope } => a * slope,
            ForceShape::Polynomial { coeffs } => a * poly(&coeffs[1.min(coeffs.len())..], x),
            ForceShape::Piecewise { left, right } => {
                let c = if x < 0.0 { left } else { right };
                a * poly(&c[1.min(c.len())..], x)
            }
            ForceShape::Table { .. } => {
                if x != 0.0 {
                    self.value(x) / x
                } else {
                    let d = 1e-7;
                    0.5 * (self.value(d) - self.value(-d)) / d
                }
            }
        }
    }

    /// `(∫₀ˣ f̄) / x²`, continuous at 0 for forces vanishing there.
    pub fn primitive_over_x2(&self, x: f64) -> f64 {
        let a = self.amplitude;
        let shifted = |c: &[f64]| -> f64 {
            c.iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &v)| acc * x + v / (k + 1) as f64)
        };
        match &self.shape {
            ForceShape::Linear { slope } => 0.5 * a * slope,
            ForceShape::Polynomial { coeffs } => a * shifted(coeffs),
            ForceShape::Piecewise { left, right } => a * shifted(if x < 0.0 { left } else { right }),
            ForceShape::Table { .. } => {
                if x != 0.0 {
                    self.primitive(x) / (x * x)
                } else {
                    0.5 * self.value_over_x(0.0)
                }
            }
        }
    }

    /// One-sided derivatives `(f̄⁽ᵏ⁾(0-), f̄⁽ᵏ⁾(0+))`, or `None` for tables.
    pub fn derivative_at_zero(&self, k: usize) -> Option<(f64, f64)> {
        let a = self.amplitude;
        let coef = |c: &[f64]| c.get(k).copied().unwrap_or(0.0) * factorial(k) * a;
        match &self.shape {
            ForceShape::Linear { slope } => {
                let v = if k == 1 { a * slope } else { 0.0 };
                Some((v, v))
            }
            ForceShape::Polynomial { coeffs } => {
                let v = coef(coeffs);
                Some((v, v))
            }
            ForceShape::Piecewise { left, right } => Some((coef(left), coef(right))),
            ForceShape::Table { .. } => None,
        }
    }

    /// Check the sign pattern f̄ < 0 on [L0, 0), f̄ > 0 on (0, L1] on a dense sample.
    pub fn check_sign_pattern(&self, l0: f64, l1: f64) -> Result<()> {
        let n = 4000;
        for i in 0..=n {
            let x = l0 + (l1 - l0) * i as f64 / n as f64;
            if x == 0.0 {
                continue;
            }
            let v = self.value(x);
            if (x < 0.0 && v >= 0.0) || (x > 0.0 && v <= 0.0) {
                return Err(Error::SignPattern(format!("f({x:.6}) = {v:.3e}")));
            }
        }
        if !matches!(self.shape, ForceShape::Piecewise { .. }) {
            let scale = self.value(l0).abs().max(self.value(l1).abs());
            if self.value(0.0).abs() > 1e-12 * scale {
                return Err(Error::SignPattern(format!("f(0) = {:.3e} must vanish", self.value(0.0))));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_match_closed_forms() {
        let p = ForceModel::new(ForceShape::Polynomial { coeffs: vec![0.0, 2.0, 0.0, 1.0] });
        assert!((p.primitive(1.5) - (1.5f64.powi(2) + 1.5f64.powi(4) / 4.0)).abs() < 1e-14);
        assert!((p.primitive_over_x2(0.0) - 1.0).abs() < 1e-15);
        assert!((p.primitive_over_x2(0.5) - (1.0 + 0.25 * 0.25)).abs() < 1e-15);
        assert!((p.value_over_x(0.0) - 2.0).abs() < 1e-15);
        let t = ForceModel::new(ForceShape::Table { x: vec![-1.0, 0.0, 2.0], f: vec![-1.0, 0.0, 4.0] });
        assert!((t.primitive(2.0) - 4.0).abs() < 1e-14);
        assert!((t.primitive(-1.0) - 0.5).abs() < 1e-14);
        assert!(t.derivative_at_zero(1).is_none());
    }

    #[test]
    fn sign_pattern() {
        assert!(ForceModel::linear(1.0).check_sign_pattern(-1.0, 1.0).is_ok());
        assert!(ForceModel::linear(-1.0).check_sign_pattern(-1.0, 1.0).is_err());
        let jump = ForceModel::new(ForceShape::Piecewise { left: vec![-1.0], right: vec![1.0] });
        assert!(jump.check_sign_pattern(-1.0, 1.0).is_ok());
        let shifted = ForceModel::new(ForceShape::Polynomial { coeffs: vec![0.1, 1.0] });
        assert!(shifted.check_sign_pattern(-1.0, 1.0).is_err());
    }
}
