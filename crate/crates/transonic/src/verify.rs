//! Invariant suites behind the `verify` subcommand. Each suite returns one
//! row of the pass/fail table; the random suites draw band-limited fields
//! from a seeded generator so a run is reproducible from its seed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::background::{extend_background, solve_background, verify_multiplier, BackgroundFlow1D, GasConfig};
use crate::basis::RadialBasis;
use crate::error::Result;
use crate::field::Field2D;
use crate::force::ForceModel;
use crate::norms::{algebra_check, linf_bound_check, norm_equivalence_check};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub passed: bool,
    /// The quantity compared against the threshold.
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl SuiteOutcome {
    fn new(name: &str, passed: bool, value: f64, threshold: f64, detail: String) -> Self {
        SuiteOutcome { name: name.into(), passed, value, threshold, detail }
    }

    fn failed(name: &str, err: impl std::fmt::Display) -> Self {
        SuiteOutcome::new(name, false, f64::NAN, f64::NAN, format!("error: {err}"))
    }
}

/// Smooth field `Σ_j a_j(x) b_j(r)` with `a_j` a short cosine series over
/// [x_lo, x_hi] whose amplitudes decay in j and in the frequency.
#[derive(Debug, Clone)]
pub struct RandomField {
    x_lo: f64,
    x_hi: f64,
    /// (mode, frequency, amplitude, phase)
    terms: Vec<(usize, usize, f64, f64)>,
    axis_zero: bool,
}

impl RandomField {
    pub fn draw(rng: &mut impl Rng, x_lo: f64, x_hi: f64, modes: usize, axis_zero: bool) -> Self {
        let mut terms = Vec::new();
        for j in 0..modes {
            for k in 0..3 {
                let amp = rng.gen_range(-1.0..1.0) / ((1 + j) * (1 + j) * (1 + k)) as f64;
                terms.push((j, k, amp, rng.gen_range(0.0..2.0 * PI)));
            }
        }
        RandomField { x_lo, x_hi, terms, axis_zero }
    }

    fn coefficient(&self, j: usize, x: f64) -> f64 {
        let t = (x - self.x_lo) / (self.x_hi - self.x_lo);
        self.terms
            .iter()
            .filter(|term| term.0 == j)
            .map(|&(_, k, a, p)| a * (PI * k as f64 * t + p).cos())
            .sum()
    }

    /// Sample on `m` nodes of [x_lo, x_hi]. With `axis_zero` the constant
    /// mode absorbs the axis value so the field vanishes at r = 0.
    pub fn sample(&self, basis: &RadialBasis, m: usize) -> Field2D {
        let n = basis.n;
        let h = (self.x_hi - self.x_lo) / (m - 1) as f64;
        let at0: Vec<f64> = (0..n).map(|j| basis.eval(j, 0.0).0).collect();
        let mut coeffs = vec![0.0; m * n];
        for i in 0..m {
            let x = self.x_lo + h * i as f64;
            for j in 0..n {
                coeffs[i * n + j] = self.coefficient(j, x);
            }
            if self.axis_zero {
                let rest: f64 = (1..n).map(|j| coeffs[i * n + j] * at0[j]).sum();
                coeffs[i * n] = -rest / at0[0];
            }
        }
        Field2D { x0: self.x_lo, h, m, n, coeffs }
    }
}

/// Suite sizes. The defaults keep the whole table to a few seconds.
#[derive(Debug, Clone, Copy)]
pub struct VerifySettings {
    pub seed: u64,
    pub fields: usize,
    pub n_modes: usize,
    pub q_nodes: usize,
    pub m_coarse: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings { seed: 2024, fields: 50, n_modes: 6, q_nodes: 48, m_coarse: 41 }
    }
}

pub fn conservation_suite(gas: &GasConfig, force: &ForceModel, grids: &[usize]) -> SuiteOutcome {
    let name = "conservation";
    let mut worst = 0.0f64;
    for &m in grids {
        match solve_background(gas, force, m) {
            Ok(flow) => worst = worst.max(flow.mass_flux_residual()).max(flow.bernoulli_residual()),
            Err(e) => return SuiteOutcome::failed(name, e),
        }
    }
    SuiteOutcome::new(name, worst <= 1e-10, worst, 1e-10, format!("max mass-flux/Bernoulli residual over M = {grids:?}"))
}

pub fn background_suite(flow: &BackgroundFlow1D) -> SuiteOutcome {
    let crossings = flow.mach().windows(2).filter(|w| (w[0] - 1.0) * (w[1] - 1.0) < 0.0 || w[1] == 1.0).count();
    let changes = flow.k11_sign_changes().len();
    let ok = flow.strictly_increasing() && changes == 1 && crossings == 1;
    SuiteOutcome::new(
        "background",
        ok,
        crossings as f64,
        1.0,
        format!("u increasing: {}, k11 sign changes: {changes}, Mach = 1 crossings: {crossings}", flow.strictly_increasing()),
    )
}

pub fn multiplier_suite(flow: &BackgroundFlow1D) -> SuiteOutcome {
    let name = "multiplier";
    match verify_multiplier(flow, None) {
        Ok(c) => {
            let coercive = c.coercivity_margins.iter().copied().fold(f64::INFINITY, f64::min);
            let multiplier = c.multiplier_margins.iter().copied().fold(f64::INFINITY, f64::min);
            SuiteOutcome::new(
                name,
                coercive > 0.0 && multiplier >= 4.0,
                multiplier,
                4.0,
                format!("d0 = {}, kappa* = {coercive:.6}, multiplier margin = {multiplier:.6}", c.d0),
            )
        }
        Err(e) => SuiteOutcome::failed(name, e),
    }
}

pub fn orthonormality_suite() -> SuiteOutcome {
    let name = "orthonormality";
    match RadialBasis::build(16, 128) {
        Ok(b) => {
            let gram = b.gram_deviation();
            let root = (b.lambda[1].sqrt() - 3.8317059702).abs();
            SuiteOutcome::new(
                name,
                gram <= 1e-10 && root <= 1e-8,
                gram,
                1e-10,
                format!("N=16 Q=128 Gram deviation {gram:.3e}, |sqrt(lambda_2) - 3.8317059702| = {root:.3e}"),
            )
        }
        Err(e) => SuiteOutcome::failed(name, e),
    }
}

fn random_basis(s: &VerifySettings) -> Result<RadialBasis> {
    RadialBasis::build(s.n_modes, s.q_nodes)
}

pub fn equivalence_suite(s: &VerifySettings) -> SuiteOutcome {
    let name = "norm_equivalence";
    let run = || -> Result<(f64, f64, f64)> {
        let basis = random_basis(s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let (mut exact_dev, mut lo, mut hi) = (0.0f64, f64::INFINITY, 0.0f64);
        for _ in 0..s.fields {
            let f = RandomField::draw(&mut rng, -1.0, 1.0, s.n_modes, false).sample(&basis, s.m_coarse);
            for k in 0..=4 {
                let eq = norm_equivalence_check(&f, &basis, k)?;
                if k <= 2 {
                    exact_dev = exact_dev.max((eq.ratio - 1.0).abs());
                } else {
                    lo = lo.min(eq.ratio);
                    hi = hi.max(eq.ratio);
                }
            }
        }
        Ok((exact_dev, lo, hi))
    };
    match run() {
        Ok((dev, lo, hi)) => SuiteOutcome::new(
            name,
            dev <= 1e-8 && lo >= 1.0 - 1e-12 && hi <= 9.0,
            dev,
            1e-8,
            format!("{} fields: k<=2 max |ratio-1| = {dev:.3e}; k=3,4 ratio in [{lo:.4}, {hi:.4}]", s.fields),
        ),
        Err(e) => SuiteOutcome::failed(name, e),
    }
}

/// Largest ratio over the suite on the coarse grid and on the grid with
/// twice the resolution, plus the drift factor between them.
fn drift(s: &VerifySettings, ratio: impl Fn(&mut ChaCha8Rng, &RadialBasis, usize) -> Result<Vec<f64>>) -> Result<(f64, f64, f64)> {
    let basis = random_basis(s)?;
    let coarse = ratio(&mut ChaCha8Rng::seed_from_u64(s.seed), &basis, s.m_coarse)?;
    let fine = ratio(&mut ChaCha8Rng::seed_from_u64(s.seed), &basis, 2 * s.m_coarse - 1)?;
    let a = coarse.iter().copied().fold(0.0, f64::max);
    let b = fine.iter().copied().fold(0.0, f64::max);
    let per_field = coarse.iter().zip(&fine).map(|(u, v)| (u / v).max(v / u)).fold(1.0, f64::max);
    Ok((a, b, per_field))
}

pub fn algebra_suite(s: &VerifySettings) -> SuiteOutcome {
    let name = "banach_algebra";
    let n = s.fields;
    let res = drift(s, |rng, basis, m| {
        (0..n)
            .map(|_| {
                let f = RandomField::draw(rng, -1.0, 1.0, basis.n, false).sample(basis, m);
                let g = RandomField::draw(rng, -1.0, 1.0, basis.n, false).sample(basis, m);
                Ok(algebra_check(&f, &g, basis, 2)?.ratio)
            })
            .collect()
    });
    match res {
        Ok((a, b, d)) => SuiteOutcome::new(
            name,
            d < 2.0 && a.is_finite() && b.is_finite(),
            d,
            2.0,
            format!("{n} pairs: max ||fg||/||f|| ||g|| = {a:.4} (M={}), {b:.4} (M={})", s.m_coarse, 2 * s.m_coarse - 1),
        ),
        Err(e) => SuiteOutcome::failed(name, e),
    }
}

pub fn linf_suite(s: &VerifySettings) -> SuiteOutcome {
    let name = "linf_bound";
    let n = s.fields;
    let res = drift(s, |rng, basis, m| {
        (0..n)
            .map(|_| {
                let g = RandomField::draw(rng, -1.0, 1.0, basis.n, true).sample(basis, m);
                Ok(linf_bound_check(&g, basis)?.ratio)
            })
            .collect()
    });
    match res {
        Ok((a, b, d)) => SuiteOutcome::new(
            name,
            d < 2.0 && a.is_finite() && b.is_finite(),
            d,
            2.0,
            format!("{n} fields: max sup|g|^2 / ||g||_H2^2 = {a:.4} (M={}), {b:.4} (M={})", s.m_coarse, 2 * s.m_coarse - 1),
        ),
        Err(e) => SuiteOutcome::failed(name, e),
    }
}

pub fn extension_suite(flow: &BackgroundFlow1D) -> SuiteOutcome {
    let name = "extension";
    match extend_background(flow, None, None) {
        Ok(e) => {
            let ext_coercive = e.extended_coercivity_margins.iter().copied().fold(f64::INFINITY, f64::min);
            let ext_multiplier = e.extended_multiplier_margins.iter().copied().fold(f64::INFINITY, f64::min);
            let ends = e.a11_bar.last() == Some(&1.0) && e.a1_bar.last() == Some(&-e.k0);
            SuiteOutcome::new(
                name,
                ext_coercive >= e.kappa_star && ext_multiplier >= 4.0 && ends,
                ext_multiplier,
                4.0,
                format!("k0 = {}, d0 = {}, extended coercivity margin = {ext_coercive:.6} vs kappa* = {:.6}, extended multiplier margin = {ext_multiplier:.4}", e.k0, e.d0, e.kappa_star),
            )
        }
        Err(e) => SuiteOutcome::failed(name, e),
    }
}

/// Every suite, in table order.
pub fn run_all(gas: &GasConfig, force: &ForceModel, m: usize, settings: &VerifySettings) -> Vec<SuiteOutcome> {
    let mut out = vec![conservation_suite(gas, force, &[m, 2 * m, 4 * m])];
    match solve_background(gas, force, m) {
        Ok(flow) => {
            out.push(background_suite(&flow));
            out.push(multiplier_suite(&flow));
            out.push(extension_suite(&flow));
        }
        Err(e) => {
            for name in ["background", "multiplier", "extension"] {
                out.push(SuiteOutcome::failed(name, &e));
            }
        }
    }
    out.push(orthonormality_suite());
    out.push(equivalence_suite(settings));
    out.push(algebra_suite(settings));
    out.push(linf_suite(settings));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_zero_fields_vanish_on_axis() {
        let basis = RadialBasis::build(5, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = RandomField::draw(&mut rng, -1.0, 1.0, 5, true).sample(&basis, 21);
        assert!(f.axis_values(&basis).iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn same_seed_same_field() {
        let basis = RadialBasis::build(4, 32).unwrap();
        let a = RandomField::draw(&mut ChaCha8Rng::seed_from_u64(9), -1.0, 1.0, 4, false).sample(&basis, 11);
        let b = RandomField::draw(&mut ChaCha8Rng::seed_from_u64(9), -1.0, 1.0, 4, false).sample(&basis, 11);
        assert_eq!(a, b);
    }
}
