//! Cylinder functions of integer order 0..=3 and zeros of `J1`.
//!
//! Small arguments use the ascending series of `J_n(z)/z^n`, which stays
//! regular at the origin. Larger arguments use backward recurrence.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 5.0;

/// `J_n(z) / z^n` by the ascending series.
fn scaled_series(n: usize, z: f64) -> f64 {
    let q = -0.25 * z * z;
    let mut denom = 1.0;
    for k in 1..=n {
        denom *= 2.0 * k as f64;
    }
    let mut term = 1.0 / denom;
    let mut sum = term;
    for k in 1..200 {
        term *= q / (k as f64 * (n + k) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// `J0..J3` by Miller's backward recurrence, normalized with
/// `J0 + 2 Σ J_{2k} = 1`.
fn miller(z: f64) -> [f64; 4] {
    let start = (z + 20.0 + (40.0 * z).sqrt()) as usize;
    let start = start + start % 2;
    let mut out = [0.0; 4];
    let (mut jp, mut j) = (0.0, 1e-280);
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let jm = 2.0 * k as f64 / z * j - jp;
        jp = j;
        j = jm;
        let order = k - 1;
        if order <= 3 {
            out[order] = j;
        }
        if order > 0 && order % 2 == 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            // rescale to avoid overflow
            jp *= 1e-250;
            j *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += j;
    out.map(|v| v / norm)
}

/// Bessel function of the first kind, order `n` in 0..=3, for `z >= 0`.
pub fn bessel_j(n: usize, z: f64) -> f64 {
    assert!(n <= 3, "order above 3 not supported");
    let z = z.abs();
    if z <= SERIES_LIMIT {
        return scaled_series(n, z) * z.powi(n as i32);
    }
    miller(z)[n]
}

/// `J_n(z) / z^n`, regular at `z = 0` where it equals `1 / (2^n n!)`.
pub fn bessel_j_scaled(n: usize, z: f64) -> f64 {
    let z = z.abs();
    if z <= SERIES_LIMIT {
        scaled_series(n, z)
    } else {
        bessel_j(n, z) / z.powi(n as i32)
    }
}

/// The `k`-th positive zero of `J1` (k starts at 1).
pub fn j1_zero(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::RootBracket("zero index starts at 1".into()));
    }
    let beta = (k as f64 + 0.25) * PI;
    let guess = beta - 3.0 / (8.0 * beta);
    let (mut lo, mut hi) = (guess - 0.3, guess + 0.3);
    let (flo, fhi) = (bessel_j(1, lo), bessel_j(1, hi));
    if flo * fhi > 0.0 {
        return Err(Error::RootBracket(format!(
            "no sign change of J1 around {guess:.6} (zero {k})"
        )));
    }
    let mut x = guess;
    for _ in 0..200 {
        let f = bessel_j(1, x);
        if f == 0.0 {
            return Ok(x);
        }
        if (f > 0.0) == (flo > 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        let df = bessel_j(0, x) - f / x;
        let step = f / df;
        let mut next = x - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-15 * x {
            return Ok(next);
        }
        x = next;
        if hi - lo < 1e-15 * x {
            break;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integral_rep(n: usize, z: f64) -> f64 {
        // periodic trapezoid on the Bessel integral converges spectrally
        let m = 2000;
        let mut s = 0.0;
        for i in 0..m {
            let t = PI * (i as f64 + 0.5) / m as f64;
            s += (n as f64 * t - z * t.sin()).cos();
        }
        s / m as f64
    }

    #[test]
    fn matches_integral_representation() {
        for &z in &[0.0, 0.3, 1.0, 3.8, 7.5, 11.9, 12.1, 20.0, 47.3, 98.0] {
            for n in 0..=3 {
                let a = bessel_j(n, z);
                let b = integral_rep(n, z);
                assert!((a - b).abs() < 2e-13, "n={n} z={z}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn scaled_values_at_origin() {
        assert_eq!(bessel_j_scaled(0, 0.0), 1.0);
        assert!((bessel_j_scaled(2, 0.0) - 0.125).abs() < 1e-16);
        assert!((bessel_j_scaled(3, 0.0) - 1.0 / 48.0).abs() < 1e-16);
    }

    #[test]
    fn first_zeros_of_j1() {
        assert!((j1_zero(1).unwrap() - 3.831_705_970_207_512).abs() < 1e-12);
        assert!((j1_zero(2).unwrap() - 7.015_586_669_815_619).abs() < 1e-12);
        for k in 1..40 {
            assert!(bessel_j(1, j1_zero(k).unwrap()).abs() < 1e-14);
        }
    }
}
