//! Banded LU factorization with partial pivoting, in the LAPACK band layout.

use crate::error::{Error, Result};

/// Band matrix stored column by column with `kl` extra rows for pivot fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, ldab, ab: vec![0.0; ldab * n] }
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.ab[self.pos(i, j)]
        } else {
            0.0
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        if !self.in_band(i, j) {
            return Err(Error::SingularAssembly(format!(
                "entry ({i}, {j}) outside the band (kl={}, ku={})",
                self.kl, self.ku
            )));
        }
        let p = self.pos(i, j);
        self.ab[p] += v;
        Ok(())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for (i, yi) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yi += self.ab[self.pos(i, j)] * x[j];
            }
        }
        y
    }

    /// Observed lower and upper bandwidth of the nonzero pattern.
    pub fn bandwidth(&self) -> (usize, usize) {
        let (mut lo, mut up) = (0, 0);
        for j in 0..self.n {
            for i in j.saturating_sub(self.ku)..=(j + self.kl).min(self.n - 1) {
                if self.ab[self.pos(i, j)] != 0.0 {
                    if i > j {
                        lo = lo.max(i - j);
                    } else {
                        up = up.max(j - i);
                    }
                }
            }
        }
        (lo, up)
    }

    fn row_range(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        i.saturating_sub(self.kl)..=(i + self.ku).min(self.n - 1)
    }

    /// Largest magnitude in row i.
    pub fn row_max(&self, i: usize) -> f64 {
        self.row_range(i).map(|j| self.ab[self.pos(i, j)].abs()).fold(0.0, f64::max)
    }

    pub fn scale_row(&mut self, i: usize, s: f64) {
        for j in self.row_range(i) {
            let p = self.pos(i, j);
            self.ab[p] *= s;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.ab.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// In-place LU with row interchanges.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.ku + kl;
        let tiny = 1e-15 * self.max_abs();
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = 0.0;
            for p in 0..=km {
                let v = self.ab[j * self.ldab + kv + p].abs();
                if v > best {
                    best = v;
                    jp = p;
                }
            }
            ipiv[j] = j + jp;
            if best <= tiny {
                return Err(Error::SingularAssembly(format!("zero pivot in column {j} of {n}")));
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.pos(j, c);
                    let b = self.pos(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            let piv = self.ab[self.pos(j, j)];
            let base = j * self.ldab + kv;
            for p in 1..=km {
                self.ab[base + p] /= piv;
            }
            for c in j + 1..=ju {
                let t = self.ab[self.pos(j, c)];
                if t == 0.0 {
                    continue;
                }
                let cbase = c * self.ldab + kv + j - c;
                for p in 1..=km {
                    let l = self.ab[base + p];
                    self.ab[cbase + p] -= l * t;
                }
            }
        }
        Ok(BandLu { lu: self, ipiv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    lu: BandMatrix,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let a = &self.lu;
        let n = a.n;
        let kv = a.ku + a.kl;
        let mut x = b.to_vec();
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(j, p);
            }
            let km = a.kl.min(n - 1 - j);
            let xj = x[j];
            if xj != 0.0 {
                for q in 1..=km {
                    x[j + q] -= a.ab[j * a.ldab + kv + q] * xj;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for c in i + 1..=(i + kv).min(n - 1) {
                s -= a.ab[a.pos(i, c)] * x[c];
            }
            x[i] = s / a.ab[a.pos(i, i)];
        }
        x
    }
}

/// Factor, solve, and apply one step of iterative refinement. Returns the
/// solution and the final residual `‖Ax - b‖∞`.
pub fn solve_refined(a: &BandMatrix, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let lu = a.clone().factor()?;
    let mut x = lu.solve(b);
    let r: Vec<f64> = a.matvec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    let dx = lu.solve(&r);
    for (xi, d) in x.iter_mut().zip(&dx) {
        *xi += d;
    }
    let res = a.matvec(&x).iter().zip(b).map(|(ax, bi)| (ax - bi).abs()).fold(0.0, f64::max);
    Ok((x, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn agrees_with_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, kl, ku) = (40, 5, 3);
        let mut band = BandMatrix::new(n, kl, ku);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // weak diagonal forces pivoting
                let v: f64 = rng.gen_range(-1.0..1.0) * if i == j { 0.01 } else { 1.0 };
                band.add(i, j, v).unwrap();
                dense[i][j] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let (x, res) = solve_refined(&band, &b).unwrap();
        let y = dense_solve(dense, b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-9 * (1.0 + v.abs()));
        }
        assert!(res < 1e-12);
    }

    #[test]
    fn singular_and_out_of_band() {
        let mut a = BandMatrix::new(3, 1, 1);
        assert!(a.add(0, 2, 1.0).is_err());
        a.add(0, 0, 1.0).unwrap();
        a.add(1, 0, 1.0).unwrap();
        assert!(a.factor().is_err());
    }
}
