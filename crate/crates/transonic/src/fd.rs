//! Finite differences and quadrature on uniform grids.

/// Fornberg weights for derivatives 0..=m at `z` from nodes `x`.
/// Returns `w[k][i]`, the weight of node `i` in derivative `k`.
pub fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Stencil `(start, weights)` for derivative `k` at node `i` of an `n`-node
/// uniform grid with unit spacing, accurate to fourth order.
pub fn stencil4(k: usize, i: usize, n: usize) -> (usize, Vec<f64>) {
    let central = 2 * k.div_ceil(2) + 3;
    let width = if i >= central / 2 && i + central / 2 < n { central } else { k + 4 };
    let width = width.min(n);
    let half = width / 2;
    let start = i.saturating_sub(half).min(n - width);
    let nodes: Vec<f64> = (start..start + width).map(|p| p as f64).collect();
    let w = fornberg(i as f64, &nodes, k);
    (start, w[k].clone())
}

/// Precomputed fourth-order derivative operator on a uniform grid.
#[derive(Debug, Clone)]
pub struct Diff {
    pub h: f64,
    pub n: usize,
    stencils: Vec<Vec<(usize, Vec<f64>)>>,
}

impl Diff {
    pub fn new(n: usize, h: f64, max_order: usize) -> Self {
        let stencils = (0..=max_order)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        if k == 0 {
                            (i, vec![1.0])
                        } else {
                            let (s, w) = stencil4(k, i, n);
                            let scale = h.powi(k as i32);
                            (s, w.into_iter().map(|v| v / scale).collect())
                        }
                    })
                    .collect()
            })
            .collect();
        Diff { h, n, stencils }
    }

    pub fn max_order(&self) -> usize {
        self.stencils.len() - 1
    }

    /// k-th derivative of a strided family: `values[i * stride + c]` for each
    /// component `c < stride`.
    pub fn apply(&self, k: usize, values: &[f64], stride: usize) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        for i in 0..self.n {
            let (s, w) = &self.stencils[k][i];
            for (o, &wt) in w.iter().enumerate() {
                let row = (s + o) * stride;
                for c in 0..stride {
                    out[i * stride + c] += wt * values[row + c];
                }
            }
        }
        out
    }

    pub fn at(&self, k: usize, values: &[f64], i: usize) -> f64 {
        let (s, w) = &self.stencils[k][i];
        w.iter().enumerate().map(|(o, wt)| wt * values[s + o]).sum()
    }
}

/// Gregory end-corrected trapezoid weights, exact for cubics (needs n >= 6).
pub fn gregory_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n < 6 {
        // plain trapezoid as a fallback for tiny grids
        if n >= 2 {
            w[0] = 0.5 * h;
            w[n - 1] = 0.5 * h;
        }
        return w;
    }
    let ends = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    for (k, e) in ends.iter().enumerate() {
        w[k] = e * h;
        w[n - 1 - k] = e * h;
    }
    w
}

/// Unit-interval smooth step: 0 for t <= 0, 1 for t >= 1, infinitely smooth.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// `smooth_step` with its first two derivatives.
pub fn smooth_step_derivs(t: f64) -> [f64; 3] {
    if t <= 0.0 {
        return [0.0; 3];
    }
    if t >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    // s = 1 / (1 + e^D) with D = 1/t - 1/(1-t)
    let u = 1.0 - t;
    let d = 1.0 / t - 1.0 / u;
    let d1 = -1.0 / (t * t) - 1.0 / (u * u);
    let d2 = 2.0 / (t * t * t) - 2.0 / (u * u * u);
    let s = 1.0 / (1.0 + d.exp());
    let sc = 1.0 / (1.0 + (-d).exp());
    let ss = s * sc;
    let s1 = -ss * d1;
    let s2 = -s1 * (1.0 - 2.0 * s) * d1 - ss * d2;
    [s, s1, s2]
}
