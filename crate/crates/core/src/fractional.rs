//! Half-order Riemann–Liouville operators on uniform grids.
//!
//! I^{1/2} f(t) = int_0^t f(s) / sqrt(t - s) ds, D^{1/2} f = d/dt I^{1/2} f.

use crate::conv::causal_convolution;
use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_end: f64,
    pub n: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(t_end: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("time grid needs N >= 2, got {n}")));
        }
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("time horizon must be positive, got {t_end}")));
        }
        Ok(TimeGrid { t_end, n, dt: t_end / n as f64 })
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.n { self.t_end } else { j as f64 * self.dt }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|j| self.node(j)).collect()
    }

    /// Index of the node closest to t.
    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub grid: TimeGrid,
    pub values: Vec<C64>,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n + 1 {
            return Err(Error::InvalidParameter(format!(
                "series of length {} on a grid with {} nodes",
                values.len(),
                grid.n + 1
            )));
        }
        Ok(TimeSeries { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> C64>(grid: TimeGrid, f: F) -> Self {
        let values = (0..=grid.n).map(|j| f(grid.node(j))).collect();
        TimeSeries { grid, values }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        TimeSeries { grid, values: vec![C64::new(0.0, 0.0); grid.n + 1] }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &TimeSeries) -> TimeSeries {
        TimeSeries {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn map<F: Fn(C64) -> C64>(&self, f: F) -> TimeSeries {
        TimeSeries { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Every `stride`-th node, on the coarser grid.
    pub fn subsample(&self, stride: usize) -> Result<TimeSeries> {
        if stride == 0 || self.grid.n % stride != 0 {
            return Err(Error::InvalidParameter(format!("stride {stride} does not divide N = {}", self.grid.n)));
        }
        let grid = TimeGrid::new(self.grid.t_end, self.grid.n / stride)?;
        Ok(TimeSeries { grid, values: self.values.iter().step_by(stride).copied().collect() })
    }
}

/// Product-integration weights of the Abel kernel against hat functions, in units of sqrt(dt).
/// Entry n is the weight of node j - n in I^{1/2} at node j, for interior nodes.
pub fn abel_lag_weights(n_max: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n_max + 1);
    w.push(4.0 / 3.0);
    for n in 1..=n_max {
        w.push(abel_second_difference(n));
    }
    w
}

/// (4/3) [(n+1)^{3/2} - 2 n^{3/2} + (n-1)^{3/2}], evaluated without cancellation for large n.
fn abel_second_difference(n: usize) -> f64 {
    let nf = n as f64;
    if n < 16 {
        return 4.0 / 3.0 * ((nf + 1.0).powf(1.5) - 2.0 * nf.powf(1.5) + (nf - 1.0).powf(1.5));
    }
    // 2 sum_k F^{(2k)}(n) / (2k)! with F = (4/3) u^{3/2}
    let inv2 = 1.0 / (nf * nf);
    let mut term = 1.0 / nf.sqrt();
    let mut sum = term;
    let mut k = 1.0;
    loop {
        let ratio = (2.0 * k - 1.5) * (2.0 * k - 0.5) / ((2.0 * k + 1.0) * (2.0 * k + 2.0)) * inv2;
        term *= ratio;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Weight of node 0 in I^{1/2} at node j >= 1, in units of sqrt(dt).
pub fn abel_endpoint_weight(j: usize) -> f64 {
    let jf = j as f64;
    2.0 * jf.sqrt() - 4.0 / 3.0 * (jf.powf(1.5) - (jf - 1.0).powf(1.5))
}

/// Node-exact product integration of the piecewise-linear interpolant of f.
pub fn half_integral(f: &TimeSeries) -> TimeSeries {
    let n = f.grid.n;
    let sdt = f.grid.dt.sqrt();
    let w: Vec<C64> = abel_lag_weights(n).into_iter().map(|v| C64::new(v, 0.0)).collect();
    let mut inner = f.values.clone();
    inner[0] = C64::new(0.0, 0.0);
    let conv = causal_convolution(&w, &inner);
    let mut out = vec![C64::new(0.0, 0.0); n + 1];
    for j in 1..=n {
        out[j] = (conv[j] + f.values[0] * abel_endpoint_weight(j)) * sdt;
    }
    TimeSeries { grid: f.grid, values: out }
}

/// d/dt of the discrete I^{1/2}: centered inside, one-sided second order at both ends.
/// The half-integral is first corrected for s^{1/2} and s^{3/2} components of f, the way
/// half-integrals of smooth data start; without that the error at the first nodes is O(dt).
pub fn half_derivative(f: &TimeSeries) -> TimeSeries {
    derivative(&half_integral_with_starting_terms(f))
}

/// Inverse of the 4x4 matrix of 1, x^{1/2}, x, x^{3/2} at x = 0..3 (rows: basis, columns: node).
fn starting_fit() -> [[f64; 4]; 4] {
    let mut a = [[0.0; 8]; 4];
    for (m, row) in a.iter_mut().enumerate() {
        let x = m as f64;
        row[..4].copy_from_slice(&[1.0, x.sqrt(), x, x.powf(1.5)]);
        row[4 + m] = 1.0;
    }
    // Gauss-Jordan with partial pivoting
    for c in 0..4 {
        let p = (c..4).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..4 {
            if r != c {
                let f = a[r][c];
                let pivot = a[c];
                for (v, pv) in a[r].iter_mut().zip(pivot) {
                    *v -= f * pv;
                }
            }
        }
    }
    // a now holds [I | V^{-1}] with V[m][k] = basis k at node m, so alpha = V^{-1} f
    let mut inv = [[0.0; 4]; 4];
    for k in 0..4 {
        for m in 0..4 {
            inv[k][m] = a[k][4 + m];
        }
    }
    inv
}

fn half_integral_with_starting_terms(f: &TimeSeries) -> TimeSeries {
    let mut out = half_integral(f);
    let n = f.grid.n;
    if n < 4 {
        return out;
    }
    let unit = TimeGrid { t_end: n as f64, n, dt: 1.0 };
    let inv = starting_fit();
    let sdt = f.grid.dt.sqrt();
    // (power, I^{1/2} x^p / x^{p + 1/2})
    for (k, p, beta) in [(1, 0.5, PI / 2.0), (3, 1.5, 3.0 * PI / 8.0)] {
        let alpha: C64 = (0..4).map(|m| f.values[m] * inv[k][m]).sum();
        if alpha == C64::new(0.0, 0.0) {
            continue;
        }
        let disc = half_integral(&TimeSeries::from_fn(unit, |x| C64::new(x.powf(p), 0.0)));
        for j in 1..=n {
            let exact = beta * (j as f64).powf(p + 0.5);
            out.values[j] += alpha * (exact - disc.values[j].re) * sdt;
        }
    }
    out
}

pub(crate) fn derivative(i: &TimeSeries) -> TimeSeries {
    let n = i.grid.n;
    let dt = i.grid.dt;
    let v = &i.values;
    let mut out = vec![C64::new(0.0, 0.0); n + 1];
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt);
    for j in 1..n {
        out[j] = (v[j + 1] - v[j - 1]) / (2.0 * dt);
    }
    out[n] = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * dt);
    TimeSeries { grid: i.grid, values: out }
}

/// Weights of int_0^{t_j} (t_j - s)^{-1/2} s^{-1/2} g(s) ds against hats in g.
/// Row j, entry m; exact for piecewise-linear g.
fn singular_row(j: usize) -> Vec<f64> {
    // closed-form cell moments in units where dt = 1, t = j
    let t = j as f64;
    let prim0 = |s: f64| 2.0 * (s / t).sqrt().min(1.0).asin();
    let prim1 = |s: f64| t * (s / t).sqrt().min(1.0).asin() - (s * (t - s)).max(0.0).sqrt();
    let mut w = vec![0.0; j + 1];
    for m in 0..j {
        let (a, b) = (m as f64, m as f64 + 1.0);
        let m0 = prim0(b) - prim0(a);
        let m1 = prim1(b) - prim1(a);
        // g(s) = g_m (b - s) + g_{m+1} (s - a)
        w[m] += b * m0 - m1;
        w[m + 1] += m1 - a * m0;
    }
    w
}

/// I^{1/2}[s^{-1/2} g(s)] for a regular g: the singular factor is integrated exactly.
/// With g constant the result is pi g at every node.
pub fn half_integral_singular(g: &TimeSeries) -> TimeSeries {
    let n = g.grid.n;
    let mut out = vec![C64::new(0.0, 0.0); n + 1];
    for j in 1..=n {
        // the weights are scale invariant: (t-s)^{-1/2} s^{-1/2} ds is dimensionless
        let w = singular_row(j);
        out[j] = w.iter().zip(&g.values).map(|(a, b)| b * *a).sum();
    }
    TimeSeries { grid: g.grid, values: out }
}

/// Value of I^{1/2}[c / sqrt(s)] at every node (= pi c).
pub fn half_integral_of_inverse_sqrt(grid: TimeGrid, c: C64) -> TimeSeries {
    TimeSeries { grid, values: (0..=grid.n).map(|j| if j == 0 { C64::new(0.0, 0.0) } else { c * PI }).collect() }
}

/// int_0^{t_j} a(s) b(t_j - s) ds with both factors piecewise linear, exact per cell.
pub(crate) fn linear_product_convolution(a: &TimeSeries, b: &TimeSeries) -> TimeSeries {
    let n = a.grid.n;
    let dt = a.grid.dt;
    // per cell [m, m+1]: b runs over [j-m-1, j-m] reversed
    // int (a0 (1-x) + a1 x)(b0 (1-x) + b1 x) dx = (2 a0 b0 + a0 b1 + a1 b0 + 2 a1 b1) / 6
    // with b0 = b(j-m), b1 = b(j-m-1)
    let av = &a.values;
    let bv = &b.values;
    let c = |x: &[C64], y: &[C64]| causal_convolution(x, y);
    let zero = C64::new(0.0, 0.0);
    // shifted copies: a_m and a_{m+1} with m in 0..j-1
    let mut a_lo = av.clone();
    a_lo[n] = zero;
    let mut a_hi = vec![zero; n + 1];
    a_hi[..n].copy_from_slice(&av[1..]);
    let mut b_hi = vec![zero; n + 1];
    b_hi[1..].copy_from_slice(&bv[1..]);
    let mut b_lo = vec![zero; n + 1];
    b_lo[1..].copy_from_slice(&bv[..n]);
    // sum_{m=0}^{j-1} a_lo[m] b(j-m) etc.; index shift handled by zero-padding at lag 0
    let s00 = c(&b_hi, &a_lo);
    let s01 = c(&b_lo, &a_lo);
    let s10 = c(&b_hi, &a_hi);
    let s11 = c(&b_lo, &a_hi);
    let mut out = vec![zero; n + 1];
    for j in 1..=n {
        out[j] = (2.0 * s00[j] + s01[j] + s10[j] + 2.0 * s11[j]) * (dt / 6.0);
    }
    TimeSeries { grid: a.grid, values: out }
}

/// Same as [`linear_product_convolution`], but on the cell touching s = 0 the first factor is
/// interpolated in sqrt(s), and on the cell touching s = t the second factor in sqrt(t - s).
/// Half-integrals and half-derivatives (of data vanishing at 0) start like sqrt(s).
fn root_aware_product_convolution(a: &TimeSeries, b: &TimeSeries) -> TimeSeries {
    let mut out = linear_product_convolution(a, b);
    let dt = a.grid.dt;
    let av = &a.values;
    let bv = &b.values;
    // cell integrals on [0, 1] of (a0 + da phi)(b0 + db psi)
    let cell = |a0: C64, da: C64, b0: C64, db: C64, ip: f64, iq: f64, ipq: f64| -> C64 {
        a0 * b0 + a0 * db * iq + da * b0 * ip + da * db * ipq
    };
    for j in 1..=a.grid.n {
        // linear-linear values of the two end cells, to be replaced
        let lin = |m: usize| -> C64 {
            let (a0, a1) = (av[m], av[m + 1]);
            let (b0, b1) = (bv[j - m], bv[j - m - 1]);
            (2.0 * a0 * b0 + a0 * b1 + a1 * b0 + 2.0 * a1 * b1) / 6.0
        };
        let mut corr = -lin(0);
        if j == 1 {
            // a in sqrt(x), b in sqrt(1 - x) on the same cell
            corr += cell(av[0], av[1] - av[0], bv[0], bv[1] - bv[0], 2.0 / 3.0, 2.0 / 3.0, PI / 8.0);
        } else {
            let (b0, b1) = (bv[j], bv[j - 1]);
            corr += cell(av[0], av[1] - av[0], b0, b1 - b0, 2.0 / 3.0, 0.5, 0.4);
            let m = j - 1;
            corr -= lin(m);
            let (a0, a1) = (av[m], av[m + 1]);
            corr += cell(a0, a1 - a0, bv[0], bv[1] - bv[0], 0.5, 2.0 / 3.0, 4.0 / 15.0);
        }
        out.values[j] += corr * dt;
    }
    out
}

/// Residual of int_0^t g(s) f(t-s) ds = (1/pi) int_0^t I^{1/2}g(s) D^{1/2}f(t-s) ds at every node.
pub fn convolve_halfkernel_identity_check(g: &TimeSeries, f: &TimeSeries) -> Result<TimeSeries> {
    if g.grid != f.grid {
        return Err(Error::InvalidParameter("series on different grids".into()));
    }
    let scale = f.max_abs().max(1.0);
    if f.values[0].norm() > 1e-14 * scale {
        return Err(Error::Domain("identity check needs f(0) = 0".into()));
    }
    let lhs = linear_product_convolution(g, f);
    let ig = half_integral(g);
    let df = half_derivative(f);
    let rhs = root_aware_product_convolution(&ig, &df);
    Ok(TimeSeries {
        grid: g.grid,
        values: lhs.values.iter().zip(&rhs.values).map(|(l, r)| l - r / PI).collect(),
    })
}
