//! Causal discrete convolutions, both one-shot and while the signal is being produced.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use std::cell::RefCell;

const DIRECT_LIMIT: usize = 64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Full linear convolution of a and b (length a.len() + b.len() - 1).
pub fn linear_convolution(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= DIRECT_LIMIT {
        let mut out = vec![C64::new(0.0, 0.0); out_len];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    let size = out_len.next_power_of_two();
    let (fwd, inv) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(size), p.plan_fft_inverse(size))
    });
    let mut fa = vec![C64::new(0.0, 0.0); size];
    let mut fb = vec![C64::new(0.0, 0.0); size];
    fa[..a.len()].copy_from_slice(a);
    fb[..b.len()].copy_from_slice(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.truncate(out_len);
    for v in fa.iter_mut() {
        *v *= scale;
    }
    fa
}

/// out[j] = sum_{m=0}^{j} w[j-m] x[m], for j < x.len().
pub fn causal_convolution(w: &[C64], x: &[C64]) -> Vec<C64> {
    let n = x.len();
    let mut out = linear_convolution(&w[..n.min(w.len())], x);
    out.resize(n, C64::new(0.0, 0.0));
    out
}

/// Marches x[0..n] where x[j] may depend on the strict histories
/// h_s[j] = sum_{m<j} w_s[j-m] x_s[m] of every stream s.
///
/// `step(j, &h)` returns the new values x_s[j]. Cost is O(n log^2 n) per stream.
pub fn march<F>(n: usize, kernels: &[Vec<C64>], mut step: F) -> Vec<Vec<C64>>
where
    F: FnMut(usize, &[C64]) -> Vec<C64>,
{
    let s = kernels.len();
    for k in kernels {
        assert!(k.len() >= n, "kernel shorter than the march");
    }
    let mut x = vec![vec![C64::new(0.0, 0.0); n]; s];
    let mut h = vec![vec![C64::new(0.0, 0.0); n]; s];
    solve(0, n, kernels, &mut x, &mut h, &mut step);
    x
}

fn solve<F>(l: usize, r: usize, w: &[Vec<C64>], x: &mut [Vec<C64>], h: &mut [Vec<C64>], step: &mut F)
where
    F: FnMut(usize, &[C64]) -> Vec<C64>,
{
    if r - l <= DIRECT_LIMIT {
        let mut hist = vec![C64::new(0.0, 0.0); w.len()];
        for j in l..r {
            for s in 0..w.len() {
                let mut acc = h[s][j];
                for m in l..j {
                    acc += w[s][j - m] * x[s][m];
                }
                hist[s] = acc;
            }
            let v = step(j, &hist);
            for s in 0..w.len() {
                x[s][j] = v[s];
            }
        }
        return;
    }
    let mid = l + (r - l) / 2;
    solve(l, mid, w, x, h, step);
    for s in 0..w.len() {
        // lags from 1 to r-1-l
        let part = linear_convolution(&x[s][l..mid], &w[s][..r - l]);
        for j in mid..r {
            h[s][j] += part[j - l];
        }
    }
    solve(mid, r, w, x, h, step);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let a: Vec<C64> = (0..300).map(|i| c((i as f64 * 0.1).sin(), 0.3)).collect();
        let b: Vec<C64> = (0..200).map(|i| c(1.0 / (1.0 + i as f64), -(i as f64) * 1e-3)).collect();
        let f = linear_convolution(&a, &b);
        for j in [0, 17, 250, 498] {
            let mut d = c(0.0, 0.0);
            for i in 0..a.len() {
                if j >= i && j - i < b.len() {
                    d += a[i] * b[j - i];
                }
            }
            assert!((f[j] - d).norm() < 1e-12);
        }
    }

    #[test]
    fn online_march_matches_sequential_loop() {
        // x_j = 1 + 0.01 * (history) solved with a diagonal weight, compare with O(n^2) loop
        let n = 1000;
        let w: Vec<C64> = (0..n).map(|k| c(1.0 / (1.0 + k as f64).sqrt(), 0.1)).collect();
        let out = march(n, &[w.clone()], |_, h| vec![(c(1.0, 0.0) - 0.01 * h[0]) / (1.0 + 0.01 * w[0])]);
        let mut x = vec![c(0.0, 0.0); n];
        for j in 0..n {
            let mut hist = c(0.0, 0.0);
            for m in 0..j {
                hist += w[j - m] * x[m];
            }
            x[j] = (c(1.0, 0.0) - 0.01 * hist) / (1.0 + 0.01 * w[0]);
        }
        for j in 0..n {
            assert!((out[0][j] - x[j]).norm() < 1e-12, "j={j}");
        }
    }
}
