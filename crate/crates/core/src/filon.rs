//! Oscillatory quadrature for integrands carrying a quadratic phase e^{-i t k^2}.
//!
//! Each piece is mapped to [-1, 1]; the residual chirp is folded into the amplitude,
//! the amplitude is expanded in Legendre polynomials and integrated against the
//! linear phase exactly through spherical Bessel functions.

use crate::quad::{gl_rule, GlRule};
use crate::special::spherical_bessel_j;
use num_complex::Complex64 as C64;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Largest residual chirp t h^2 / 4 allowed on one piece.
const CHIRP_MAX: f64 = 0.5;

struct Projector {
    n: usize,
    // row m: (2m+1)/2 * w_i * P_m(x_i)
    mat: Vec<f64>,
    bary: Vec<f64>,
}

fn projector(n: usize) -> Arc<Projector> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Projector>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("projector cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let rule = gl_rule(n);
            let mut mat = vec![0.0; n * n];
            for (i, &x) in rule.nodes.iter().enumerate() {
                let mut p_prev = 1.0;
                let mut p = x;
                for m in 0..n {
                    let pm = if m == 0 {
                        1.0
                    } else if m == 1 {
                        x
                    } else {
                        let next = ((2 * m - 1) as f64 * x * p - (m - 1) as f64 * p_prev) / m as f64;
                        p_prev = p;
                        p = next;
                        next
                    };
                    mat[m * n + i] = (2 * m + 1) as f64 / 2.0 * rule.weights[i] * pm;
                }
            }
            let bary = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .enumerate()
                .map(|(i, (x, w))| {
                    let s = ((1.0 - x * x) * w).sqrt();
                    if i % 2 == 0 { s } else { -s }
                })
                .collect();
            Arc::new(Projector { n, mat, bary })
        })
        .clone()
}

/// int_{-1}^{1} A(x) e^{-i omega x} dx from the values of A at the Gauss–Legendre nodes.
pub fn filon_legendre(samples: &[C64], omega: f64) -> C64 {
    let n = samples.len();
    let proj = projector(n);
    let j = spherical_bessel_j(n - 1, omega.abs());
    let mut acc = C64::new(0.0, 0.0);
    // (-i)^m, with the sign of omega folded in through j_m(-x) = (-1)^m j_m(x)
    let mut phase = C64::new(1.0, 0.0);
    let step = if omega >= 0.0 { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) };
    for m in 0..proj.n {
        let row = &proj.mat[m * n..(m + 1) * n];
        let mut coef = C64::new(0.0, 0.0);
        for i in 0..n {
            coef += samples[i] * row[i];
        }
        acc += coef * phase * (2.0 * j[m]);
        phase *= step;
    }
    acc
}

fn piece<F: Fn(f64) -> C64>(g: &F, a: f64, b: f64, t: f64, rule: &GlRule) -> C64 {
    let h = b - a;
    let c = 0.5 * (a + b);
    let chirp = t * h * h / 4.0;
    let samples: Vec<C64> = rule
        .nodes
        .iter()
        .map(|&x| g(c + 0.5 * h * x) * C64::from_polar(1.0, -chirp * x * x))
        .collect();
    let omega = t * c * h;
    C64::from_polar(0.5 * h, -t * c * c) * filon_legendre(&samples, omega)
}

/// int_a^b g(k) e^{-i t k^2} dk with `n` nodes per piece.
pub fn chirp_integral<F: Fn(f64) -> C64>(g: F, a: f64, b: f64, t: f64, n: usize) -> C64 {
    if b <= a {
        return C64::new(0.0, 0.0);
    }
    let rule = gl_rule(n);
    let pieces = if t == 0.0 {
        1
    } else {
        let hmax = 2.0 * (CHIRP_MAX / t.abs()).sqrt();
        ((b - a) / hmax).ceil().max(1.0) as usize
    };
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|p| {
            let lo = a + p as f64 * h;
            let hi = if p + 1 == pieces { b } else { lo + h };
            piece(&g, lo, hi, t, &rule)
        })
        .sum()
}

/// Evaluate the degree n-1 interpolant through GL-node samples of a panel [a, b] at k.
pub fn panel_interpolate(a: f64, b: f64, samples: &[C64], k: f64) -> C64 {
    let n = samples.len();
    let proj = projector(n);
    let rule = gl_rule(n);
    let x = (2.0 * k - a - b) / (b - a);
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for i in 0..n {
        let d = x - rule.nodes[i];
        if d == 0.0 {
            return samples[i];
        }
        let w = proj.bary[i] / d;
        num += samples[i] * w;
        den += w;
    }
    num / den
}

/// int_a^b g(k) e^{-i t k^2} dk where g is only known at the GL nodes of the panel.
pub fn chirp_integral_panel(a: f64, b: f64, samples: &[C64], t: f64) -> C64 {
    let n = samples.len();
    let h = b - a;
    if t.abs() * h * h / 4.0 <= CHIRP_MAX {
        let rule = gl_rule(n);
        let c = 0.5 * (a + b);
        let chirp = t * h * h / 4.0;
        let amp: Vec<C64> = rule
            .nodes
            .iter()
            .zip(samples)
            .map(|(&x, s)| s * C64::from_polar(1.0, -chirp * x * x))
            .collect();
        return C64::from_polar(0.5 * h, -t * c * c) * filon_legendre(&amp, t * c * h);
    }
    chirp_integral(|k| panel_interpolate(a, b, samples, k), a, b, t, n)
}

/// int_K^inf e^{-i t k^2} dk for t != 0.
pub fn fresnel_tail(kc: f64, t: f64) -> C64 {
    if t < 0.0 {
        return fresnel_tail(kc, -t).conj();
    }
    assert!(t > 0.0, "fresnel_tail needs t != 0");
    let z = t * kc * kc;
    if z >= 25.0 {
        let lead = C64::from_polar(1.0, -z) / C64::new(0.0, 2.0 * t * kc);
        let ratio = C64::new(0.0, 2.0 * z);
        let mut term = C64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..200 {
            let next = -term * (2 * n - 1) as f64 / ratio;
            if next.norm() > term.norm() {
                break;
            }
            term = next;
            sum += term;
            if term.norm() < 1e-18 {
                break;
            }
        }
        lead * sum
    } else {
        let full = 0.5 * (PI / C64::new(0.0, t)).sqrt();
        full - chirp_integral(|_| C64::new(1.0, 0.0), 0.0, kc, t, 16)
    }
}

/// int_K^inf k^{-2} e^{-i t k^2} dk; at t = 0 this is 1/K.
pub fn inverse_square_tail(kc: f64, t: f64) -> C64 {
    if t == 0.0 {
        return C64::new(1.0 / kc, 0.0);
    }
    C64::from_polar(1.0 / kc, -t * kc * kc) - C64::new(0.0, 2.0 * t) * fresnel_tail(kc, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive;

    #[test]
    fn filon_matches_adaptive_on_smooth_amplitude() {
        let g = |k: f64| C64::new((-0.3 * k * k).exp(), 0.2 * k);
        for &t in &[0.0, 0.7, 5.0, 40.0] {
            let f = chirp_integral(g, 0.5, 6.0, t, 16);
            let r = adaptive(|k| g(k) * C64::from_polar(1.0, -t * k * k), 0.5, 6.0, 1e-15, 1e-14);
            assert!((f - r).norm() < 1e-11, "t={t} {f} {r}");
        }
    }

    #[test]
    fn panel_interpolation_is_exact_for_polynomials() {
        let rule = gl_rule(8);
        let (a, b) = (1.0, 3.0);
        let p = |k: f64| C64::new(k.powi(5) - 2.0 * k, k * k);
        let s: Vec<C64> = rule.nodes.iter().map(|x| p(2.0 + x)).collect();
        for &k in &[1.1, 1.77, 2.0, 2.9] {
            assert!((panel_interpolate(a, b, &s, k) - p(k)).norm() < 1e-11);
        }
    }

    #[test]
    fn fresnel_tail_both_branches_agree() {
        let t = 1.3;
        // split at a point where the series branch applies, then step back into the other branch
        let far = fresnel_tail(5.0, t);
        let near = fresnel_tail(2.0, t);
        let between = chirp_integral(|_| C64::new(1.0, 0.0), 2.0, 5.0, t, 16);
        assert!((near - far - between).norm() < 1e-12);
    }

    #[test]
    fn inverse_square_tail_small_t_limit() {
        // 1/K - sqrt(pi i t) + O(K t)
        let t = 1e-9;
        let v = inverse_square_tail(10.0, t);
        let expect = C64::new(0.1, 0.0) - (C64::new(0.0, PI * t)).sqrt();
        assert!((v - expect).norm() < 5e-8);
    }
}
