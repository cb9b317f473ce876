//! Gauss–Legendre panels and an adaptive Gauss–Kronrod integrator for complex integrands.

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64 as C64;
use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Cached Gauss–Legendre rule of order `n`, nodes ascending.
pub fn gl_rule(n: usize) -> Arc<GlRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GlRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("gl cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
            let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            Arc::new(GlRule {
                nodes: pairs.iter().map(|p| p.0).collect(),
                weights: pairs.iter().map(|p| p.1).collect(),
            })
        })
        .clone()
}

/// Fixed-order Gauss–Legendre on [a, b].
pub fn gl_integrate<F: FnMut(f64) -> C64>(n: usize, a: f64, b: f64, mut f: F) -> C64 {
    let rule = gl_rule(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut acc = C64::new(0.0, 0.0);
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        acc += f(mid + half * x) * *w;
    }
    acc * half
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: FnMut(f64) -> C64>(f: &mut F, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    ((kron * h), ((kron - gauss) * h).norm())
}

/// Adaptive G7–K15 on [a, b] until the error estimate is below `max(abs_tol, rel_tol*|I|)`.
pub fn adaptive<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> C64 {
    let (v, e) = gk15(&mut f, a, b);
    let mut segs = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    let mut iters = 0;
    while err > abs_tol.max(rel_tol * total.norm()) && iters < 20_000 {
        iters += 1;
        // split the worst segment
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (sa, sb, sv, se) = segs.swap_remove(idx);
        let m = 0.5 * (sa + sb);
        if m <= sa || m >= sb {
            segs.push((sa, sb, sv, 0.0));
            continue;
        }
        let (v1, e1) = gk15(&mut f, sa, m);
        let (v2, e2) = gk15(&mut f, m, sb);
        total += v1 + v2 - sv;
        err += e1 + e2 - se;
        segs.push((sa, m, v1, e1));
        segs.push((m, sb, v2, e2));
    }
    segs.iter().map(|s| s.2).sum()
}

/// Real-valued convenience wrapper around [`adaptive`].
pub fn adaptive_real<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    adaptive(|x| C64::new(f(x), 0.0), a, b, abs_tol, rel_tol).re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_rule_integrates_polynomials() {
        let v = gl_integrate(8, 0.0, 2.0, |x| C64::new(x.powi(15), 0.0));
        assert!((v.re - 2f64.powi(16) / 16.0).abs() < 1e-9);
        let r = gl_rule(16);
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        // int_0^1 x^{-1/2} dx = 2
        let v = adaptive_real(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-13, 1e-13);
        assert!((v - 2.0).abs() < 1e-9, "{v}");
        let g = adaptive(|x| C64::new(0.0, x).exp(), 0.0, 10.0, 1e-14, 1e-14);
        let exact = (C64::new(0.0, 10.0).exp() - 1.0) / C64::new(0.0, 1.0);
        assert!((g - exact).norm() < 1e-12);
    }
}
