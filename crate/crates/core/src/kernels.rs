//! Free-propagator traces at the origin and the memory kernels of the smeared problem.

use crate::error::{Error, Result};
use crate::filon::{chirp_integral, chirp_integral_panel, fresnel_tail, inverse_square_tail};
use crate::form_factor::FormFactor;
use crate::fractional::TimeGrid;
use crate::radial::{RadialField, FT3};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

fn ci() -> C64 {
    C64::new(0.0, 1.0)
}

/// int_0^inf e^{-i k^2 s} dk = (1/2) sqrt(pi / (i s)), s > 0.
pub fn fresnel_value(s: f64) -> Result<C64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("fresnel integral needs s > 0, got {s}")));
    }
    Ok(0.5 * (C64::new(PI, 0.0) / (ci() * s)).sqrt())
}

/// (U(t) G)(0) = 1 / (4 pi sqrt(pi i t)), principal branch.
pub fn green_at_origin(t: f64) -> Result<C64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("(U(t)G)(0) is singular for t <= 0, got {t}")));
    }
    Ok(1.0 / (4.0 * PI * (ci() * (PI * t)).sqrt()))
}

/// Same value through the k-integral (1/2pi^2) int_0^inf e^{-i k^2 t} dk, split at k_cut
/// into a Filon part and an asymptotic tail.
pub fn green_at_origin_by_quadrature(t: f64, k_cut: f64) -> Result<C64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("(U(t)G)(0) is singular for t <= 0, got {t}")));
    }
    let body = chirp_integral(|_| C64::new(1.0, 0.0), 0.0, k_cut, t, 16);
    Ok((body + fresnel_tail(k_cut, t)) / (2.0 * PI * PI))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PropagatorValue {
    pub value: C64,
    /// the integrand is not negligible at the last node and no tail closes it
    pub warning: bool,
}

/// Largest phase change of e^{-i k^2 t} across one panel that plain Gauss–Legendre handles.
const GL_PHASE_SPAN: f64 = 4.0;

/// int_0^{k_max} g(k) e^{-i k^2 t} dk for g sampled at the grid nodes.
pub fn oscillatory_grid_integral(grid: &crate::radial::KGrid, g: &[C64], t: f64) -> C64 {
    let n = grid.order();
    let edges = grid.edges();
    let nodes = grid.nodes();
    let weights = grid.weights();
    let scale = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..grid.n_panels() {
        let (a, b) = (edges[p], edges[p + 1]);
        let s = &g[p * n..(p + 1) * n];
        if s.iter().all(|v| v.norm() < 1e-30 * scale) {
            continue;
        }
        if (t * (b * b - a * a)).abs() <= GL_PHASE_SPAN {
            for i in p * n..(p + 1) * n {
                acc += g[i] * C64::from_polar(weights[i], -t * nodes[i] * nodes[i]);
            }
        } else {
            acc += chirp_integral_panel(a, b, s, t);
        }
    }
    acc
}

/// int_0^{k_max} g(k) (1 - e^{-i k^2 t}) dk, accurate where g blows up like k^{-2} at the origin.
pub fn damped_grid_integral(grid: &crate::radial::KGrid, g: &[C64], t: f64) -> C64 {
    let n = grid.order();
    let edges = grid.edges();
    let nodes = grid.nodes();
    let weights = grid.weights();
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..grid.n_panels() {
        let (a, b) = (edges[p], edges[p + 1]);
        if (t * (b * b - a * a)).abs() <= GL_PHASE_SPAN {
            for i in p * n..(p + 1) * n {
                let th = t * nodes[i] * nodes[i];
                // 1 - e^{-i th} = 2i sin(th/2) e^{-i th/2}
                let f = C64::new(0.0, 2.0 * (0.5 * th).sin()) * C64::from_polar(1.0, -0.5 * th);
                acc += g[i] * f * weights[i];
            }
        } else {
            let s = &g[p * n..(p + 1) * n];
            for i in p * n..(p + 1) * n {
                acc += g[i] * weights[i];
            }
            acc -= chirp_integral_panel(a, b, s, t);
        }
    }
    acc
}

/// (U(t) phi)(0) = (2pi)^{-3/2} 4 pi int k^2 phi^(k) e^{-i k^2 t} dk plus the tail.
pub fn propagator_at_origin(phi: &RadialField, t: f64) -> Result<PropagatorValue> {
    if t == 0.0 {
        let v = phi.value_at_origin()?;
        return Ok(PropagatorValue { value: v, warning: false });
    }
    let grid = &phi.grid;
    let g: Vec<C64> = grid.nodes().iter().zip(&phi.values).map(|(k, v)| v * (k * k)).collect();
    let body = oscillatory_grid_integral(grid, &g, t) * (FT3 * 4.0 * PI);
    let kk = grid.k_max();
    let tail = (phi.tail.green * fresnel_tail(kk, t) + phi.tail.quartic * inverse_square_tail(kk, t)) / (2.0 * PI * PI);
    let peak = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let last = g.last().map(|v| v.norm()).unwrap_or(0.0);
    let warning = phi.tail.is_none() && last > 1e-8 * peak;
    Ok(PropagatorValue { value: body + tail, warning })
}

/// Kernels of the smeared problem at fixed eps.
///
/// * `trace(t)   = (rho_eps, U(t) rho_eps * G) = 4 pi int rho^(eps k)^2 e^{-i k^2 t} dk`
/// * `memory(t)  = (rho_eps, U(t) rho_eps)     = 4 pi int k^2 rho^(eps k)^2 e^{-i k^2 t} dk`
/// * `difference(t) = int (rho^(eps k)^2 - rho^(0)^2) e^{-i k^2 t} dk`
#[derive(Debug, Clone)]
pub struct SmearedKernels {
    pub ff: FormFactor,
    pub eps: f64,
}

impl SmearedKernels {
    pub fn new(ff: &FormFactor, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        Ok(SmearedKernels { ff: ff.clone(), eps })
    }

    fn k_end(&self) -> f64 {
        self.ff.k_cut() / self.eps
    }

    /// sigma^2 eps^2 + i t for the Gaussian.
    fn gaussian_arg(&self, t: f64) -> Option<C64> {
        self.ff.gaussian_sigma().map(|s| C64::new(s * s * self.eps * self.eps, t))
    }

    pub fn trace(&self, t: f64) -> C64 {
        match self.gaussian_arg(t) {
            Some(a) => 1.0 / (4.0 * PI.powf(1.5) * a.sqrt()),
            None => self.trace_by_quadrature(t),
        }
    }

    pub fn memory(&self, t: f64) -> C64 {
        match self.gaussian_arg(t) {
            Some(a) => {
                let z = 4.0 * PI * a;
                1.0 / (z * z.sqrt())
            }
            None => self.memory_by_quadrature(t),
        }
    }

    /// Singular like -(1/(4 pi)^2 / sqrt(pi i t)) as t -> 0.
    pub fn difference(&self, t: f64) -> C64 {
        match self.gaussian_arg(t) {
            Some(a) => {
                // a^{-1/2} - (i t)^{-1/2} = (b - a) / (sqrt a sqrt b (sqrt a + sqrt b)), b = i t
                let b = C64::new(0.0, t);
                let (sa, sb) = (a.sqrt(), b.sqrt());
                let d = (b - a) / (sa * sb * (sa + sb));
                d * (FT3 * FT3 * 0.5 * PI.sqrt())
            }
            None => self.difference_by_quadrature(t),
        }
    }

    /// Regular part of the difference kernel: difference(t) + rho^(0)^2 fresnel(t).
    pub fn difference_regular(&self, t: f64) -> C64 {
        self.trace(t) / (4.0 * PI)
    }

    pub fn trace_by_quadrature(&self, t: f64) -> C64 {
        let ff = &self.ff;
        let e = self.eps;
        4.0 * PI * chirp_integral(|k| C64::new(ff.hat(e * k).powi(2), 0.0), 0.0, self.k_end(), t, 16)
    }

    pub fn memory_by_quadrature(&self, t: f64) -> C64 {
        let ff = &self.ff;
        let e = self.eps;
        4.0 * PI * chirp_integral(|k| C64::new((k * ff.hat(e * k)).powi(2), 0.0), 0.0, self.k_end(), t, 16)
    }

    pub fn difference_by_quadrature(&self, t: f64) -> C64 {
        let h0 = self.ff.hat0();
        let ff = &self.ff;
        let e = self.eps;
        let kc = self.k_end();
        // the constant part continues past k_end as a Fresnel tail
        let body = chirp_integral(|k| C64::new(ff.hat(e * k).powi(2) - h0 * h0, 0.0), 0.0, kc, t, 16);
        body - h0 * h0 * fresnel_tail(kc, t)
    }
}

/// Samples of the memory and difference kernels on a time grid.
#[derive(Debug, Clone)]
pub struct MemoryKernel {
    pub grid: TimeGrid,
    pub memory: Vec<C64>,
    /// entry 0 is not finite: the difference kernel blows up like t^{-1/2}
    pub difference: Vec<C64>,
}

pub fn build_memory_kernel(ff: &FormFactor, eps: f64, grid: TimeGrid) -> Result<MemoryKernel> {
    let k = SmearedKernels::new(ff, eps)?;
    let ts = grid.nodes();
    let memory = ts.iter().map(|&t| k.memory(t)).collect();
    let difference = ts
        .iter()
        .map(|&t| if t == 0.0 { C64::new(f64::NAN, f64::NAN) } else { k.difference(t) })
        .collect();
    Ok(MemoryKernel { grid, memory, difference })
}

impl MemoryKernel {
    /// CSV with columns t, re_K, im_K, re_Dk, im_Dk.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("t,re_K,im_K,re_Dk,im_Dk\n");
        for j in 0..=self.grid.n {
            let (m, d) = (self.memory[j], self.difference[j]);
            s.push_str(&format!(
                "{:.10e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                self.grid.node(j),
                m.re,
                m.im,
                d.re,
                d.im
            ));
        }
        s
    }
}
