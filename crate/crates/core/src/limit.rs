//! The point-interaction problem: charge equation, state reconstruction, conserved quantities.
//!
//! The charge solves
//!   q(t) + A gamma I^{1/2}[N(q)](t) = q0 + A I^{1/2}[(U(.) phi0)(0)](t),   A = 4 sqrt(pi i),
//! with N(q) = |q|^{2mu} q. It is marched in the subtracted form
//!   (q - q0) + A gamma I^{1/2}[N(q) - N(q0)] = A I^{1/2}[f],   f(s) = (U(s) phi0)(0) - gamma N(q0),
//! whose right-hand side vanishes at t = 0 by the boundary condition.

use crate::conv::march;
use crate::error::{Error, Result};
use crate::fractional::{abel_lag_weights, half_integral, TimeGrid, TimeSeries};
use crate::initial::{nonlin, GaussianProfile};
use crate::kernels::propagator_at_origin;
use crate::radial::{KGrid, RadialField, Tail, FT3};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Relative tolerance of the boundary condition for initial data.
pub const TOL_BC: f64 = 1e-9;

const MAX_ITER: usize = 50;

/// 4 sqrt(pi i)
pub fn abel_coupling() -> C64 {
    C64::from_polar(4.0 * PI.sqrt(), PI / 4.0)
}

/// (gamma >= 0, mu >= 0) or (gamma < 0, 0 <= mu < 1).
pub fn check_guard(gamma: f64, mu: f64) -> Result<()> {
    let ok = gamma.is_finite() && mu.is_finite() && mu >= 0.0 && (gamma >= 0.0 || mu < 1.0);
    if ok {
        Ok(())
    } else {
        Err(Error::ExistenceGuard { gamma, mu })
    }
}

#[derive(Debug, Clone)]
pub struct PhysParams {
    pub gamma: f64,
    pub mu: f64,
    pub q0: C64,
    pub phi0: RadialField,
    /// closed forms for the traces when phi0 comes from the Gaussian family
    pub profile: Option<GaussianProfile>,
}

/// Base shapes accepted by [`make_domain_data`].
#[derive(Debug, Clone)]
pub enum Shape {
    Zero,
    Gaussian { alpha: f64, screen: Option<f64> },
    Sampled(RadialField),
}

impl PhysParams {
    pub fn new(gamma: f64, mu: f64, q0: C64, phi0: RadialField) -> Result<Self> {
        Self::build(gamma, mu, q0, phi0, None)
    }

    fn build(gamma: f64, mu: f64, q0: C64, phi0: RadialField, profile: Option<GaussianProfile>) -> Result<Self> {
        check_guard(gamma, mu)?;
        if !(q0.re.is_finite() && q0.im.is_finite()) {
            return Err(Error::InvalidParameter("q0 must be finite".into()));
        }
        let target = gamma * nonlin(q0, mu);
        let value = phi0.value_at_origin()?;
        let mismatch = (value - target).norm() / target.norm().max(1.0);
        if mismatch >= TOL_BC {
            return Err(Error::BoundaryCondition { mismatch });
        }
        Ok(PhysParams { gamma, mu, q0, phi0, profile })
    }

    pub fn grid(&self) -> &Arc<KGrid> {
        &self.phi0.grid
    }

    /// psi0 = phi0 + q0 G.
    pub fn psi0(&self) -> RadialField {
        match &self.profile {
            Some(p) => p.psi_field(self.grid().clone()),
            None => {
                let mut f = self.phi0.clone();
                for (v, k) in f.values.iter_mut().zip(self.grid().nodes()) {
                    *v += self.q0 * (FT3 / (k * k));
                }
                f.tail.green += self.q0;
                f
            }
        }
    }

    /// (U(t) phi0)(0) at every node; the flag reports a truncated k-integral.
    pub fn free_trace(&self, grid: TimeGrid) -> Result<(TimeSeries, bool)> {
        if let Some(p) = &self.profile {
            return Ok((TimeSeries::from_fn(grid, |t| p.propagator_trace(t)), false));
        }
        let vals: Vec<Result<_>> = grid.nodes().par_iter().map(|&t| propagator_at_origin(&self.phi0, t)).collect();
        let mut out = Vec::with_capacity(vals.len());
        let mut warn = false;
        for v in vals {
            let v = v?;
            warn |= v.warning;
            out.push(v.value);
        }
        Ok((TimeSeries::new(grid, out)?, warn))
    }
}

pub fn make_domain_data(shape: Shape, gamma: f64, mu: f64, q0: C64, grid: Arc<KGrid>) -> Result<PhysParams> {
    check_guard(gamma, mu)?;
    let target = gamma * nonlin(q0, mu);
    match shape {
        Shape::Zero => {
            if target != C64::new(0.0, 0.0) {
                return Err(Error::BoundaryCondition { mismatch: 1.0 });
            }
            PhysParams::build(gamma, mu, q0, RadialField::zeros(grid), None)
        }
        Shape::Gaussian { alpha, screen } => {
            let p = GaussianProfile::with_boundary_condition(gamma, mu, q0, alpha, screen)?;
            PhysParams::build(gamma, mu, q0, p.phi_field(grid), Some(p))
        }
        Shape::Sampled(base) => {
            let v = base.value_at_origin()?;
            if v.norm() == 0.0 {
                if target.norm() == 0.0 {
                    return PhysParams::build(gamma, mu, q0, base, None);
                }
                return Err(Error::BoundaryCondition { mismatch: 1.0 });
            }
            PhysParams::build(gamma, mu, q0, base.scale(target / v), None)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryKind {
    Limit,
    Scaled { eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSnapshot {
    pub gamma: f64,
    pub mu: f64,
    pub q0: C64,
}

#[derive(Debug, Clone)]
pub struct ChargeTrajectory {
    pub grid: TimeGrid,
    pub values: Vec<C64>,
    pub kind: TrajectoryKind,
    pub params: ParamSnapshot,
    /// largest residual of the discrete equation over the nodes
    pub residual: f64,
    /// the forcing came from a truncated k-integral
    pub warning: bool,
}

impl ChargeTrajectory {
    pub fn series(&self) -> TimeSeries {
        TimeSeries { grid: self.grid, values: self.values.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Every `stride`-th node.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        let s = self.series().subsample(stride)?;
        Ok(ChargeTrajectory { grid: s.grid, values: s.values, ..self.clone() })
    }
}

/// Solves a z + b |z|^{2mu} z = r for z, starting from `guess`.
pub(crate) fn solve_local(a: C64, b: C64, mu: f64, r: C64, guess: C64) -> std::result::Result<C64, f64> {
    let resid = |z: C64| a * z + b * nonlin(z, mu) - r;
    let scale = |z: C64| r.norm() + (a * z).norm() + (b * nonlin(z, mu)).norm() + 1e-300;
    let tol = 1e-15;
    if b == C64::new(0.0, 0.0) {
        return Ok(r / a);
    }
    let mut z = guess;
    for _ in 0..MAX_ITER {
        let f = resid(z);
        if f.norm() <= tol * scale(z) {
            return Ok(z);
        }
        let lip = (b / a).norm() * (2.0 * mu + 1.0) * z.norm().powf(2.0 * mu);
        let next = (r - b * nonlin(z, mu)) / a;
        z = if lip >= 1.0 { 0.5 * (z + next) } else { next };
    }
    // Newton on (z, conj z)
    let mut z = guess;
    for _ in 0..MAX_ITER {
        let f = resid(z);
        if f.norm() <= tol * scale(z) {
            return Ok(z);
        }
        let m = z.norm();
        let (da, db) = if m == 0.0 {
            (a, C64::new(0.0, 0.0))
        } else {
            let p = m.powf(2.0 * mu);
            (a + b * (mu + 1.0) * p, b * mu * p / (m * m) * z * z)
        };
        let det = da.norm_sqr() - db.norm_sqr();
        if det == 0.0 || !det.is_finite() {
            break;
        }
        z += (-f * da.conj() + db * f.conj()) / det;
    }
    let f = resid(z);
    // accept a rounding-level residual even if the strict test was missed
    if f.norm() <= 1e-13 * scale(z) {
        Ok(z)
    } else {
        Err(f.norm())
    }
}

/// F(t_j) = q0 + A I^{1/2}[(U(.) phi0)(0)](t_j).
pub fn forcing(params: &PhysParams, grid: TimeGrid) -> Result<(TimeSeries, bool)> {
    let (trace, warn) = params.free_trace(grid)?;
    let a = abel_coupling();
    let hi = half_integral(&trace);
    Ok((hi.map(|v| params.q0 + a * v), warn))
}

pub fn solve_limit_charge(params: &PhysParams, grid: TimeGrid) -> Result<ChargeTrajectory> {
    check_guard(params.gamma, params.mu)?;
    let (gamma, mu, q0) = (params.gamma, params.mu, params.q0);
    let (force, warning) = forcing(params, grid)?;
    let a = abel_coupling();
    let n0 = nonlin(q0, mu);
    let sdt = grid.dt.sqrt();
    let lag = abel_lag_weights(grid.n);
    let kernel: Vec<C64> = lag.iter().map(|&c| C64::new(c * sdt, 0.0)).collect();
    let kappa = a * gamma * kernel[0];
    // right-hand side of the subtracted form: F - q0 - A gamma N(q0) I^{1/2}[1]
    let rhs: Vec<C64> = (0..=grid.n)
        .map(|j| force.values[j] - q0 - a * gamma * n0 * 2.0 * grid.node(j).sqrt())
        .collect();
    let mut q = vec![q0; grid.n + 1];
    let mut failure: Option<Error> = None;
    let mut max_res = 0.0f64;
    march(grid.n + 1, &[kernel], |j, hist| {
        if j == 0 || failure.is_some() {
            return vec![C64::new(0.0, 0.0)];
        }
        // z - q0 + kappa (N(z) - N0) + A gamma hist = rhs_j
        let r = rhs[j] + q0 + kappa * n0 - a * gamma * hist[0];
        match solve_local(C64::new(1.0, 0.0), kappa, mu, r, q[j - 1]) {
            Ok(z) => {
                q[j] = z;
                let res = (z + kappa * nonlin(z, mu) - r).norm();
                max_res = max_res.max(res);
                vec![nonlin(z, mu) - n0]
            }
            Err(res) => {
                failure = Some(Error::StepFailure { node: j, residual: res });
                vec![C64::new(0.0, 0.0)]
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ChargeTrajectory {
        grid,
        values: q,
        kind: TrajectoryKind::Limit,
        params: ParamSnapshot { gamma, mu, q0 },
        residual: max_res,
        warning,
    })
}

/// Residual of the discrete limit equation at every node, recomputed from scratch.
pub fn limit_equation_residual(params: &PhysParams, traj: &ChargeTrajectory) -> Result<TimeSeries> {
    let (force, _) = forcing(params, traj.grid)?;
    let a = abel_coupling();
    let nq = traj.series().map(|z| nonlin(z, params.mu));
    let inl = half_integral(&nq);
    Ok(TimeSeries {
        grid: traj.grid,
        values: (0..=traj.grid.n).map(|j| traj.values[j] + a * params.gamma * inl.values[j] - force.values[j]).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct DomainElement {
    pub phi: RadialField,
    pub q: C64,
}

impl DomainElement {
    /// psi = phi + q G.
    pub fn psi(&self) -> RadialField {
        let mut f = self.phi.clone();
        for (v, k) in f.values.iter_mut().zip(self.phi.grid.nodes()) {
            *v += self.q * (FT3 / (k * k));
        }
        f.tail.green += self.q;
        f
    }
}

/// Per-k coefficients of int_{t_{j-1}}^{t_j} e^{-i k^2 (t_j - s)} h(s) ds for linear h:
/// (e^{-i k^2 dt}, weight of h_{j-1}, weight of h_j).
pub(crate) fn cell_coefficients(k: f64, dt: f64) -> (C64, C64, C64) {
    let th = k * k * dt;
    let e = C64::from_polar(1.0, -th);
    let (m0, m1) = if th < 0.5 {
        // m_n = sum_p (-i th)^p / (p! (p + n + 1))
        let z = C64::new(0.0, -th);
        let mut pow = C64::new(1.0, 0.0);
        let (mut s0, mut s1) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        let mut fact = 1.0;
        for p in 0..30 {
            if p > 0 {
                pow *= z;
                fact *= p as f64;
            }
            s0 += pow / (fact * (p + 1) as f64);
            s1 += pow / (fact * (p + 2) as f64);
        }
        (s0, s1)
    } else {
        let iz = C64::new(0.0, th);
        let m0 = (1.0 - e) / iz;
        (m0, (m0 - e) / iz)
    };
    // u = t_j - s: h_j carries (1 - u/dt), h_{j-1} carries u/dt
    (e, m1 * dt, (m0 - m1) * dt)
}

/// Phi_h(t_j, k) = int_0^{t_j} e^{-i k^2 (t_j - s)} h(s) ds at the requested nodes, for every k.
/// Result is indexed [snapshot][k].
pub(crate) fn duhamel_integrals(grid: &KGrid, h: &[C64], dt: f64, indices: &[usize]) -> Vec<Vec<C64>> {
    let last = indices.iter().copied().max().unwrap_or(0);
    let per_k: Vec<Vec<C64>> = grid
        .nodes()
        .par_iter()
        .map(|&k| {
            let (e, wp, wc) = cell_coefficients(k, dt);
            let mut out = vec![C64::new(0.0, 0.0); indices.len()];
            let mut phi = C64::new(0.0, 0.0);
            for j in 0..=last {
                if j > 0 {
                    phi = e * phi + wp * h[j - 1] + wc * h[j];
                }
                for (slot, &idx) in indices.iter().enumerate() {
                    if idx == j {
                        out[slot] = phi;
                    }
                }
            }
            out
        })
        .collect();
    (0..indices.len()).map(|s| per_k.iter().map(|v| v[s]).collect()).collect()
}

/// psi(t_j) = U(t_j) psi0 + i int_0^{t_j} U(t_j - s) q(s) G ds, split as phi + q(t_j) G.
pub fn reconstruct_states(params: &PhysParams, traj: &ChargeTrajectory, indices: &[usize]) -> Result<Vec<DomainElement>> {
    let grid = params.grid().clone();
    if let Some(&bad) = indices.iter().find(|&&j| j > traj.grid.n) {
        return Err(Error::InvalidParameter(format!("node {bad} outside the time grid")));
    }
    let psi0 = params.psi0();
    let dt = traj.grid.dt;
    let phis = duhamel_integrals(&grid, &traj.values, dt, indices);
    let i = C64::new(0.0, 1.0);
    let mut out = Vec::with_capacity(indices.len());
    for (slot, &j) in indices.iter().enumerate() {
        let t = traj.grid.node(j);
        let q = traj.values[j];
        if j == 0 {
            out.push(DomainElement { phi: params.phi0.clone(), q });
            continue;
        }
        let values: Vec<C64> = grid
            .nodes()
            .iter()
            .zip(&psi0.values)
            .zip(&phis[slot])
            .map(|((&k, &p0), &ph)| C64::from_polar(1.0, -k * k * t) * p0 + i * FT3 * ph - q * (FT3 / (k * k)))
            .collect();
        let slope = (traj.values[j] - traj.values[j - 1]) / dt;
        let tail = Tail { green: C64::new(0.0, 0.0), quartic: i * slope };
        out.push(DomainElement { phi: RadialField::new(grid.clone(), values, tail)?, q });
    }
    Ok(out)
}

pub fn reconstruct_state(params: &PhysParams, traj: &ChargeTrajectory, t_index: usize) -> Result<DomainElement> {
    Ok(reconstruct_states(params, traj, &[t_index])?.remove(0))
}

/// ||grad phi||^2 + gamma / (mu + 1) |q|^{2mu + 2}.
pub fn limit_energy(elem: &DomainElement, gamma: f64, mu: f64) -> Result<f64> {
    let g = elem.phi.grad_norm_sqr()?;
    Ok(g + gamma / (mu + 1.0) * elem.q.norm().powf(2.0 * mu + 2.0))
}

/// |phi(0) - gamma |q|^{2mu} q|.
pub fn boundary_residual(elem: &DomainElement, gamma: f64, mu: f64) -> Result<f64> {
    Ok((elem.phi.value_at_origin()? - gamma * nonlin(elem.q, mu)).norm())
}

pub fn mass(elem: &DomainElement) -> Result<f64> {
    elem.psi().l2_norm_sqr()
}
