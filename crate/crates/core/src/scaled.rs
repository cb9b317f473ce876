//! The smeared problem at fixed eps: charge, state reconstruction, energies, remainders.
//!
//! With h = q - gamma (eps/ell) N(q) and L(t) = (rho_eps, U(t) rho_eps * G), the charge equation
//! integrated once in time reads
//!   int_0^t L(t - s) h(s) ds + gamma int_0^t N(q) ds = S(t),   S(t) = int_0^t (rho_eps, U(s) psi0_eps) ds.
//! L is the Abel kernel smoothed on the scale sigma^2 eps^2, so this is the Abel-form equation with
//! the difference kernel folded back in. It is marched with product-integration weights of L
//! against hat functions and the trapezoid rule for the local term.

use crate::conv::{causal_convolution, march};
use crate::error::{Error, Result};
use crate::form_factor::{compute_ell, gaussian_ell, FormFactor};
use crate::fractional::{half_integral, TimeGrid, TimeSeries};
use crate::initial::nonlin;
use crate::kernels::{build_memory_kernel, damped_grid_integral, oscillatory_grid_integral, MemoryKernel, SmearedKernels};
use crate::limit::{
    abel_coupling, check_guard, duhamel_integrals, solve_local, ChargeTrajectory, ParamSnapshot, PhysParams,
    TrajectoryKind,
};
use crate::quad::gl_rule;
use crate::radial::{KGrid, RadialField, Tail, FT3};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

/// 4 pi sqrt(pi i): turns L into the Abel kernel as eps -> 0.
pub fn abel_scale() -> C64 {
    abel_coupling() * PI
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn ell_of(ff: &FormFactor) -> Result<f64> {
    match ff.gaussian_sigma() {
        Some(s) => Ok(gaussian_ell(s)),
        None => compute_ell(ff),
    }
}

/// psi0_eps = phi0 + q0 rho_eps * G.
pub fn build_initial_data(params: &PhysParams, ff: &FormFactor, eps: f64, grid: Arc<KGrid>) -> Result<RadialField> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if eps * grid.k_max() < ff.k_cut() {
        return Err(Error::InvalidParameter(format!(
            "k_max = {} does not resolve the form factor at eps = {eps}",
            grid.k_max()
        )));
    }
    if params.grid() != &grid && **params.grid() != *grid {
        return Err(Error::InvalidParameter("initial data and grid disagree".into()));
    }
    if let Some(p) = &params.profile {
        return Ok(p.psi_eps_field(ff, eps, grid));
    }
    let mut f = params.phi0.clone();
    for (v, k) in f.values.iter_mut().zip(grid.nodes()) {
        *v += params.q0 * (ff.hat(eps * k) / (k * k));
    }
    Ok(f)
}

/// Cell integrals of L on a uniform grid, and the convolution weights built from them.
///
/// The first-kind form int L(t - s) h(s) ds is not marched directly: with L(0) finite, any
/// hat-function product rule for it has a (-1)^j mode that grows. Its time derivative,
/// L(t) h(0) + int L(t - s) h'(s) ds, is of the second kind and is what the solver uses, with h
/// piecewise linear so that h' is constant per cell and only the cell integrals of L enter.
#[derive(Debug, Clone)]
pub struct TraceWeights {
    /// int over [p dt, (p+1) dt] of L, p = 0..n-1
    pub cell: Vec<C64>,
    /// L(t_j)
    pub node: Vec<C64>,
    /// int_0^{t_j} L
    pub cumulative: Vec<C64>,
    /// weight of node j - p in the derivative form at node j (p < j, node 0 excluded)
    pub lag: Vec<C64>,
}

impl TraceWeights {
    pub fn new(kern: &SmearedKernels, grid: TimeGrid) -> Self {
        let n = grid.n;
        let dt = grid.dt;
        let rule = gl_rule(12);
        let cell: Vec<C64> = (0..n)
            .into_par_iter()
            .map(|m| {
                if m == 0 {
                    if let Some(s) = kern.ff.gaussian_sigma() {
                        return first_cell_gaussian(s * s * kern.eps * kern.eps, dt);
                    }
                }
                let mut m0 = zero();
                for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                    m0 += kern.trace((m as f64 + 0.5 * (x + 1.0)) * dt) * (0.5 * w * dt);
                }
                m0
            })
            .collect();
        let node = grid.nodes().iter().map(|&t| kern.trace(t)).collect();
        let mut cumulative = vec![zero(); n + 1];
        let mut lag = vec![zero(); n + 1];
        lag[0] = cell[0] / dt;
        for j in 1..=n {
            cumulative[j] = cumulative[j - 1] + cell[j - 1];
            if j < n {
                lag[j] = (cell[j] - cell[j - 1]) / dt;
            }
        }
        TraceWeights { cell, node, cumulative, lag }
    }

    /// Weight of node 0 in the derivative form at node j >= 1.
    pub fn endpoint(&self, j: usize, dt: f64) -> C64 {
        self.node[j] - self.cell[j - 1] / dt
    }

    /// L(t_j) x(0) + int_0^{t_j} L(t_j - s) x'(s) ds for piecewise-linear x.
    pub fn apply_derivative(&self, x: &[C64], dt: f64) -> Vec<C64> {
        let mut inner = x.to_vec();
        inner[0] = zero();
        let conv = causal_convolution(&self.lag, &inner);
        let mut out = vec![zero(); x.len()];
        out[0] = self.node[0] * x[0];
        for j in 1..x.len() {
            out[j] = conv[j] + self.endpoint(j, dt) * x[0];
        }
        out
    }

    /// Discrete int_0^{t_j} L(t_j - s) x(s) ds: trapezoid sums of [`Self::apply_derivative`].
    pub fn apply(&self, x: &[C64], dt: f64) -> Vec<C64> {
        trapezoid_cumulative(&self.apply_derivative(x, dt), dt)
    }
}

/// Exact int_0^dt of (4 pi^{3/2})^{-1} (c + i tau)^{-1/2}, without cancellation for dt << c.
fn first_cell_gaussian(c: f64, dt: f64) -> C64 {
    let w = C64::new(c, dt);
    2.0 * dt / (w.sqrt() + c.sqrt()) / (4.0 * PI.powf(1.5))
}

fn trapezoid_cumulative(x: &[C64], dt: f64) -> Vec<C64> {
    let mut out = vec![zero(); x.len()];
    for j in 1..x.len() {
        out[j] = out[j - 1] + (x[j - 1] + x[j]) * (0.5 * dt);
    }
    out
}

/// Everything the marching needs besides the nonlinearity.
#[derive(Debug, Clone)]
pub struct ScaledInputs {
    pub eps: f64,
    pub ell: f64,
    pub gamma: f64,
    pub mu: f64,
    pub q0: C64,
    /// (eps/ell) (rho_eps, psi0_eps)
    pub q0_eps: C64,
    pub grid: TimeGrid,
    pub weights: Arc<TraceWeights>,
    /// S(t_j) = int_0^{t_j} (rho_eps, U(s) psi0_eps) ds
    pub source: Vec<C64>,
    /// S'(t_j) = (rho_eps, U(t_j) psi0_eps), the right-hand side of the marched equation
    pub source_rate: Vec<C64>,
}

#[derive(Debug, Clone)]
pub struct ScaledRun {
    pub eps: f64,
    pub ff: FormFactor,
    pub ell: f64,
    pub params: PhysParams,
    pub q_traj: ChargeTrajectory,
    pub kernel: MemoryKernel,
    pub psi0_eps: RadialField,
    pub inputs: ScaledInputs,
}

pub fn prepare_scaled(params: &PhysParams, ff: &FormFactor, eps: f64, grid: TimeGrid) -> Result<(ScaledInputs, RadialField)> {
    check_guard(params.gamma, params.mu)?;
    let kern = SmearedKernels::new(ff, eps)?;
    let ell = ell_of(ff)?;
    let kgrid = params.grid().clone();
    let psi0_eps = build_initial_data(params, ff, eps, kgrid.clone())?;
    let weights = Arc::new(TraceWeights::new(&kern, grid));
    let q0 = params.q0;
    let sigma = ff.gaussian_sigma();
    let nodes = grid.nodes();
    let (phi_overlap, phi_source, phi_rate): (C64, Vec<C64>, Vec<C64>) = match (&params.profile, sigma) {
        (Some(p), Some(s)) => (
            p.smeared_trace(s, eps, 0.0),
            nodes.iter().map(|&t| p.smeared_trace_integral(s, eps, t)).collect(),
            nodes.iter().map(|&t| p.smeared_trace(s, eps, t)).collect(),
        ),
        _ => {
            let rho: Vec<C64> = kgrid.nodes().iter().map(|&k| C64::new(ff.hat(eps * k), 0.0)).collect();
            let rho_f = RadialField::new(kgrid.clone(), rho.clone(), Tail::none())?;
            let overlap = rho_f.inner(&params.phi0)?;
            let g: Vec<C64> = rho.iter().zip(&params.phi0.values).map(|(r, v)| r * v).collect();
            let gk: Vec<C64> = g.iter().zip(kgrid.nodes()).map(|(v, k)| v * (k * k)).collect();
            let src = nodes.par_iter().map(|&t| C64::new(0.0, -4.0 * PI) * damped_grid_integral(&kgrid, &g, t)).collect();
            let rate = nodes.par_iter().map(|&t| 4.0 * PI * oscillatory_grid_integral(&kgrid, &gk, t)).collect();
            (overlap, src, rate)
        }
    };
    let source = phi_source.iter().zip(&weights.cumulative).map(|(a, b)| a + q0 * b).collect();
    let source_rate = phi_rate.iter().zip(&weights.node).map(|(a, b)| a + q0 * b).collect();
    let q0_eps = q0 + eps / ell * phi_overlap;
    Ok((
        ScaledInputs { eps, ell, gamma: params.gamma, mu: params.mu, q0, q0_eps, grid, weights, source, source_rate },
        psi0_eps,
    ))
}

pub fn solve_scaled_charge(inp: &ScaledInputs) -> Result<ChargeTrajectory> {
    check_guard(inp.gamma, inp.mu)?;
    let grid = inp.grid;
    let (gamma, mu) = (inp.gamma, inp.mu);
    let dt = grid.dt;
    let r = inp.eps / inp.ell;
    let w = &inp.weights;
    // L(0) = ell / eps, so b is O(dt) while dt << sigma^2 eps^2
    let a = w.lag[0];
    let b = gamma * (1.0 - r * a);
    let n0 = nonlin(inp.q0_eps, mu);
    let h0 = inp.q0_eps - gamma * r * n0;
    let mut q = vec![inp.q0_eps; grid.n + 1];
    let mut resid = vec![w.node[0] * h0 + gamma * n0 - inp.source_rate[0]];
    let mut failure: Option<Error> = None;
    march(grid.n + 1, &[w.lag.clone()], |j, hist| {
        if j == 0 || failure.is_some() {
            return vec![zero()];
        }
        let rhs = inp.source_rate[j] - w.endpoint(j, dt) * h0 - hist[0];
        match solve_local(a, b, mu, rhs, q[j - 1]) {
            Ok(z) => {
                q[j] = z;
                let nz = nonlin(z, mu);
                resid.push(a * z + b * nz - rhs);
                vec![z - gamma * r * nz]
            }
            Err(res) => {
                failure = Some(Error::StepFailure { node: j, residual: res });
                vec![zero()]
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    // reported in the units of the Abel-form equation: B times the integrated residual
    let bscale = abel_scale().norm();
    let residual = trapezoid_cumulative(&resid, dt).iter().map(|v| bscale * v.norm()).fold(0.0, f64::max);
    Ok(ChargeTrajectory {
        grid,
        values: q,
        kind: TrajectoryKind::Scaled { eps: inp.eps },
        params: ParamSnapshot { gamma, mu, q0: inp.q0 },
        residual,
        warning: false,
    })
}

pub fn run_scaled(params: &PhysParams, ff: &FormFactor, eps: f64, grid: TimeGrid) -> Result<ScaledRun> {
    let (inputs, psi0_eps) = prepare_scaled(params, ff, eps, grid)?;
    let q_traj = solve_scaled_charge(&inputs)?;
    let kernel = build_memory_kernel(ff, eps, grid)?;
    Ok(ScaledRun { eps, ff: ff.clone(), ell: inputs.ell, params: params.clone(), q_traj, kernel, psi0_eps, inputs })
}

impl ScaledRun {
    fn h_series(&self) -> Vec<C64> {
        let r = self.eps / self.ell;
        let (g, mu) = (self.inputs.gamma, self.inputs.mu);
        self.q_traj.values.iter().map(|&z| z - g * r * nonlin(z, mu)).collect()
    }
}

/// psi_eps(t_j) for each requested node.
pub fn reconstruct_scaled_states(run: &ScaledRun, indices: &[usize]) -> Result<Vec<RadialField>> {
    let grid = run.psi0_eps.grid.clone();
    if let Some(&bad) = indices.iter().find(|&&j| j > run.q_traj.grid.n) {
        return Err(Error::InvalidParameter(format!("node {bad} outside the time grid")));
    }
    let h = run.h_series();
    let phis = duhamel_integrals(&grid, &h, run.q_traj.grid.dt, indices);
    let i = C64::new(0.0, 1.0);
    let mut out = Vec::with_capacity(indices.len());
    for (slot, &j) in indices.iter().enumerate() {
        if j == 0 {
            out.push(run.psi0_eps.clone());
            continue;
        }
        let t = run.q_traj.grid.node(j);
        let values = grid
            .nodes()
            .iter()
            .zip(&run.psi0_eps.values)
            .zip(&phis[slot])
            .map(|((&k, &p0), &ph)| C64::from_polar(1.0, -k * k * t) * p0 + i * run.ff.hat(run.eps * k) * ph)
            .collect();
        out.push(RadialField::new(grid.clone(), values, run.psi0_eps.tail)?);
    }
    Ok(out)
}

pub fn reconstruct_scaled_state(run: &ScaledRun, t_index: usize) -> Result<RadialField> {
    Ok(reconstruct_scaled_states(run, &[t_index])?.remove(0))
}

/// (phi_eps, q_eps) with q_eps = (eps/ell) (rho_eps, psi) and phi_eps = psi - q_eps rho_eps * G.
pub fn decompose_scaled(psi: &RadialField, ff: &FormFactor, eps: f64) -> Result<(RadialField, C64)> {
    let ell = ell_of(ff)?;
    let grid = psi.grid.clone();
    let rho = RadialField::from_fn(grid.clone(), |k| C64::new(ff.hat(eps * k), 0.0), Tail::none());
    let q = rho.inner(psi)? * (eps / ell);
    let mut phi = psi.clone();
    for (v, k) in phi.values.iter_mut().zip(grid.nodes()) {
        *v -= q * (ff.hat(eps * k) / (k * k));
    }
    Ok((phi, q))
}

/// Both forms of the smeared energy:
/// ||grad psi||^2 - (ell/eps) |q|^2 + P(q) and ||grad phi||^2 + P(q), P(q) = gamma/(mu+1) |q|^{2mu+2}.
pub fn scaled_energy(psi: &RadialField, ff: &FormFactor, eps: f64, gamma: f64, mu: f64) -> Result<(f64, f64)> {
    let ell = ell_of(ff)?;
    let (phi, q) = decompose_scaled(psi, ff, eps)?;
    let pot = gamma / (mu + 1.0) * q.norm().powf(2.0 * mu + 2.0);
    let f1 = psi.grad_norm_sqr()? - ell / eps * q.norm_sqr() + pot;
    let f2 = phi.grad_norm_sqr()? + pot;
    Ok((f1, f2))
}

/// Y1..Y4 on the time grid.
pub fn remainder_terms(run: &ScaledRun) -> Result<[TimeSeries; 4]> {
    let grid = run.q_traj.grid;
    let b = abel_scale();
    let r = run.eps / run.ell;
    let (gamma, mu) = (run.inputs.gamma, run.inputs.mu);
    let q = run.q_traj.series();
    let nq = q.map(|z| nonlin(z, mu));
    let w = &run.inputs.weights;
    // difference-kernel convolution: (L - Abel / B) / (4 pi)
    let dop = |x: &TimeSeries| -> Vec<C64> {
        let l = w.apply(&x.values, grid.dt);
        let a = half_integral(x);
        l.iter().zip(&a.values).map(|(l, a)| (l - a / b) / (4.0 * PI)).collect()
    };
    let dq = dop(&q);
    let dn = dop(&nq);
    let an = half_integral(&nq);
    let y1 = dq.iter().map(|v| -4.0 * PI * b * v).collect();
    let y2 = dn.iter().map(|v| 4.0 * PI * b * gamma * r * v).collect();
    let y3 = an.values.iter().map(|v| gamma * r * v).collect();
    let free = free_trace_integral(&run.params, grid)?;
    let q0 = run.params.q0;
    let y4 = (0..=grid.n)
        .map(|j| b * (run.inputs.source[j] - free[j]) - 2.0 * grid.node(j).sqrt() * q0)
        .collect();
    Ok([
        TimeSeries::new(grid, y1)?,
        TimeSeries::new(grid, y2)?,
        TimeSeries::new(grid, y3)?,
        TimeSeries::new(grid, y4)?,
    ])
}

/// int_0^{t_j} (U(s) phi0)(0) ds.
pub fn free_trace_integral(params: &PhysParams, grid: TimeGrid) -> Result<Vec<C64>> {
    if let Some(p) = &params.profile {
        return Ok(grid.nodes().iter().map(|&t| p.propagator_trace_integral(t)).collect());
    }
    let kg = params.grid().clone();
    let g: Vec<C64> = params.phi0.values.iter().map(|v| v * FT3).collect();
    Ok(grid
        .nodes()
        .par_iter()
        .map(|&t| C64::new(0.0, -4.0 * PI) * damped_grid_integral(&kg, &g, t))
        .collect())
}

/// I^{1/2} q + B gamma int N(q) - B S - (Y1 + Y2 + Y3) at every node.
pub fn iqve_residual(run: &ScaledRun) -> Result<TimeSeries> {
    let grid = run.q_traj.grid;
    let b = abel_scale();
    let q = run.q_traj.series();
    let nq = q.map(|z| nonlin(z, run.inputs.mu));
    let iq = half_integral(&q);
    let tn = trapezoid_cumulative(&nq.values, grid.dt);
    // the discrete S the marching is consistent with
    let s = trapezoid_cumulative(&run.inputs.source_rate, grid.dt);
    let [y1, y2, y3, _] = remainder_terms(run)?;
    let vals = (0..=grid.n)
        .map(|j| {
            iq.values[j] + b * run.inputs.gamma * tn[j] - b * s[j] - (y1.values[j] + y2.values[j] + y3.values[j])
        })
        .collect();
    TimeSeries::new(grid, vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form_factor::make_gaussian;
    use crate::limit::{make_domain_data, Shape};
    use crate::radial::GridSpec;

    fn setup(gamma: f64, mu: f64, eps: f64) -> (PhysParams, FormFactor) {
        let kg = Arc::new(KGrid::for_problem(&GridSpec { eps_min: eps, ..Default::default() }).unwrap());
        let p = make_domain_data(Shape::Gaussian { alpha: 0.5, screen: Some(1.0) }, gamma, mu, C64::new(1.0, 0.0), kg).unwrap();
        (p, make_gaussian(1.0).unwrap())
    }

    #[test]
    fn trace_weights_integrate_the_kernel() {
        let ff = make_gaussian(1.0).unwrap();
        for &eps in &[0.4, 0.025] {
            let kern = SmearedKernels::new(&ff, eps).unwrap();
            let c = eps * eps;
            let exact = |t: f64| 2.0 * t / (C64::new(c, t).sqrt() + c.sqrt()) / (4.0 * PI.powf(1.5));
            let mut errs = Vec::new();
            for n in [256usize, 512] {
                let grid = TimeGrid::new(1.0, n).unwrap();
                let w = TraceWeights::new(&kern, grid);
                for j in [1usize, 7, n] {
                    assert!((w.cumulative[j] - exact(grid.node(j))).norm() < 1e-13, "eps {eps} j {j}");
                }
                // the derivative form of constant data is L itself
                let one = vec![C64::new(1.0, 0.0); n + 1];
                let d = w.apply_derivative(&one, grid.dt);
                for j in 0..=n {
                    assert!((d[j] - w.node[j]).norm() < 1e-12 * w.node[0].norm());
                }
                // linear data: int_0^t L(t - s) ds
                let lin: Vec<C64> = grid.nodes().iter().map(|&t| C64::new(t, 0.0)).collect();
                let d = w.apply_derivative(&lin, grid.dt);
                errs.push((0..=n).map(|j| (d[j] - w.cumulative[j]).norm()).fold(0.0, f64::max));
            }
            assert!(errs[0] < 1e-12 && errs[1] < 1e-12, "{errs:?}");
        }
    }

    #[test]
    fn runs_and_conserves() {
        let (p, ff) = setup(1.0, 0.5, 0.1);
        let mut gaps = Vec::new();
        let mut drifts = Vec::new();
        for &n in &[1024usize, 4096] {
            let grid = TimeGrid::new(1.0, n).unwrap();
            let run = run_scaled(&p, &ff, 0.1, grid).unwrap();
            assert!(run.q_traj.residual < 1e-10, "{}", run.q_traj.residual);
            let res = iqve_residual(&run).unwrap();
            assert!(res.max_abs() < 1e-10, "{}", res.max_abs());
            let idx = [0, n / 2, n];
            let states = reconstruct_scaled_states(&run, &idx).unwrap();
            let m0 = states[0].l2_norm_sqr().unwrap();
            let mut gap = 0.0f64;
            let mut drift = 0.0f64;
            for (s, &j) in states.iter().zip(&idx) {
                let m = s.l2_norm_sqr().unwrap();
                let (f1, f2) = scaled_energy(s, &ff, 0.1, 1.0, 0.5).unwrap();
                let (phi, q) = decompose_scaled(s, &ff, 0.1).unwrap();
                assert!((f1 - f2).abs() < 1e-10 * f1.abs().max(1.0));
                drift = drift.max(((m - m0) / m0).abs());
                let rho = crate::form_factor::smeared_profile(&ff, 0.1, s.grid.clone());
                assert!(rho.inner(&phi).unwrap().norm() < 1e-12);
                gap = gap.max((q - run.q_traj.values[j]).norm());
            }
            gaps.push(gap);
            drifts.push(drift);
        }
        // the charge read off the reconstructed state agrees up to the k-quadrature floor
        assert!(gaps.iter().all(|&g| g < 1e-5), "{gaps:?}");
        // mass error is second order in dt, made in the initial transient of length eps^2

        assert!(drifts[0] < 1e-3 && drifts[1] < drifts[0] / 8.0, "{drifts:?}");
    }

    #[test]
    fn linear_stationary_data_stays_put() {
        let kg = Arc::new(KGrid::for_problem(&GridSpec { eps_min: 0.1, ..Default::default() }).unwrap());
        let p = make_domain_data(Shape::Zero, 0.0, 0.0, C64::new(1.0, 0.0), kg).unwrap();
        let ff = make_gaussian(1.0).unwrap();
        let run = run_scaled(&p, &ff, 0.1, TimeGrid::new(1.0, 512).unwrap()).unwrap();
        let dev = run.q_traj.values.iter().map(|v| (v - 1.0).norm()).fold(0.0, f64::max);
        assert!(dev < 1e-13, "{dev}");
        let [y1, y2, y3, _] = remainder_terms(&run).unwrap();
        assert!(y2.max_abs() == 0.0 && y3.max_abs() == 0.0);
        assert!(y1.max_abs() > 0.0);
    }
}
