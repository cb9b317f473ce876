//! Quick invariant checks, run by the `selftest` subcommand and the C interface.

use crate::error::Result;
use crate::form_factor::make_gaussian;
use crate::fractional::{half_derivative, half_integral, half_integral_singular, TimeGrid, TimeSeries};
use crate::kernels::{green_at_origin, SmearedKernels};
use crate::limit::{abel_coupling, make_domain_data, solve_limit_charge, Shape};
use crate::radial::{GridSpec, KGrid};
use crate::scaled::{iqve_residual, run_scaled};
use crate::C64;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check { name, value, limit, pass: value.is_finite() && value < limit }
}

fn abel_identity() -> Result<f64> {
    let grid = TimeGrid::new(1.0, 4096)?;
    // (U(s)G)(0) sqrt(s) is constant
    let g = TimeSeries::from_fn(grid, |_| green_at_origin(1.0).unwrap());
    let v = half_integral_singular(&g).map(|z| abel_coupling() * z);
    let mut worst = 0.0f64;
    for t in [0.1, 0.5, 1.0] {
        worst = worst.max((v.values[grid.index_of(t)] - 1.0).norm());
    }
    Ok(worst)
}

fn composition(n: usize) -> Result<f64> {
    let grid = TimeGrid::new(1.0, n)?;
    let f = TimeSeries::from_fn(grid, |s| C64::new(s.sin(), 0.0));
    let d = half_derivative(&half_integral(&f));
    Ok((1..n).map(|j| (d.values[j] - std::f64::consts::PI * f.values[j]).norm()).fold(0.0, f64::max))
}

fn kernel_closed_forms() -> Result<f64> {
    let kern = SmearedKernels::new(&make_gaussian(1.0)?, 0.1)?;
    let mut worst = 0.0f64;
    for t in [1e-3, 1e-2, 0.1, 1.0, 10.0] {
        let m = kern.memory(t);
        worst = worst.max((m - kern.memory_by_quadrature(t)).norm() / m.norm());
        let l = kern.trace(t);
        worst = worst.max((l - kern.trace_by_quadrature(t)).norm() / l.norm());
    }
    Ok(worst)
}

fn stationary_limit() -> Result<f64> {
    let grid = Arc::new(KGrid::for_problem(&GridSpec { eps_min: 0.4, ..Default::default() })?);
    let p = make_domain_data(Shape::Zero, 0.0, 0.0, C64::new(1.0, 0.0), grid)?;
    let tr = solve_limit_charge(&p, TimeGrid::new(1.0, 1024)?)?;
    Ok(tr.values.iter().map(|q| (q - 1.0).norm()).fold(0.0, f64::max))
}

fn scaled_identity() -> Result<(f64, f64)> {
    let grid = Arc::new(KGrid::for_problem(&GridSpec { eps_min: 0.4, ..Default::default() })?);
    let p = make_domain_data(Shape::Gaussian { alpha: 0.5, screen: Some(1.0) }, 1.0, 0.5, C64::new(1.0, 0.0), grid)?;
    let run = run_scaled(&p, &make_gaussian(1.0)?, 0.4, TimeGrid::new(1.0, 1024)?)?;
    let scale = 1.0 + run.q_traj.max_abs();
    Ok((run.q_traj.residual / scale, iqve_residual(&run)?.max_abs() / scale))
}

/// Runs every check. Errors inside a check count as a failure with value NaN.
pub fn run_all() -> Vec<Check> {
    let nan = f64::NAN;
    let mut out = vec![check("abel_fresnel_identity", abel_identity().unwrap_or(nan), 1e-6)];
    let (c1, c2) = (composition(4096).unwrap_or(nan), composition(8192).unwrap_or(nan));
    out.push(check("half_derivative_inverts_half_integral", c1, 1e-3));
    out.push(check("composition_error_halves", c2 / c1, 0.5));
    out.push(check("kernel_closed_forms", kernel_closed_forms().unwrap_or(nan), 1e-8));
    out.push(check("stationary_limit_charge", stationary_limit().unwrap_or(nan), 1e-12));
    let (r, i) = scaled_identity().unwrap_or((nan, nan));
    out.push(check("scaled_charge_residual", r, 1e-9));
    out.push(check("reformulated_charge_identity", i, 1e-9));
    out
}
