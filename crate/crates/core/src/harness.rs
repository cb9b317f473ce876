//! Sweeps eps, compares the smeared and point-interaction flows, fits log-log rates.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::fractional::{half_integral, TimeGrid};
use crate::limit::{
    boundary_residual, limit_energy, mass, reconstruct_states, solve_limit_charge, ChargeTrajectory, DomainElement,
};
use crate::radial::RadialField;
use crate::scaled::{decompose_scaled, reconstruct_scaled_states, remainder_terms, run_scaled, scaled_energy, ScaledRun};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// ||psi_eps - psi||. The k^-2 tail of psi is carried analytically.
pub fn state_error(psi_eps: &RadialField, elem: &DomainElement) -> Result<f64> {
    let diff = psi_eps.sub(&elem.psi())?;
    diff.l2_norm()
}

/// max_j |I^{1/2}(q_eps - q)(t_j)|.
pub fn charge_gap(q_eps: &ChargeTrajectory, q: &ChargeTrajectory) -> Result<f64> {
    if q_eps.grid != q.grid {
        return Err(Error::InvalidParameter("charge trajectories on different grids".into()));
    }
    let d = q_eps.series().sub(&q.series());
    Ok(half_integral(&d).max_abs())
}

/// Ordinary least squares of ln(err) against ln(eps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residual_rms: f64,
    pub points: usize,
    /// largest eps removed as pre-asymptotic
    pub dropped_eps: Option<f64>,
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64, Vec<f64>) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    let ss_res: f64 = res.iter().map(|r| r * r).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2, res)
}

/// Fits err ~ C eps^slope. The largest eps is dropped when it sits more than twice the RMS
/// off the line through the remaining points.
pub fn fit_rate(eps: &[f64], err: &[f64]) -> Result<RateFit> {
    if eps.len() != err.len() || eps.len() < 2 {
        return Err(Error::InvalidParameter("rate fit needs two or more matching points".into()));
    }
    if err.iter().chain(eps).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("rate fit needs positive finite data".into()));
    }
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let (mut slope, mut intercept, mut r2, mut res) = ols(&x, &y);
    let rms = |r: &[f64]| (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt();
    let mut dropped = None;
    // the largest eps is tested against the fit through the others, since in the full fit
    // it pulls the line towards itself and its own residual can never exceed 2x the RMS
    let imax = (0..eps.len()).max_by(|&a, &b| eps[a].total_cmp(&eps[b])).unwrap();
    if eps.len() >= 4 {
        let keep: Vec<usize> = (0..eps.len()).filter(|&i| i != imax).collect();
        let xs: Vec<f64> = keep.iter().map(|&i| x[i]).collect();
        let ys: Vec<f64> = keep.iter().map(|&i| y[i]).collect();
        let (s2, c2, r2b, res2) = ols(&xs, &ys);
        let outlier = (y[imax] - c2 - s2 * x[imax]).abs();
        if outlier > 2.0 * rms(&res2).max(1e-12) {
            (slope, intercept, r2, res) = (s2, c2, r2b, res2);
            dropped = Some(eps[imax]);
        }
    }
    Ok(RateFit { slope, intercept, r_squared: r2, residual_rms: rms(&res), points: res.len(), dropped_eps: dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRates {
    pub delta_hat: RateFit,
    pub slope_init: RateFit,
    pub slope_gap: RateFit,
    pub slope_y: RateFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub eps: f64,
    pub n: usize,
    pub sup_error: f64,
    /// per sample time
    pub errors: Vec<f64>,
    pub init_error: f64,
    pub gap: f64,
    pub y_norm: f64,
    pub q_sup: f64,
    pub grad_phi_sup: f64,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub energy_form_gap: f64,
    pub equation_residual: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSummary {
    pub n: usize,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub bc_residual_max: f64,
    pub equation_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: Config,
    /// the sup over [0, T] is taken over these times only
    pub sample_times: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub sup_errors: Vec<f64>,
    pub init_errors: Vec<f64>,
    pub gap_norms: Vec<f64>,
    pub remainder_norms: Vec<f64>,
    pub fitted_rates: Option<FittedRates>,
    pub runs: Vec<RunSummary>,
    pub limit: Option<LimitSummary>,
    pub partial: bool,
    pub failure: Option<String>,
}

/// Time steps for a given eps: n_base at the largest eps, doubled per halving.
pub fn steps_for(cfg: &Config, eps: f64) -> usize {
    let emax = cfg.study.epsilons.iter().copied().fold(0.0, f64::max);
    let doublings = (emax / eps).log2().round().max(0.0) as u32;
    cfg.study.n_base << doublings
}

fn relative_drift(v: &[f64]) -> f64 {
    let v0 = v[0];
    v.iter().map(|x| (x - v0).abs()).fold(0.0, f64::max) / v0.abs().max(1e-300)
}

struct LimitSide {
    traj: ChargeTrajectory,
    states: Vec<DomainElement>,
    psi0: RadialField,
}

fn scaled_summary(cfg: &Config, run: &ScaledRun, lim: &LimitSide, sample_idx: &[usize]) -> Result<RunSummary> {
    let started = std::time::Instant::now();
    let n = run.q_traj.grid.n;
    let stride = lim.traj.grid.n / n;
    let idx: Vec<usize> = sample_idx.iter().map(|&j| j / stride).collect();
    let states = reconstruct_scaled_states(run, &idx)?;
    let mut errors = Vec::with_capacity(idx.len());
    let mut masses = Vec::new();
    let mut energies = Vec::new();
    let mut form_gap = 0.0f64;
    let mut grad_sup = 0.0f64;
    for (s, l) in states.iter().zip(&lim.states) {
        errors.push(state_error(s, l)?);
        masses.push(s.l2_norm_sqr()?);
        let (f1, f2) = scaled_energy(s, &run.ff, run.eps, cfg.gamma, cfg.mu)?;
        energies.push(f2);
        form_gap = form_gap.max((f1 - f2).abs() / f2.abs().max(1e-300));
        let (phi, _) = decompose_scaled(s, &run.ff, run.eps)?;
        grad_sup = grad_sup.max(phi.grad_norm()?);
    }
    let init_error = run.psi0_eps.sub(&lim.psi0)?.l2_norm()?;
    let q_lim = lim.traj.subsample(stride)?;
    let gap = charge_gap(&run.q_traj, &q_lim)?;
    let ys = remainder_terms(run)?;
    let y_norm = (0..=n)
        .map(|j| (ys[0].values[j] + ys[1].values[j] + ys[2].values[j] + ys[3].values[j]).norm())
        .fold(0.0, f64::max);
    let sup_error = errors.iter().copied().fold(0.0, f64::max);
    Ok(RunSummary {
        eps: run.eps,
        n,
        sup_error,
        errors,
        init_error,
        gap,
        y_norm,
        q_sup: run.q_traj.max_abs(),
        grad_phi_sup: grad_sup,
        mass_drift: relative_drift(&masses),
        energy_drift: relative_drift(&energies),
        energy_form_gap: form_gap,
        equation_residual: run.q_traj.residual,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Runs the sweep. A failing eps stops the sweep and returns the report so far, flagged partial.
pub fn run_convergence_study(cfg: &Config) -> Result<ConvergenceReport> {
    run_convergence_study_with(cfg, None)
}

/// As [`run_convergence_study`], also writing per-run CSVs into `out_dir`.
pub fn run_convergence_study_with(cfg: &Config, out_dir: Option<&Path>) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let ff = cfg.form_factor()?;
    let kgrid = cfg.k_grid(&ff)?;
    let params = cfg.params(kgrid)?;
    let mut eps = cfg.study.epsilons.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let n_fine = eps.iter().map(|&e| steps_for(cfg, e)).max().unwrap();
    let segs = cfg.study.samples - 1;
    let n_min = eps.iter().map(|&e| steps_for(cfg, e)).min().unwrap();
    if n_min % segs != 0 {
        return Err(Error::Config(format!("n_base must be divisible by samples - 1 = {segs}")));
    }
    let fine = TimeGrid::new(cfg.t_end, n_fine)?;
    let sample_idx: Vec<usize> = (0..=segs).map(|i| i * n_fine / segs).collect();
    let sample_times = sample_idx.iter().map(|&j| fine.node(j)).collect();

    let mut report = ConvergenceReport {
        config: cfg.clone(),
        sample_times,
        epsilons: Vec::new(),
        sup_errors: Vec::new(),
        init_errors: Vec::new(),
        gap_norms: Vec::new(),
        remainder_norms: Vec::new(),
        fitted_rates: None,
        runs: Vec::new(),
        limit: None,
        partial: false,
        failure: None,
    };

    let traj = solve_limit_charge(&params, fine)?;
    let states = reconstruct_states(&params, &traj, &sample_idx)?;
    let masses: Vec<f64> = states.iter().map(mass).collect::<Result<_>>()?;
    let energies: Vec<f64> = states.iter().map(|e| limit_energy(e, cfg.gamma, cfg.mu)).collect::<Result<_>>()?;
    let bc = states
        .iter()
        .map(|e| boundary_residual(e, cfg.gamma, cfg.mu))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    report.limit = Some(LimitSummary {
        n: n_fine,
        mass_drift: relative_drift(&masses),
        energy_drift: relative_drift(&energies),
        bc_residual_max: bc,
        equation_residual: traj.residual,
    });
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        crate::io::write_trajectory_csv(&dir.join("limit_charge.csv"), &traj)?;
    }
    let lim = LimitSide { psi0: params.psi0(), traj, states };

    // each eps is independent; collect in order and stop at the first failure
    let results: Vec<Result<(RunSummary, ScaledRun)>> = eps
        .par_iter()
        .map(|&e| {
            let t0 = std::time::Instant::now();
            let grid = TimeGrid::new(cfg.t_end, steps_for(cfg, e))?;
            let run = run_scaled(&params, &ff, e, grid)?;
            let mut s = scaled_summary(cfg, &run, &lim, &sample_idx)?;
            s.wall_seconds = t0.elapsed().as_secs_f64();
            Ok((s, run))
        })
        .collect();
    for r in results {
        match r {
            Ok((s, run)) => {
                if let Some(dir) = out_dir {
                    let name = format!("scaled_eps_{}.csv", s.eps);
                    crate::io::write_trajectory_csv(&dir.join(name), &run.q_traj)?;
                }
                report.epsilons.push(s.eps);
                report.sup_errors.push(s.sup_error);
                report.init_errors.push(s.init_error);
                report.gap_norms.push(s.gap);
                report.remainder_norms.push(s.y_norm);
                report.runs.push(s);
            }
            Err(e) => {
                report.partial = true;
                report.failure = Some(e.to_string());
                break;
            }
        }
    }
    if !report.partial && report.epsilons.len() >= 2 {
        let e = &report.epsilons;
        report.fitted_rates = Some(FittedRates {
            delta_hat: fit_rate(e, &report.sup_errors)?,
            slope_init: fit_rate(e, &report.init_errors)?,
            slope_gap: fit_rate(e, &report.gap_norms)?,
            slope_y: fit_rate(e, &report.remainder_norms)?,
        });
    }
    Ok(report)
}
