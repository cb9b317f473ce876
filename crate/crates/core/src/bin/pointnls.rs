use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use pointnls::config::Config;
use pointnls::harness::run_convergence_study_with;
use pointnls::io::{write_json, write_table};
use pointnls::kernels::SmearedKernels;
use pointnls::limit::{boundary_residual, limit_energy, mass, reconstruct_states, solve_limit_charge};
use pointnls::scaled::{reconstruct_scaled_states, remainder_terms, run_scaled, scaled_energy};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "pointnls", version, about = "Point-interaction NLS solvers and convergence study")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the point-interaction problem; CSV of t, re_q, im_q, abs_q, mass, energy, bc_residual
    SolveLimit {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the smeared problem at one eps
    SolveScaled {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the eps sweep and write report.json, errors.csv and per-run CSVs
    Converge {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Dump t, re K, im K, re Dk, im Dk for the smeared kernels
    KernelTable {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the quick invariant checks
    Selftest,
}

fn load(path: &Option<PathBuf>) -> anyhow::Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn sample_indices(n: usize, stride: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..=n).step_by(stride).collect();
    if *idx.last().unwrap() != n {
        idx.push(n);
    }
    idx
}

fn solve_limit(cfg: &Config, out: &Path) -> anyhow::Result<()> {
    let started = Instant::now();
    let ff = cfg.form_factor()?;
    let params = cfg.params(cfg.k_grid(&ff)?)?;
    let grid = cfg.time_grid()?;
    let traj = solve_limit_charge(&params, grid)?;
    let idx = sample_indices(grid.n, cfg.output_stride);
    let states = reconstruct_states(&params, &traj, &idx)?;
    let mut rows = Vec::with_capacity(idx.len());
    for (&j, e) in idx.iter().zip(&states) {
        let q = traj.values[j];
        rows.push(vec![
            grid.node(j),
            q.re,
            q.im,
            q.norm(),
            mass(e)?,
            limit_energy(e, cfg.gamma, cfg.mu)?,
            boundary_residual(e, cfg.gamma, cfg.mu)?,
        ]);
    }
    write_table(out, &["t", "re_q", "im_q", "abs_q", "mass", "energy", "bc_residual"], &rows)?;
    let manifest = json!({
        "command": "solve-limit",
        "config": cfg,
        "k_grid": params.grid().descriptor_json(),
        "version": env!("CARGO_PKG_VERSION"),
        "equation_residual": traj.residual,
        "truncation_warning": traj.warning,
        "wall_seconds": started.elapsed().as_secs_f64(),
    });
    write_json(&manifest_path(out), &manifest)?;
    Ok(())
}

fn solve_scaled(cfg: &Config, eps: f64, out: &Path) -> anyhow::Result<()> {
    let started = Instant::now();
    let ff = cfg.form_factor()?;
    let params = cfg.params(cfg.k_grid(&ff)?)?;
    let grid = cfg.time_grid()?;
    let run = run_scaled(&params, &ff, eps, grid)?;
    let ys = remainder_terms(&run)?;
    let idx = sample_indices(grid.n, cfg.output_stride);
    let states = reconstruct_scaled_states(&run, &idx)?;
    let mut rows = Vec::with_capacity(idx.len());
    for (&j, s) in idx.iter().zip(&states) {
        let q = run.q_traj.values[j];
        let (f1, f2) = scaled_energy(s, &ff, eps, cfg.gamma, cfg.mu)?;
        let mut row = vec![grid.node(j), q.re, q.im, s.l2_norm_sqr()?, f1, f2];
        row.extend(ys.iter().map(|y| y.values[j].norm()));
        rows.push(row);
    }
    let header = ["t", "re_q", "im_q", "mass", "energy_form1", "energy_form2", "abs_y1", "abs_y2", "abs_y3", "abs_y4"];
    write_table(out, &header, &rows)?;
    let manifest = json!({
        "command": "solve-scaled",
        "eps": eps,
        "config": cfg,
        "k_grid": params.grid().descriptor_json(),
        "version": env!("CARGO_PKG_VERSION"),
        "q0_eps": [run.inputs.q0_eps.re, run.inputs.q0_eps.im],
        "ell": run.ell,
        "equation_residual": run.q_traj.residual,
        "wall_seconds": started.elapsed().as_secs_f64(),
    });
    write_json(&manifest_path(out), &manifest)?;
    Ok(())
}

fn converge(cfg: &Config, dir: &Path) -> anyhow::Result<()> {
    let report = run_convergence_study_with(cfg, Some(dir))?;
    write_json(&dir.join("report.json"), &report)?;
    let rows: Vec<Vec<f64>> = (0..report.epsilons.len())
        .map(|i| {
            vec![
                report.epsilons[i],
                report.sup_errors[i],
                report.init_errors[i],
                report.gap_norms[i],
                report.remainder_norms[i],
            ]
        })
        .collect();
    write_table(&dir.join("errors.csv"), &["eps", "sup_err", "init_err", "gap", "y_norm"], &rows)?;
    if let Some(r) = &report.fitted_rates {
        println!(
            "delta_hat {:.4} (R2 {:.4})  slope_init {:.4}  slope_gap {:.4}  slope_Y {:.4}",
            r.delta_hat.slope, r.delta_hat.r_squared, r.slope_init.slope, r.slope_gap.slope, r.slope_y.slope
        );
    }
    if report.partial {
        bail!("sweep stopped early: {}", report.failure.unwrap_or_default());
    }
    Ok(())
}

fn kernel_table(cfg: &Config, eps: f64, out: &Path) -> anyhow::Result<()> {
    let kern = SmearedKernels::new(&cfg.form_factor()?, eps)?;
    let grid = cfg.time_grid()?;
    let rows: Vec<Vec<f64>> = (1..=grid.n)
        .map(|j| {
            let t = grid.node(j);
            let (k, d) = (kern.memory(t), kern.difference(t));
            vec![t, k.re, k.im, d.re, d.im]
        })
        .collect();
    write_table(out, &["t", "re_k", "im_k", "re_dk", "im_dk"], &rows)?;
    Ok(())
}

fn selftest() -> anyhow::Result<()> {
    let checks = pointnls::selftest::run_all();
    let mut failed = 0;
    for c in &checks {
        println!("{} {:<40} {:.3e} (limit {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
        failed += usize::from(!c.pass);
    }
    if failed > 0 {
        bail!("{failed} of {} checks failed", checks.len());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("POINTNLS_THREADS") {
        let n: usize = v.parse().context("POINTNLS_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::SolveLimit { config, out } => solve_limit(&load(&config)?, &out),
        Cmd::SolveScaled { eps, config, out } => solve_scaled(&load(&config)?, eps, &out),
        Cmd::Converge { config, out_dir } => converge(&load(&config)?, &out_dir),
        Cmd::KernelTable { eps, config, out } => kernel_table(&load(&config)?, eps, &out),
        Cmd::Selftest => selftest(),
    }
}
