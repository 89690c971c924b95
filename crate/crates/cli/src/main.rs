//! `mfiv`: simulate, fit and benchmark the mixed-frequency Tikhonov IV
//! estimator from the command line.
//!
//! Exit status is 0 on success, 2 for usage or configuration errors and 1
//! when a computation fails.

mod config;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use config::{ConfigError, RunConfig, DEFAULT_INFILL_ALPHA};
use mfiv::diagnostics::{default_max_lag, moment_process};
use mfiv::io::{load_csv, write_dataset_csv, write_table, CsvSchema, EmpiricalDataset};
use mfiv::mc::run_infill_experiment_with_reference;
use mfiv::{autocov_diagnostic, build_psi_matrix, run_mc, select_alpha, simulate_sample, spectrum_report, tikhonov_solve, IvProblem};

#[derive(Parser)]
#[command(name = "mfiv", version, about = "Mixed-frequency functional IV regression")]
struct Cli {
    /// TOML file with run settings; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one dataset and write it as sample.csv.
    #[command(allow_negative_numbers = true)]
    Simulate(RunConfig),
    /// Monte Carlo study: mc_report.csv and bands.csv.
    #[command(allow_negative_numbers = true)]
    Mc(RunConfig),
    /// Fit the slope on an input CSV: fit.csv.
    #[command(allow_negative_numbers = true)]
    Fit(RunConfig),
    /// Residual-curve choice of alpha on an input CSV: alpha_path.csv.
    #[command(allow_negative_numbers = true)]
    SelectAlpha(RunConfig),
    /// Grid-refinement experiment: infill.csv.
    #[command(allow_negative_numbers = true)]
    Infill(RunConfig),
    /// Autocovariance and spectrum diagnostics: autocov.csv and spectrum.csv.
    #[command(allow_negative_numbers = true)]
    Diagnose(RunConfig),
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] mfiv::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(format!("invalid configuration: {e}"))
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                CliError::Compute(_) => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let (flags, handler): (&RunConfig, fn(&RunConfig) -> Result<()>) = match &cli.command {
        Command::Simulate(c) => (c, cmd_simulate),
        Command::Mc(c) => (c, cmd_mc),
        Command::Fit(c) => (c, cmd_fit),
        Command::SelectAlpha(c) => (c, cmd_select_alpha),
        Command::Infill(c) => (c, cmd_infill),
        Command::Diagnose(c) => (c, cmd_diagnose),
    };
    let cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?.overlay(flags)?,
        None => flags.clone(),
    };
    cfg.validate()?;
    handler(&cfg)
}

/// Resolves output names under `out_dir`, rejecting any two that coincide
/// with each other or with the input.
fn outputs(cfg: &RunConfig, names: &[&str]) -> Result<Vec<PathBuf>> {
    let dir = cfg.out_dir();
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("output directory {} does not exist", dir.display())));
    }
    let mut paths: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).collect();
    if let Some(k) = &cfg.dump_kernel {
        paths.push(k.clone());
    }
    let mut seen = HashSet::new();
    let normalized = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    if let Some(input) = &cfg.input {
        seen.insert(normalized(input));
    }
    for p in &paths {
        if !seen.insert(normalized(p)) {
            return Err(CliError::Usage(format!(
                "output path {} collides with another input or output",
                p.display()
            )));
        }
    }
    Ok(paths)
}

fn load_input(cfg: &RunConfig) -> Result<EmpiricalDataset> {
    let path = cfg.input.as_ref().ok_or_else(|| CliError::Usage("--input is required".into()))?;
    if !path.is_file() {
        return Err(CliError::Usage(format!("input file {} not found", path.display())));
    }
    let data = load_csv(path, &cfg.schema())?;
    if data.dropped_rows > 0 {
        println!("dropped_rows = {}", data.dropped_rows);
    }
    Ok(data)
}

fn problem_for(cfg: &RunConfig, data: &EmpiricalDataset) -> Result<IvProblem<f64>> {
    Ok(IvProblem::from_sample(
        &data.y,
        &data.z,
        &data.w,
        &data.grid,
        &cfg.instrument(true),
        None,
    )?)
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let out = outputs(cfg, &["sample.csv"])?;
    let sample = simulate_sample(&cfg.dgp())?;
    let data = EmpiricalDataset::from_simulated(&sample);
    write_dataset_csv(&out[0], &data, &CsvSchema::unit_interval())?;
    println!(
        "wrote {} observations on {} grid points to {}",
        data.sample_size(),
        data.grid.len(),
        out[0].display()
    );
    Ok(())
}

fn cmd_mc(cfg: &RunConfig) -> Result<()> {
    let out = outputs(cfg, &["mc_report.csv", "bands.csv"])?;
    let mc = cfg.mc(cfg.mc_alphas());
    let bands_alpha = cfg.bands_alpha.unwrap_or(mc.alphas[0]);
    if !mc.alphas.contains(&bands_alpha) {
        return Err(CliError::Usage(format!("bands_alpha {bands_alpha} is not among the configured alphas")));
    }
    let report = run_mc(&mc)?;
    write_table(
        &out[0],
        &["T", "sigma", "alpha", "i_bias_sq", "i_var", "i_mse"],
        report.per_alpha.iter().map(|a| {
            vec![
                report.sample_size as f64,
                report.sigma,
                a.alpha,
                a.metrics.i_bias_sq,
                a.metrics.i_var,
                a.metrics.i_mse,
            ]
        }),
    )?;
    let band = report.for_alpha(bands_alpha).expect("bands alpha was checked");
    let s = report.metric_grid.nodes();
    write_table(
        &out[1],
        &["s", "truth", "mean", "lo", "hi"],
        (0..s.len()).map(|j| {
            vec![
                s[j],
                report.truth.values()[j],
                band.mean.values()[j],
                band.lo.values()[j],
                band.hi.values()[j],
            ]
        }),
    )?;
    for a in &report.per_alpha {
        println!(
            "T={} sigma={} alpha={:e}: i_bias_sq={:.4} i_var={:.4} i_mse={:.4}",
            report.sample_size, report.sigma, a.alpha, a.metrics.i_bias_sq, a.metrics.i_var, a.metrics.i_mse
        );
    }
    Ok(())
}

fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let out = outputs(cfg, &["fit.csv"])?;
    let data = load_input(cfg)?;
    let problem = problem_for(cfg, &data)?;
    if let Some(path) = &cfg.dump_kernel {
        dump_kernel(path, &problem)?;
    }
    let alpha = match cfg.alpha {
        Some(a) => a,
        None => select_alpha(&problem.operator, &problem.moment, &cfg.alpha_grid()?)?.alpha_star,
    };
    let fit = tikhonov_solve(&problem.operator, &problem.moment, alpha)?;
    let s = data.grid.nodes();
    let b = fit.beta_hat.values();
    write_table(&out[0], &["s", "beta_hat"], s.iter().zip(b).map(|(s, b)| vec![*s, *b]))?;

    let (argmax, max) = b
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
    let min = b.iter().copied().fold(f64::INFINITY, f64::min);
    println!("alpha = {alpha:e}");
    println!("residual_norm = {:e}", fit.residual_norm);
    println!("grid_size = {}", s.len());
    println!("beta_min = {min}");
    println!("beta_max = {max}");
    println!("argmax_s = {}", s[argmax]);
    Ok(())
}

fn dump_kernel(path: &Path, problem: &IvProblem<f64>) -> Result<()> {
    let op = &problem.operator;
    let (u, s, k) = (op.u_grid().nodes(), op.s_grid().nodes(), op.kernel());
    write_table(
        path,
        &["u", "s", "kernel"],
        (0..u.len()).flat_map(|i| (0..s.len()).map(move |j| vec![u[i], s[j], k[(i, j)]])),
    )?;
    Ok(())
}

fn cmd_select_alpha(cfg: &RunConfig) -> Result<()> {
    let out = outputs(cfg, &["alpha_path.csv"])?;
    let data = load_input(cfg)?;
    let problem = problem_for(cfg, &data)?;
    if let Some(path) = &cfg.dump_kernel {
        dump_kernel(path, &problem)?;
    }
    let sel = select_alpha(&problem.operator, &problem.moment, &cfg.alpha_grid()?)?;
    write_table(
        &out[0],
        &["alpha", "rss"],
        sel.alpha_grid.iter().zip(&sel.rss_values).map(|(a, r)| vec![*a, *r]),
    )?;
    println!("alpha_star = {:e}", sel.alpha_star);
    if !sel.excluded.is_empty() {
        println!("excluded = {}", sel.excluded.len());
    }
    Ok(())
}

fn cmd_infill(cfg: &RunConfig) -> Result<()> {
    let out = outputs(cfg, &["infill.csv"])?;
    let m_values = cfg.m_values.clone().unwrap_or_else(|| vec![50, 100, 200, 400]);
    let alpha = cfg.alpha.unwrap_or(DEFAULT_INFILL_ALPHA);
    let reference = cfg.reference_m.unwrap_or(2 * m_values.iter().copied().max().unwrap_or(0));
    let report = run_infill_experiment_with_reference(&cfg.mc(vec![alpha]), &m_values, reference)?;
    write_table(
        &out[0],
        &["m", "disc_error", "i_mse"],
        report.rows.iter().map(|r| vec![r.m as f64, r.disc_error, r.i_mse]),
    )?;
    for r in &report.rows {
        println!("m={} disc_error={:.6} i_mse={:.4}", r.m, r.disc_error, r.i_mse);
    }
    if let Some(slope) = report.rate_slope {
        println!("refinement_slope = {slope:.3}");
    }
    Ok(())
}

fn cmd_diagnose(cfg: &RunConfig) -> Result<()> {
    let out = outputs(cfg, &["autocov.csv", "spectrum.csv"])?;
    let data = load_input(cfg)?;
    let spec = cfg.instrument(true);
    let psi = build_psi_matrix(&spec, &data.grid, &data.w)?;
    let curves = moment_process(&data.y, &psi)?;
    let max_lag = cfg.max_lag.unwrap_or_else(|| default_max_lag(data.sample_size()));
    let ac = autocov_diagnostic(&curves, psi.u_grid().as_ref(), max_lag)?;
    write_table(
        &out[0],
        &["lag", "norm", "partial_sum"],
        ac.lags
            .iter()
            .zip(ac.gamma_norms.iter().zip(&ac.partial_sums))
            .map(|(h, (g, p))| vec![*h as f64, *g, *p]),
    )?;

    let problem = IvProblem::from_sample(&data.y, &data.z, &data.w, &data.grid, &spec, Some(&Arc::clone(psi.u_grid())))?;
    if let Some(path) = &cfg.dump_kernel {
        dump_kernel(path, &problem)?;
    }
    let top_k = cfg.top_k.unwrap_or(20).min(data.grid.len());
    let sv = spectrum_report(&problem.operator, top_k)?;
    write_table(&out[1], &["index", "sigma"], sv.iter().enumerate().map(|(i, s)| vec![(i + 1) as f64, *s]))?;
    println!("summability (H = {max_lag}) = {:e}", ac.total());
    println!("sigma_1 = {:e}", sv.first().copied().unwrap_or(0.0));
    Ok(())
}
