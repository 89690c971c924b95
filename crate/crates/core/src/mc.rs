//! Replicated experiments: integrated squared bias, variance and MSE of the
//! Tikhonov estimator, pointwise bands, and the grid-refinement (infill)
//! experiment.
//!
//! Replication `r` draws from [`replication_rng`]`(master_seed, r)` and
//! results are reduced in replication order, so a report depends only on
//! its configuration.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{check_len, interpolate_linear, l2_norm, GridCurve, SamplingGrid};
use crate::instrument::InstrumentSpec;
use crate::operator::IvProblem;
use crate::scalar::Scalar;
use crate::simulate::{replication_rng, simulate_sample_with, DgpConfig, SimulatedSample};
use crate::solver::TikhonovSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    /// Data-generating process; its `seed` is ignored in favour of
    /// `master_seed`.
    pub dgp: DgpConfig,
    pub alphas: Vec<f64>,
    pub replications: usize,
    /// Resolution of the grid `j/n` on which metrics are computed; capped
    /// at `dgp.m_sim`.
    pub metric_grid_points: usize,
    pub master_seed: u64,
    pub instrument: InstrumentSpec,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            dgp: DgpConfig::default(),
            alphas: vec![1e-5, 1e-6, 1e-7],
            replications: 5000,
            metric_grid_points: 100,
            master_seed: 0,
            instrument: InstrumentSpec::logistic(),
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = match self.dgp.validate() {
            Err(Error::InvalidConfig(p)) => p,
            Err(e) => vec![e.to_string()],
            Ok(()) => Vec::new(),
        };
        if self.replications < 2 {
            problems.push(format!("replications must be >= 2, got {}", self.replications));
        }
        if self.metric_grid_points == 0 {
            problems.push("metric_grid_points must be >= 1".into());
        }
        if self.alphas.is_empty() {
            problems.push("at least one alpha is required".into());
        }
        for a in &self.alphas {
            if !(*a > 0.0 && a.is_finite()) {
                problems.push(format!("alpha must be positive, got {a}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratedMetrics<T> {
    pub i_bias_sq: T,
    pub i_var: T,
    pub i_mse: T,
}

/// Integrated squared bias, variance and MSE on `metric_grid`.
///
/// Estimates and truth are interpolated onto the metric grid when they live
/// elsewhere. The variance divides by the number of estimates, so
/// `i_mse = i_bias_sq + i_var` up to rounding.
pub fn integrated_metrics<T: Scalar>(
    estimates: &[GridCurve<T>],
    truth: &GridCurve<T>,
    metric_grid: &Arc<SamplingGrid<T>>,
) -> Result<IntegratedMetrics<T>> {
    if estimates.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "integrated metrics need at least 2 estimates, got {}",
            estimates.len()
        )));
    }
    let truth = interpolate_linear(truth, metric_grid)?;
    let curves = estimates.iter().map(|e| interpolate_linear(e, metric_grid)).collect::<Result<Vec<_>>>()?;
    let mean = pointwise_mean(&curves);
    let n = T::from_usize_lossy(curves.len());

    let sq_dist = |a: &[T], b: &[T]| -> T {
        metric_grid
            .weights()
            .iter()
            .zip(a.iter().zip(b))
            .fold(T::zero(), |acc, (d, (x, y))| acc + *d * (*x - *y) * (*x - *y))
    };
    let i_bias_sq = sq_dist(&mean, truth.values());
    let i_var = curves.iter().fold(T::zero(), |acc, c| acc + sq_dist(c.values(), &mean)) / n;
    let i_mse = curves.iter().fold(T::zero(), |acc, c| acc + sq_dist(c.values(), truth.values())) / n;
    Ok(IntegratedMetrics { i_bias_sq, i_var, i_mse })
}

fn pointwise_mean<T: Scalar>(curves: &[GridCurve<T>]) -> Vec<T> {
    let m = curves[0].len();
    let n = T::from_usize_lossy(curves.len());
    let mut acc = vec![T::zero(); m];
    for c in curves {
        for (a, v) in acc.iter_mut().zip(c.values()) {
            *a += *v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Empirical quantile with linear interpolation between order statistics
/// (position `(n − 1) p` in the sorted sample).
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

#[derive(Debug, Clone)]
pub struct AlphaReport {
    pub alpha: f64,
    pub metrics: IntegratedMetrics<f64>,
    pub mean: GridCurve<f64>,
    /// Pointwise 2.5% quantile across replications.
    pub lo: GridCurve<f64>,
    /// Pointwise 97.5% quantile across replications.
    pub hi: GridCurve<f64>,
}

#[derive(Debug, Clone)]
pub struct McReport {
    pub sample_size: usize,
    pub sigma: f64,
    pub replications: usize,
    pub master_seed: u64,
    pub metric_grid: Arc<SamplingGrid<f64>>,
    pub truth: GridCurve<f64>,
    pub per_alpha: Vec<AlphaReport>,
}

impl McReport {
    pub fn for_alpha(&self, alpha: f64) -> Option<&AlphaReport> {
        self.per_alpha.iter().find(|r| r.alpha == alpha)
    }
}

/// Fits every `α` on one simulated sample, on the sample's own grid.
pub fn fit_sample(sample: &SimulatedSample, instrument: &InstrumentSpec, alphas: &[f64]) -> Result<Vec<GridCurve<f64>>> {
    let problem = IvProblem::from_sample(&sample.y, &sample.z, &sample.w, &sample.grid, instrument, None)?;
    let system = TikhonovSystem::new(&problem.operator, &problem.moment)?;
    alphas.iter().map(|&a| system.solve(a).map(|f| f.beta_hat)).collect()
}

/// Runs the replications in parallel and reports the first failure in
/// replication order.
fn replicate<F, R>(replications: usize, f: F) -> Result<Vec<R>>
where
    F: Fn(u64) -> Result<R> + Sync,
    R: Send,
{
    let results: Vec<Result<R>> = (0..replications as u64).into_par_iter().map(&f).collect();
    let mut out = Vec::with_capacity(results.len());
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => out.push(v),
            Err(e) => {
                return Err(Error::Replication {
                    replication: r as u64,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(out)
}

pub fn run_mc(cfg: &McConfig) -> Result<McReport> {
    cfg.validate()?;
    // a metric grid finer than the simulation grid would start before its first node
    let metric_grid = Arc::new(SamplingGrid::unit(cfg.metric_grid_points.min(cfg.dgp.m_sim))?);
    let truth = cfg.dgp.slope.on_grid(&metric_grid)?;

    let per_rep: Vec<Vec<GridCurve<f64>>> = replicate(cfg.replications, |r| {
        let mut rng = replication_rng(cfg.master_seed, r);
        let sample = simulate_sample_with(&cfg.dgp, &mut rng)?;
        fit_sample(&sample, &cfg.instrument, &cfg.alphas)?
            .iter()
            .map(|b| interpolate_linear(b, &metric_grid))
            .collect()
    })?;

    let mut per_alpha = Vec::with_capacity(cfg.alphas.len());
    for (k, &alpha) in cfg.alphas.iter().enumerate() {
        let curves: Vec<GridCurve<f64>> = per_rep.iter().map(|fits| fits[k].clone()).collect();
        let metrics = integrated_metrics(&curves, &truth, &metric_grid)?;
        let mean = GridCurve::new(Arc::clone(&metric_grid), pointwise_mean(&curves))?;
        let (lo, hi) = pointwise_band(&curves, &metric_grid, 0.025, 0.975)?;
        per_alpha.push(AlphaReport {
            alpha,
            metrics,
            mean,
            lo,
            hi,
        });
    }

    Ok(McReport {
        sample_size: cfg.dgp.sample_size,
        sigma: cfg.dgp.sigma,
        replications: cfg.replications,
        master_seed: cfg.master_seed,
        metric_grid,
        truth,
        per_alpha,
    })
}

fn pointwise_band(curves: &[GridCurve<f64>], grid: &Arc<SamplingGrid<f64>>, p_lo: f64, p_hi: f64) -> Result<(GridCurve<f64>, GridCurve<f64>)> {
    let m = grid.len();
    let mut lo = Vec::with_capacity(m);
    let mut hi = Vec::with_capacity(m);
    let mut column = Vec::with_capacity(curves.len());
    for j in 0..m {
        column.clear();
        column.extend(curves.iter().map(|c| c.values()[j]));
        column.sort_by(f64::total_cmp);
        lo.push(empirical_quantile(&column, p_lo));
        hi.push(empirical_quantile(&column, p_hi));
    }
    Ok((GridCurve::new(Arc::clone(grid), lo)?, GridCurve::new(Arc::clone(grid), hi)?))
}

/// Columns of `z` at the nodes `j/m` of a coarser uniform grid; `m` must
/// divide the sample's resolution.
pub fn subsample(sample: &SimulatedSample, m: usize) -> Result<(DMatrix<f64>, Arc<SamplingGrid<f64>>)> {
    let fine = sample.grid.len();
    if m == 0 || !fine.is_multiple_of(m) {
        return Err(Error::InvalidArgument(format!("m = {m} does not divide the simulation grid size {fine}")));
    }
    let stride = fine / m;
    let z = DMatrix::from_fn(sample.z.nrows(), m, |t, j| sample.z[(t, (j + 1) * stride - 1)]);
    Ok((z, Arc::new(SamplingGrid::unit(m)?)))
}

/// Estimates on each coarse grid for one dataset simulated at the reference
/// resolution. The last entry is the reference fit.
pub fn infill_fits(
    sample: &SimulatedSample,
    m_values: &[usize],
    alpha: f64,
    instrument: &InstrumentSpec,
) -> Result<(Vec<GridCurve<f64>>, GridCurve<f64>)> {
    let fit_at = |m: usize| -> Result<GridCurve<f64>> {
        let (z, grid) = subsample(sample, m)?;
        let problem = IvProblem::from_sample(&sample.y, &z, &sample.w, &grid, instrument, None)?;
        Ok(TikhonovSystem::new(&problem.operator, &problem.moment)?.solve(alpha)?.beta_hat)
    };
    let reference = fit_at(sample.grid.len())?;
    let fits = m_values.iter().map(|&m| fit_at(m)).collect::<Result<Vec<_>>>()?;
    Ok((fits, reference))
}

/// `‖β̂_m − β̂_ref‖` on each coarse grid for a single dataset.
pub fn infill_errors(sample: &SimulatedSample, m_values: &[usize], alpha: f64, instrument: &InstrumentSpec) -> Result<Vec<f64>> {
    let (fits, reference) = infill_fits(sample, m_values, alpha, instrument)?;
    fits.iter()
        .map(|f| {
            let r = interpolate_linear(&reference, f.grid())?;
            Ok(l2_norm(&f.axpby(1.0, &r, -1.0)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfillRow {
    pub m: usize,
    /// Mean over replications of `‖β̂_m − β̂_ref‖`.
    pub disc_error: f64,
    pub i_mse: f64,
}

#[derive(Debug, Clone)]
pub struct InfillReport {
    pub alpha: f64,
    pub reference_m: usize,
    pub rows: Vec<InfillRow>,
    /// Least-squares slope of `ln disc_error` on `ln Δ_m` over the rows with
    /// `m < reference_m`; `None` with fewer than two such rows.
    pub rate_slope: Option<f64>,
}

/// Grid-refinement experiment with the reference resolution `2·max(m)`.
pub fn run_infill_experiment(base: &McConfig, m_values: &[usize]) -> Result<InfillReport> {
    let max = m_values.iter().copied().max().unwrap_or(0);
    run_infill_experiment_with_reference(base, m_values, 2 * max)
}

/// Paths are simulated once per replication at `reference_m` and subsampled
/// to each `m`, so every resolution sees the same data. Uses the single
/// `α` in `base.alphas`. i-MSE for a given `m` is measured on the metric
/// grid, coarsened to `m` points when `m` is smaller.
pub fn run_infill_experiment_with_reference(base: &McConfig, m_values: &[usize], reference_m: usize) -> Result<InfillReport> {
    base.validate()?;
    if base.alphas.len() != 1 {
        return Err(Error::InvalidConfig(vec![format!(
            "infill experiment runs a single alpha, got {}",
            base.alphas.len()
        )]));
    }
    if m_values.is_empty() || m_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(vec!["m_values must be nonempty and strictly increasing".into()]));
    }
    if let Some(&bad) = m_values.iter().find(|&&m| m == 0 || m > reference_m || !reference_m.is_multiple_of(m)) {
        return Err(Error::InvalidConfig(vec![format!(
            "m = {bad} must divide the reference resolution {reference_m}"
        )]));
    }
    let alpha = base.alphas[0];
    let dgp = DgpConfig {
        m_sim: reference_m,
        ..base.dgp.clone()
    };

    let per_rep: Vec<(Vec<f64>, Vec<GridCurve<f64>>)> = replicate(base.replications, |r| {
        let mut rng = replication_rng(base.master_seed, r);
        let sample = simulate_sample_with(&dgp, &mut rng)?;
        let (fits, reference) = infill_fits(&sample, m_values, alpha, &base.instrument)?;
        let errors = fits
            .iter()
            .map(|f| {
                let r = interpolate_linear(&reference, f.grid())?;
                Ok(l2_norm(&f.axpby(1.0, &r, -1.0)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((errors, fits))
    })?;

    let reps = per_rep.len() as f64;
    let mut rows = Vec::with_capacity(m_values.len());
    for (k, &m) in m_values.iter().enumerate() {
        let disc_error = per_rep.iter().map(|(e, _)| e[k]).sum::<f64>() / reps;
        let metric = Arc::new(SamplingGrid::unit(base.metric_grid_points.min(m))?);
        let truth = base.dgp.slope.on_grid(&metric)?;
        let curves: Vec<GridCurve<f64>> = per_rep.iter().map(|(_, f)| f[k].clone()).collect();
        let metrics = integrated_metrics(&curves, &truth, &metric)?;
        rows.push(InfillRow {
            m,
            disc_error,
            i_mse: metrics.i_mse,
        });
    }
    let rate_slope = refinement_rate(&rows, reference_m);
    Ok(InfillReport {
        alpha,
        reference_m,
        rows,
        rate_slope,
    })
}

fn refinement_rate(rows: &[InfillRow], reference_m: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.m < reference_m && r.disc_error > 0.0)
        .map(|r| ((1.0 / r.m as f64).ln(), r.disc_error.ln()))
        .collect();
    least_squares_slope(&pts)
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Checks that per-estimate curves share one grid; used by callers that
/// assemble estimates by hand.
pub fn check_same_length<T: Scalar>(estimates: &[GridCurve<T>]) -> Result<()> {
    if let Some(first) = estimates.first() {
        for e in estimates {
            check_len("estimate", first.len(), e.len())?;
        }
    }
    Ok(())
}
