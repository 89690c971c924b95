//! Data-side checks: autocovariance summability of a curve-valued series,
//! singular values of the discretized operator, and rate formulas.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{check_len, SamplingGrid};
use crate::instrument::PsiMatrix;
use crate::operator::DiscretizedOperator;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AutocovSummary<T> {
    pub lags: Vec<usize>,
    /// `∫ |γ̂_h(s, s)| ds` for each lag.
    pub gamma_norms: Vec<T>,
    /// `Σ_{|h| ≤ H} ‖γ̂_h‖₁` for `H = 0, 1, …`.
    pub partial_sums: Vec<T>,
}

impl<T: Scalar> AutocovSummary<T> {
    pub fn max_lag(&self) -> usize {
        self.lags.len() - 1
    }

    pub fn total(&self) -> T {
        *self.partial_sums.last().expect("at least lag 0")
    }
}

/// Lag truncation `⌊T^{1/3}⌋`.
pub fn default_max_lag(sample_size: usize) -> usize {
    let mut h = (sample_size as f64).cbrt().floor() as usize;
    // guard against cbrt rounding just below an exact cube
    while (h + 1).pow(3) <= sample_size {
        h += 1;
    }
    h
}

/// Diagonal autocovariance norms of the series whose row `t` of `curves`
/// holds `X_t` on `grid`.
///
/// `γ̂_h(s, s) = T⁻¹ Σ_{t>h} (X_t(s) − X̄(s))(X_{t−h}(s) − X̄(s))`, integrated
/// in absolute value by the grid's Riemann weights. Requires `H < T/2`.
pub fn autocov_diagnostic<T: Scalar>(curves: &DMatrix<T>, grid: &SamplingGrid<T>, max_lag: usize) -> Result<AutocovSummary<T>> {
    let (n, m) = curves.shape();
    check_len("curve columns", grid.len(), m)?;
    if 2 * max_lag >= n {
        return Err(Error::InvalidArgument(format!("max lag {max_lag} must be below T/2 (T = {n})")));
    }
    if let Some(index) = curves.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "process curves",
            index,
        });
    }
    let tn = T::from_usize_lossy(n);
    let mut centered = curves.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.sum() / tn;
        col.add_scalar_mut(-mean);
    }

    let mut gamma_norms = Vec::with_capacity(max_lag + 1);
    for h in 0..=max_lag {
        let mut norm = T::zero();
        for (j, d) in grid.weights().iter().enumerate() {
            let col = centered.column(j);
            let g = col.rows(h, n - h).dot(&col.rows(0, n - h)) / tn;
            norm += *d * g.abs();
        }
        gamma_norms.push(norm);
    }
    let two = T::lit(2.0);
    let mut partial_sums = Vec::with_capacity(max_lag + 1);
    let mut acc = gamma_norms[0];
    partial_sums.push(acc);
    for g in &gamma_norms[1..] {
        acc += two * *g;
        partial_sums.push(acc);
    }
    Ok(AutocovSummary {
        lags: (0..=max_lag).collect(),
        gamma_norms,
        partial_sums,
    })
}

/// Rows `X_t(u_i) = Y_t Ψ(u_i, W_t)`: the series whose mean is the moment curve.
pub fn moment_process<T: Scalar>(y: &[T], psi: &PsiMatrix<T>) -> Result<DMatrix<T>> {
    check_len("outcome", psi.observations(), y.len())?;
    let e = psi.entries();
    Ok(DMatrix::from_fn(y.len(), e.nrows(), |t, i| y[t] * e[(i, t)]))
}

/// Leading `top_k` singular values of the weighted kernel, decreasing.
pub fn spectrum_report<T: Scalar>(op: &DiscretizedOperator<T>, top_k: usize) -> Result<Vec<T>> {
    let b = op.weighted_kernel();
    let available = b.nrows().min(b.ncols());
    if top_k > available {
        return Err(Error::InvalidArgument(format!(
            "top_k = {top_k} exceeds the {available} available singular values"
        )));
    }
    let mut sv: Vec<T> = b.singular_values().iter().map(|s| s.max(T::zero())).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    sv.truncate(top_k);
    Ok(sv)
}

/// Smoothness and design constants entering the convergence rates. None of
/// these are estimated from data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    /// Source-condition exponent `γ` in `β = (K*K)^γ ψ`.
    pub gamma: f64,
    /// Bound `R` on `‖ψ‖²`.
    pub r_bound: f64,
    /// Hölder exponent `κ` of the regressor paths.
    pub kappa: f64,
    /// Hölder constant `L`.
    pub lipschitz: f64,
    /// Bound `Ψ̄` on `sup_w ‖Ψ(·, w)‖²`.
    pub psi_bar: f64,
}

impl RateParams {
    /// `α ~ T^{−1/(2γ+1)}`, which balances the bias and variance terms.
    pub fn balanced_alpha(&self, sample_size: usize) -> f64 {
        (sample_size as f64).powf(-1.0 / (2.0 * self.gamma + 1.0))
    }

    /// MISE order `T^{−2γ/(2γ+1)}` at the balanced `α`.
    pub fn mise_rate(&self, sample_size: usize) -> f64 {
        (sample_size as f64).powf(-2.0 * self.gamma / (2.0 * self.gamma + 1.0))
    }

    /// `(1/(αT), α^{2γ})`: the variance and bias orders for a given `α`.
    pub fn mise_terms(&self, alpha: f64, sample_size: usize) -> (f64, f64) {
        (1.0 / (alpha * sample_size as f64), alpha.powf(2.0 * self.gamma))
    }

    /// Largest mesh of order `α^{1/κ} T^{−1/(2κ)}` for which discretization
    /// does not slow the rate.
    pub fn max_mesh(&self, alpha: f64, sample_size: usize) -> f64 {
        alpha.powf(1.0 / self.kappa) * (sample_size as f64).powf(-0.5 / self.kappa)
    }

    /// Bound `E‖r̂‖ L⁴ Ψ̄² Δ^{2κ} / α³` on `E‖β̂_m − β̂‖²`.
    pub fn discretization_bound(&self, alpha: f64, mesh: f64, mean_moment_norm: f64) -> f64 {
        mean_moment_norm * self.lipschitz.powi(4) * self.psi_bar.powi(2) * mesh.powf(2.0 * self.kappa) / alpha.powi(3)
    }
}
