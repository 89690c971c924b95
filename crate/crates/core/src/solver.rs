//! Closed-form Tikhonov fit `β̂ = (αI + K̂*K̂)⁻¹ K̂*r̂` and residual-based
//! selection of `α`.
//!
//! The normal equations are solved in `D_s^{1/2}`-scaled coordinates
//! `x = D_s^{1/2} β`, where `K̂*K̂` becomes the symmetric matrix returned by
//! [`normal_matrix`]:
//!
//! ```text
//! (αI + A) x = D_s^{1/2} K̂*r̂,    β = D_s^{-1/2} x
//! ```
//!
//! On a uniform grid over `[0, 1]` this is the familiar
//! `(αI + ZᵀΨᵀΨZ/(Tm)²) β = ZᵀΨᵀΨy/(T²m)`.

use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{ensure_same_grid, l2_norm, GridCurve};
use crate::operator::{normal_matrix, DiscretizedOperator, MomentCurve};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveMethod {
    /// Cholesky factorization of `αI + A`.
    CholeskyPD,
    /// Symmetric eigendecomposition of `αI + A` after a failed Cholesky.
    FallbackSymmetric,
    /// Shared eigendecomposition of `A` reused across a path of `α`.
    SpectralPath,
}

#[derive(Debug, Clone)]
pub struct TikhonovFit<T: Scalar> {
    pub beta_hat: GridCurve<T>,
    pub alpha: T,
    /// `‖K̂β̂ − r̂‖` on the u-grid.
    pub residual_norm: T,
    /// `‖(αI + K̂*K̂)β̂ − K̂*r̂‖` on the s-grid.
    pub normal_residual: T,
    pub solve_method: SolveMethod,
}

#[derive(Debug, Clone)]
pub struct AlphaSelection<T> {
    pub alpha_grid: Vec<T>,
    /// `α⁻¹‖K̂β̂_α − r̂‖²`, aligned with `alpha_grid`.
    pub rss_values: Vec<T>,
    pub alpha_star: T,
    /// Grid points dropped because their RSS was not finite.
    pub excluded: Vec<T>,
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha.to_f64_lossy()))
    }
}

/// `n` points spaced evenly in `log10` between `lo` and `hi` inclusive.
pub fn log_spaced<T: Scalar>(lo: T, hi: T, n: usize) -> Result<Vec<T>> {
    check_alpha(lo)?;
    check_alpha(hi)?;
    if n == 0 || hi < lo || (n == 1 && hi != lo) {
        return Err(Error::InvalidArgument(format!(
            "log grid needs n >= 1 and lo <= hi, got n={n}, [{lo}, {hi}]"
        )));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    let last = T::from_usize_lossy(n - 1);
    let mut out: Vec<T> = (0..n).map(|k| T::lit(10.0).powf(a + (b - a) * T::from_usize_lossy(k) / last)).collect();
    out[0] = lo;
    out[n - 1] = hi;
    Ok(out)
}

/// 50 log-spaced points on `[1e-8, 1e-1]`.
pub fn default_alpha_grid<T: Scalar>() -> Vec<T> {
    log_spaced(T::lit(1e-8), T::lit(1e-1), 50).expect("static grid")
}

/// Reusable pieces of the normal equations for one `(K̂, r̂)` pair.
#[derive(Debug, Clone)]
pub struct TikhonovSystem<'a, T: Scalar> {
    operator: &'a DiscretizedOperator<T>,
    moment: &'a MomentCurve<T>,
    normal: DMatrix<T>,
    sqrt_ws: Vec<T>,
    rhs: DVector<T>,
    adjoint_rhs: GridCurve<T>,
}

impl<'a, T: Scalar> TikhonovSystem<'a, T> {
    pub fn new(operator: &'a DiscretizedOperator<T>, moment: &'a MomentCurve<T>) -> Result<Self> {
        ensure_same_grid(operator.u_grid(), moment.grid())?;
        let adjoint_rhs = operator.apply_adjoint(moment.curve())?;
        let sqrt_ws: Vec<T> = operator.s_grid().weights().iter().map(|d| d.sqrt()).collect();
        let rhs = DVector::from_iterator(sqrt_ws.len(), sqrt_ws.iter().zip(adjoint_rhs.values()).map(|(w, v)| *w * *v));
        Ok(Self {
            operator,
            moment,
            normal: normal_matrix(operator),
            sqrt_ws,
            rhs,
            adjoint_rhs,
        })
    }

    pub fn normal(&self) -> &DMatrix<T> {
        &self.normal
    }

    /// `K̂*r̂` on the s-grid.
    pub fn adjoint_rhs(&self) -> &GridCurve<T> {
        &self.adjoint_rhs
    }

    pub fn solve(&self, alpha: T) -> Result<TikhonovFit<T>> {
        check_alpha(alpha)?;
        let mut m = self.normal.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += alpha;
        }
        let (x, method) = solve_symmetric(m, &self.rhs);
        self.finish(alpha, x, method)
    }

    /// One fit per `α`, sharing a single eigendecomposition of `A`.
    pub fn path(&self, alphas: &[T]) -> Result<Vec<TikhonovFit<T>>> {
        for &a in alphas {
            check_alpha(a)?;
        }
        if alphas.is_empty() {
            return Ok(Vec::new());
        }
        let eig = SymmetricEigen::new(self.normal.clone());
        let coeffs = eig.eigenvectors.tr_mul(&self.rhs);
        alphas
            .iter()
            .map(|&alpha| {
                if eig.eigenvalues.iter().any(|&l| l + alpha <= T::zero()) {
                    return self.solve(alpha);
                }
                let scaled = DVector::from_fn(coeffs.len(), |k, _| coeffs[k] / (eig.eigenvalues[k] + alpha));
                let x = &eig.eigenvectors * scaled;
                self.finish(alpha, x, SolveMethod::SpectralPath)
            })
            .collect()
    }

    fn finish(&self, alpha: T, x: DVector<T>, solve_method: SolveMethod) -> Result<TikhonovFit<T>> {
        let beta: Vec<T> = x.iter().zip(&self.sqrt_ws).map(|(xi, w)| *xi / *w).collect();
        let beta_hat = GridCurve::new(Arc::clone(self.operator.s_grid()), beta)?;

        let fitted = self.operator.apply(&beta_hat)?;
        let residual = fitted.axpby(T::one(), self.moment.curve(), -T::one())?;
        let normal_lhs = self.operator.apply_adjoint(&fitted)?;
        let normal_res = normal_lhs
            .axpby(T::one(), &beta_hat, alpha)?
            .axpby(T::one(), &self.adjoint_rhs, -T::one())?;

        Ok(TikhonovFit {
            residual_norm: l2_norm(&residual),
            normal_residual: l2_norm(&normal_res),
            beta_hat,
            alpha,
            solve_method,
        })
    }
}

/// Solves the symmetric system `m x = rhs`: Cholesky first, symmetric
/// eigendecomposition (pseudo-inverse on a numerically null spectrum) if the
/// factorization breaks down.
pub(crate) fn solve_symmetric<T: Scalar>(m: DMatrix<T>, rhs: &DVector<T>) -> (DVector<T>, SolveMethod) {
    if let Some(chol) = m.clone().cholesky() {
        let x = chol.solve(rhs);
        if x.iter().all(|v| v.is_finite()) {
            return (x, SolveMethod::CholeskyPD);
        }
    }
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let scale = eig.eigenvalues.iter().fold(T::zero(), |a, l| a.max(l.abs()));
    let cutoff = scale * T::default_epsilon() * T::from_usize_lossy(n.max(1));
    let coeffs = eig.eigenvectors.tr_mul(rhs);
    let scaled = DVector::from_fn(n, |k, _| {
        let l = eig.eigenvalues[k];
        if l.abs() > cutoff {
            coeffs[k] / l
        } else {
            T::zero()
        }
    });
    (&eig.eigenvectors * scaled, SolveMethod::FallbackSymmetric)
}

pub fn tikhonov_solve<T: Scalar>(op: &DiscretizedOperator<T>, r: &MomentCurve<T>, alpha: T) -> Result<TikhonovFit<T>> {
    check_alpha(alpha)?;
    TikhonovSystem::new(op, r)?.solve(alpha)
}

pub fn regularization_path<T: Scalar>(op: &DiscretizedOperator<T>, r: &MomentCurve<T>, alphas: &[T]) -> Result<Vec<TikhonovFit<T>>> {
    for &a in alphas {
        check_alpha(a)?;
    }
    TikhonovSystem::new(op, r)?.path(alphas)
}

/// Minimizes `RSS(α) = α⁻¹‖K̂β̂_α − r̂‖²` over `alpha_grid`; exact ties go to
/// the larger `α`.
pub fn select_alpha<T: Scalar>(op: &DiscretizedOperator<T>, r: &MomentCurve<T>, alpha_grid: &[T]) -> Result<AlphaSelection<T>> {
    if alpha_grid.is_empty() {
        return Err(Error::InvalidArgument("alpha grid is empty".into()));
    }
    let fits = regularization_path(op, r, alpha_grid)?;
    let mut selection = AlphaSelection {
        alpha_grid: Vec::with_capacity(fits.len()),
        rss_values: Vec::with_capacity(fits.len()),
        alpha_star: T::zero(),
        excluded: Vec::new(),
    };
    let mut best: Option<(T, T)> = None;
    for fit in &fits {
        let rss = fit.residual_norm * fit.residual_norm / fit.alpha;
        if !rss.is_finite() {
            warn!("alpha {} excluded: non-finite RSS", fit.alpha);
            selection.excluded.push(fit.alpha);
            continue;
        }
        selection.alpha_grid.push(fit.alpha);
        selection.rss_values.push(rss);
        best = match best {
            None => Some((fit.alpha, rss)),
            Some((a, v)) if rss < v || (rss == v && fit.alpha > a) => Some((fit.alpha, rss)),
            keep => keep,
        };
    }
    let (alpha_star, _) = best.ok_or(Error::NoFiniteResidual)?;
    selection.alpha_star = alpha_star;
    Ok(selection)
}
