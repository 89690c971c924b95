//! Mixed-frequency instrumental-variable regression with a functional slope.
//!
//! A low-frequency outcome `Y_t` depends on a high-frequency regressor curve
//! `Z_t(s)` through `Y_t = ∫ β(s) Z_t(s) ds + U_t`, with `U_t` mean-independent
//! of a scalar instrument `W_t`. The slope curve `β` is recovered by
//! Tikhonov-regularizing the discretized integral equation
//! `E[Y Ψ(u, W)] = ∫ β(s) E[Z(s) Ψ(u, W)] ds`.
//!
//! Module map:
//! - [`grid`]: sampling grids, Riemann quadrature, curves, interpolation.
//! - [`instrument`]: instrument functions `Ψ(u, w)` and their evaluation matrix.
//! - [`operator`]: empirical moment curve and kernel operator with its adjoint.
//! - [`solver`]: closed-form Tikhonov fit and residual-based `α` selection.
//! - [`simulate`]: the Brownian/AR(1) data-generating process.
//! - [`mc`]: replicated experiments, integrated bias/variance/MSE, infill runs.
//! - [`diagnostics`]: autocovariance summability and operator spectrum.
//! - [`io`]: CSV ingestion and export.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! simulation, Monte Carlo and I/O layers work in `f64`.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod instrument;
pub mod io;
pub mod mc;
pub mod operator;
pub mod scalar;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use diagnostics::{autocov_diagnostic, spectrum_report, AutocovSummary, RateParams};
pub use grid::{interpolate_linear, l2_norm, riemann_inner_product, GridCurve, SamplingGrid};
pub use instrument::{build_psi_matrix, psi_indicator, psi_logistic, InstrumentKind, InstrumentSpec, PsiMatrix};
pub use mc::{integrated_metrics, run_infill_experiment, run_mc, IntegratedMetrics, McConfig, McReport};
pub use operator::{estimate_kernel, estimate_moment, normal_matrix, DiscretizedOperator, IvProblem, MomentCurve};
pub use simulate::{simulate_brownian, simulate_sample, DgpConfig, SimulatedSample, SlopeFunction};
pub use solver::{regularization_path, select_alpha, tikhonov_solve, AlphaSelection, SolveMethod, TikhonovFit};

/// Double-precision sampling grid.
pub type Grid64 = SamplingGrid<f64>;
/// Single-precision sampling grid.
pub type Grid32 = SamplingGrid<f32>;
/// Double-precision curve on a sampling grid.
pub type Curve64 = GridCurve<f64>;
/// Single-precision curve on a sampling grid.
pub type Curve32 = GridCurve<f32>;
/// Double-precision discretized kernel operator.
pub type Operator64 = DiscretizedOperator<f64>;
/// Single-precision discretized kernel operator.
pub type Operator32 = DiscretizedOperator<f32>;
/// Double-precision Tikhonov fit.
pub type Fit64 = TikhonovFit<f64>;
/// Single-precision Tikhonov fit.
pub type Fit32 = TikhonovFit<f32>;
