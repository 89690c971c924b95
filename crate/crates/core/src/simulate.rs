//! Synthetic data from the Brownian-noise design:
//!
//! ```text
//! W_t = c + ρ W_{t−1} + ε_t,              ε_t ~ N(0, 1)
//! Z_t(s) = √(s² + W_t²) + σ B_t(s)
//! U_t = 0.5 ∫ B_t(s) ds + 0.5 V_t,       V_t ~ N(0, 1)
//! Y_t = ∫ β(s) Z_t(s) ds + U_t
//! ```
//!
//! `B_t` are independent Brownian paths on `[0, 1]` started at
//! `U(−1/2, 1/2)` draws. Integrals use the grid's Riemann weights.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{interpolate_linear, GridCurve, SamplingGrid};

/// Burn-in draws discarded before the first retained instrument value.
pub const DEFAULT_BURN_IN: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum SlopeFunction {
    /// `β(s) = −10 exp(s)`.
    NegTenExp,
    /// `β(s) = 10 s`.
    TenLinear,
    /// Tabulated slope, linearly interpolated.
    Tabulated(GridCurve<f64>),
}

impl SlopeFunction {
    pub fn name(&self) -> &'static str {
        match self {
            Self::NegTenExp => "neg-ten-exp",
            Self::TenLinear => "ten-linear",
            Self::Tabulated(_) => "tabulated",
        }
    }

    /// Values at the weighted nodes of `grid`.
    pub fn on_grid(&self, grid: &Arc<SamplingGrid<f64>>) -> Result<GridCurve<f64>> {
        match self {
            Self::NegTenExp => GridCurve::from_fn(Arc::clone(grid), |s| -10.0 * s.exp()),
            Self::TenLinear => GridCurve::from_fn(Arc::clone(grid), |s| 10.0 * s),
            Self::Tabulated(curve) => interpolate_linear(curve, grid),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    pub sample_size: usize,
    /// Resolution of the simulation grid on `[0, 1]`.
    pub m_sim: usize,
    pub sigma: f64,
    pub slope: SlopeFunction,
    pub seed: u64,
    pub ar_coef: f64,
    pub ar_intercept: f64,
    pub burn_in: usize,
    /// Zero the Brownian component and `V_t`, so `Z_t = k(·, W_t)` and `U_t = 0`.
    pub noiseless: bool,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            sample_size: 1000,
            m_sim: 200,
            sigma: 0.5,
            slope: SlopeFunction::NegTenExp,
            seed: 0,
            ar_coef: 0.7,
            ar_intercept: 0.5,
            burn_in: DEFAULT_BURN_IN,
            noiseless: false,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.sample_size == 0 {
            problems.push("sample_size must be >= 1".to_string());
        }
        if self.m_sim == 0 {
            problems.push("m_sim must be >= 1".to_string());
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 || self.sigma.is_infinite() {
            problems.push(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.ar_coef.is_nan() || self.ar_coef.abs() >= 1.0 {
            problems.push(format!("|ar_coef| must be < 1, got {}", self.ar_coef));
        }
        if !self.ar_intercept.is_finite() {
            problems.push("ar_intercept must be finite".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    /// `c / (1 − ρ)`.
    pub fn stationary_mean(&self) -> f64 {
        self.ar_intercept / (1.0 - self.ar_coef)
    }

    pub fn grid(&self) -> Result<Arc<SamplingGrid<f64>>> {
        Ok(Arc::new(SamplingGrid::unit(self.m_sim)?))
    }
}

/// A path on the weighted nodes together with its starting value `B(s_0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub initial: f64,
    pub path: GridCurve<f64>,
}

/// Builds `B(s_j) = B(s_0) + Σ_{k≤j} √δ_k ξ_k` from standard-normal draws `ξ`.
pub fn brownian_from_draws(grid: &Arc<SamplingGrid<f64>>, initial: f64, normals: &[f64]) -> Result<BrownianPath> {
    let mut level = initial;
    let mut values = Vec::with_capacity(grid.len());
    for (d, xi) in grid.weights().iter().zip(normals) {
        level += d.sqrt() * xi;
        values.push(level);
    }
    let path = GridCurve::new(Arc::clone(grid), values)?;
    Ok(BrownianPath { initial, path })
}

pub fn simulate_brownian<R: RngCore + ?Sized>(grid: &Arc<SamplingGrid<f64>>, rng: &mut R) -> BrownianPath {
    let initial = rng.random_range(-0.5..0.5);
    let normals: Vec<f64> = (0..grid.len()).map(|_| rng.sample(StandardNormal)).collect();
    brownian_from_draws(grid, initial, &normals).expect("finite normal draws")
}

/// Stationary AR(1) instrument: starts at the stationary mean and discards
/// `burn_in` draws.
pub fn simulate_instrument<R: RngCore + ?Sized>(cfg: &DgpConfig, rng: &mut R) -> Vec<f64> {
    let mut w = cfg.stationary_mean();
    let mut out = Vec::with_capacity(cfg.sample_size);
    for k in 0..cfg.burn_in + cfg.sample_size {
        let eps: f64 = rng.sample(StandardNormal);
        w = cfg.ar_intercept + cfg.ar_coef * w + eps;
        if k >= cfg.burn_in {
            out.push(w);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SimulatedSample {
    pub y: Vec<f64>,
    /// `T × m_sim`, one observation per row.
    pub z: DMatrix<f64>,
    pub w: Vec<f64>,
    /// Brownian paths on the weighted nodes, `T × m_sim`.
    pub brownian: DMatrix<f64>,
    pub u: Vec<f64>,
    pub grid: Arc<SamplingGrid<f64>>,
    pub slope: GridCurve<f64>,
}

impl SimulatedSample {
    pub fn sample_size(&self) -> usize {
        self.y.len()
    }
}

/// `k(s, w) = √(s² + w²)`.
pub fn link_kernel(s: f64, w: f64) -> f64 {
    s.hypot(w)
}

pub fn simulate_sample(cfg: &DgpConfig) -> Result<SimulatedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    simulate_sample_with(cfg, &mut rng)
}

/// Draw order: instrument series, then per observation the path start, the
/// `m` increments and `V_t`.
pub fn simulate_sample_with<R: RngCore + ?Sized>(cfg: &DgpConfig, rng: &mut R) -> Result<SimulatedSample> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let slope = cfg.slope.on_grid(&grid)?;
    let (t_len, m) = (cfg.sample_size, grid.len());
    let nodes = grid.nodes();
    let weights = grid.weights();

    let w = simulate_instrument(cfg, rng);
    let mut z = DMatrix::zeros(t_len, m);
    let mut brownian = DMatrix::zeros(t_len, m);
    let mut y = Vec::with_capacity(t_len);
    let mut u = Vec::with_capacity(t_len);

    for t in 0..t_len {
        let (path_integral, v) = if cfg.noiseless {
            (0.0, 0.0)
        } else {
            let path = simulate_brownian(&grid, rng);
            let v: f64 = rng.sample(StandardNormal);
            for (j, b) in path.path.values().iter().enumerate() {
                brownian[(t, j)] = *b;
            }
            (grid.integrate_unchecked(path.path.values()), v)
        };
        let mut signal = 0.0;
        for j in 0..m {
            let zt = link_kernel(nodes[j], w[t]) + cfg.sigma * brownian[(t, j)];
            z[(t, j)] = zt;
            signal += slope.values()[j] * zt * weights[j];
        }
        let ut = 0.5 * path_integral + 0.5 * v;
        u.push(ut);
        y.push(signal + ut);
    }

    Ok(SimulatedSample {
        y,
        z,
        w,
        brownian,
        u,
        grid,
        slope,
    })
}

/// Generator for replication `index` under `master_seed`: a ChaCha stream
/// selected by the replication index, so replications are independent of
/// one another and of execution order.
pub fn replication_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
