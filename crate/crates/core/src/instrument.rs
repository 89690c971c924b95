//! Instrument functions `Ψ(u, w)` and the `m × T` evaluation matrix.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrumentKind {
    /// `Ψ(u, w) = 1 / (1 + exp(−u·w))`.
    #[default]
    LogisticCdf,
    /// `Ψ(u, w) = 1{w ≤ u}`.
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InstrumentSpec {
    pub kind: InstrumentKind,
    /// Standardize `W` to zero mean and unit sample variance before use.
    #[serde(default)]
    pub standardize_w: bool,
}

impl InstrumentSpec {
    pub fn logistic() -> Self {
        Self {
            kind: InstrumentKind::LogisticCdf,
            standardize_w: false,
        }
    }

    pub fn standardized(mut self) -> Self {
        self.standardize_w = true;
        self
    }

    pub fn eval<T: Scalar>(&self, u: T, w: T) -> T {
        match self.kind {
            InstrumentKind::LogisticCdf => psi_logistic(u, w),
            InstrumentKind::Indicator => psi_indicator(u, w),
        }
    }
}

/// Logistic CDF of `u·w`, evaluated without overflow for either sign.
pub fn psi_logistic<T: Scalar>(u: T, w: T) -> T {
    let x = u * w;
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn psi_indicator<T: Scalar>(u: T, w: T) -> T {
    if w <= u {
        T::one()
    } else {
        T::zero()
    }
}

/// Returns `(w − mean) / sd` with the `T − 1` sample standard deviation.
pub fn standardize<T: Scalar>(w: &[T]) -> Result<Vec<T>> {
    if w.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    let n = T::from_usize_lossy(w.len());
    let mean = w.iter().fold(T::zero(), |a, x| a + *x) / n;
    let ss = w.iter().fold(T::zero(), |a, x| a + (*x - mean) * (*x - mean));
    let sd = (ss / (n - T::one())).sqrt();
    if sd <= T::zero() || !sd.is_finite() {
        return Err(Error::ZeroVariance);
    }
    Ok(w.iter().map(|x| (*x - mean) / sd).collect())
}

/// `Ψ(u_i, W_t)` laid out with one row per u-grid node and one column per
/// observation.
#[derive(Debug, Clone)]
pub struct PsiMatrix<T: Scalar> {
    entries: DMatrix<T>,
    u_grid: Arc<SamplingGrid<T>>,
}

impl<T: Scalar> PsiMatrix<T> {
    /// Wraps precomputed instrument values (`m_u × T`).
    pub fn from_entries(entries: DMatrix<T>, u_grid: Arc<SamplingGrid<T>>) -> Result<Self> {
        if entries.nrows() != u_grid.len() {
            return Err(Error::LengthMismatch {
                what: "psi rows (u-grid)",
                expected: u_grid.len(),
                found: entries.nrows(),
            });
        }
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "psi entries", index });
        }
        Ok(Self { entries, u_grid })
    }

    pub fn entries(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn u_grid(&self) -> &Arc<SamplingGrid<T>> {
        &self.u_grid
    }

    /// Number of observations `T`.
    pub fn observations(&self) -> usize {
        self.entries.ncols()
    }
}

pub fn build_psi_matrix<T: Scalar>(spec: &InstrumentSpec, u_grid: &Arc<SamplingGrid<T>>, w: &[T]) -> Result<PsiMatrix<T>> {
    if w.is_empty() {
        return Err(Error::InvalidArgument("instrument sample is empty".into()));
    }
    if let Some(index) = w.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            what: "instrument values",
            index,
        });
    }
    let standardized;
    let w = if spec.standardize_w {
        standardized = standardize(w)?;
        &standardized[..]
    } else {
        w
    };
    let u = u_grid.nodes();
    let entries = DMatrix::from_fn(u.len(), w.len(), |i, t| spec.eval(u[i], w[t]));
    Ok(PsiMatrix {
        entries,
        u_grid: Arc::clone(u_grid),
    })
}
