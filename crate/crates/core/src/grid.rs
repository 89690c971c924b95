//! Sampling grids, Riemann quadrature and curves on grids.
//!
//! A grid is an increasing sequence `s_0 < s_1 < … < s_m`. Node `s_j` for
//! `j ≥ 1` carries the weight `δ_j = s_j − s_{j−1}`; `s_0` carries none. A
//! [`GridCurve`] stores one value per weighted node, so integrals are
//! `Σ_j f(s_j) δ_j`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid<T> {
    points: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> SamplingGrid<T> {
    /// Builds a grid from the full point sequence `s_0, …, s_m` (at least two
    /// points, strictly increasing, finite).
    pub fn new(points: Vec<T>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {}", points.len())));
        }
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite { what: "grid points", index });
        }
        let weights: Vec<T> = points.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(j) = weights.iter().position(|d| *d <= T::zero()) {
            return Err(Error::InvalidGrid(format!("points not strictly increasing at index {}", j + 1)));
        }
        Ok(Self { points, weights })
    }

    /// `m` equal cells on `[a, b]`: nodes `a + (b − a) j / m`, every weight
    /// exactly `(b − a) / m`.
    pub fn uniform(m: usize, a: T, b: T) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidGrid("uniform grid needs m >= 1".into()));
        }
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::InvalidGrid(format!("invalid interval [{a}, {b}]")));
        }
        let len = b - a;
        let mm = T::from_usize_lossy(m);
        let mut points: Vec<T> = (0..=m).map(|j| a + len * T::from_usize_lossy(j) / mm).collect();
        points[m] = b;
        Ok(Self {
            points,
            weights: vec![len / mm; m],
        })
    }

    /// Uniform grid on `[0, 1]` with nodes `j / m`.
    pub fn unit(m: usize) -> Result<Self> {
        Self::uniform(m, T::zero(), T::one())
    }

    /// Number of weighted nodes `m`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// All points `s_0, …, s_m`.
    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// Weighted nodes `s_1, …, s_m`.
    pub fn nodes(&self) -> &[T] {
        &self.points[1..]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn start(&self) -> T {
        self.points[0]
    }

    pub fn end(&self) -> T {
        self.points[self.points.len() - 1]
    }

    /// Mesh size `max_j δ_j`.
    pub fn max_spacing(&self) -> T {
        self.weights.iter().copied().fold(T::zero(), |acc, d| if d > acc { d } else { acc })
    }

    /// `Σ_j v_j δ_j`.
    pub fn integrate(&self, values: &[T]) -> Result<T> {
        check_len("values", self.len(), values.len())?;
        Ok(self.integrate_unchecked(values))
    }

    pub(crate) fn integrate_unchecked(&self, values: &[T]) -> T {
        values.iter().zip(&self.weights).fold(T::zero(), |acc, (v, d)| acc + *v * *d)
    }

    pub fn same_as(&self, other: &Self) -> bool {
        std::ptr::eq(self, other) || self.points == other.points
    }
}

/// Values of a function at the weighted nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCurve<T> {
    grid: Arc<SamplingGrid<T>>,
    values: Vec<T>,
}

impl<T: Scalar> GridCurve<T> {
    pub fn new(grid: Arc<SamplingGrid<T>>, values: Vec<T>) -> Result<Self> {
        check_len("curve values", grid.len(), values.len())?;
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "curve values", index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<SamplingGrid<T>>) -> Self {
        let values = vec![T::zero(); grid.len()];
        Self { grid, values }
    }

    pub fn constant(grid: Arc<SamplingGrid<T>>, c: T) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    /// Samples `f` at every weighted node. Non-finite samples are rejected.
    pub fn from_fn(grid: Arc<SamplingGrid<T>>, f: impl Fn(T) -> T) -> Result<Self> {
        let values = grid.nodes().iter().map(|&s| f(s)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<SamplingGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `a·self + b·other` on the shared grid.
    pub fn axpby(&self, a: T, other: &Self, b: T) -> Result<Self> {
        ensure_same_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * *x + b * *y).collect();
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values,
        })
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| *v * c).collect(),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { what, expected, found })
    }
}

pub(crate) fn ensure_same_grid<T: Scalar>(a: &Arc<SamplingGrid<T>>, b: &Arc<SamplingGrid<T>>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a.same_as(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch("curves live on different grids"))
    }
}

/// `⟨f, g⟩ = Σ_j f(s_j) g(s_j) δ_j`.
pub fn riemann_inner_product<T: Scalar>(f: &GridCurve<T>, g: &GridCurve<T>) -> Result<T> {
    ensure_same_grid(&f.grid, &g.grid)?;
    Ok(weighted_dot(f.grid.weights(), &f.values, &g.values))
}

pub(crate) fn weighted_dot<T: Scalar>(weights: &[T], a: &[T], b: &[T]) -> T {
    weights.iter().zip(a.iter().zip(b)).fold(T::zero(), |acc, (d, (x, y))| acc + *d * *x * *y)
}

pub fn l2_norm<T: Scalar>(f: &GridCurve<T>) -> T {
    weighted_dot(f.grid.weights(), &f.values, &f.values).sqrt()
}

/// Piecewise-linear interpolation of `f` onto the weighted nodes of
/// `targets`. Targets must lie within `[s_1, s_m]` of the source grid;
/// shared abscissae reproduce the source values exactly.
pub fn interpolate_linear<T: Scalar>(f: &GridCurve<T>, targets: &Arc<SamplingGrid<T>>) -> Result<GridCurve<T>> {
    if Arc::ptr_eq(&f.grid, targets) || f.grid.same_as(targets) {
        return Ok(GridCurve {
            grid: Arc::clone(targets),
            values: f.values.clone(),
        });
    }
    let xs = f.grid.nodes();
    let lo = xs[0];
    let hi = xs[xs.len() - 1];
    let slack = (hi - lo).abs().max(T::one()) * T::lit(1e-12);

    let mut values = Vec::with_capacity(targets.len());
    for &t in targets.nodes() {
        if t < lo - slack || t > hi + slack {
            return Err(Error::Extrapolation {
                target: t.to_f64_lossy(),
                lo: lo.to_f64_lossy(),
                hi: hi.to_f64_lossy(),
            });
        }
        // First node with x >= t.
        let k = xs.partition_point(|x| *x < t);
        let v = if k == 0 {
            f.values[0]
        } else if k == xs.len() {
            f.values[xs.len() - 1]
        } else if xs[k] == t {
            f.values[k]
        } else {
            let (x0, x1) = (xs[k - 1], xs[k]);
            let (v0, v1) = (f.values[k - 1], f.values[k]);
            v0 + (t - x0) / (x1 - x0) * (v1 - v0)
        };
        values.push(v);
    }
    Ok(GridCurve {
        grid: Arc::clone(targets),
        values,
    })
}
