//! Empirical moment curve `r̂`, kernel `k̂` and the discretized operator.
//!
//! With observations `(Y_t, Z_t(s_j), W_t)`:
//!
//! ```text
//! r̂(u_i)      = (1/T) Σ_t Y_t Ψ(u_i, W_t)
//! k̂(s_j, u_i) = (1/T) Σ_t Z_t(s_j) Ψ(u_i, W_t)
//! (K̂φ)(u_i)   = Σ_j k̂(s_j, u_i) φ(s_j) δ_j^s
//! (K̂*ψ)(s_j)  = Σ_i k̂(s_j, u_i) ψ(u_i) δ_i^u
//! ```

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{check_len, ensure_same_grid, GridCurve, SamplingGrid};
use crate::instrument::{build_psi_matrix, InstrumentSpec, PsiMatrix};
use crate::scalar::Scalar;

/// `r̂` on the u-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCurve<T: Scalar>(GridCurve<T>);

impl<T: Scalar> MomentCurve<T> {
    pub fn new(curve: GridCurve<T>) -> Self {
        Self(curve)
    }

    pub fn curve(&self) -> &GridCurve<T> {
        &self.0
    }

    pub fn values(&self) -> &[T] {
        self.0.values()
    }

    pub fn grid(&self) -> &Arc<SamplingGrid<T>> {
        self.0.grid()
    }
}

/// Dense kernel matrix with `kernel[(i, j)] = k̂(s_j, u_i)`.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator<T: Scalar> {
    kernel: DMatrix<T>,
    s_grid: Arc<SamplingGrid<T>>,
    u_grid: Arc<SamplingGrid<T>>,
}

impl<T: Scalar> DiscretizedOperator<T> {
    /// Wraps an explicit kernel; rows follow `u_grid`, columns `s_grid`.
    pub fn from_kernel(kernel: DMatrix<T>, s_grid: Arc<SamplingGrid<T>>, u_grid: Arc<SamplingGrid<T>>) -> Result<Self> {
        check_len("kernel rows (u-grid)", u_grid.len(), kernel.nrows())?;
        check_len("kernel columns (s-grid)", s_grid.len(), kernel.ncols())?;
        if let Some(index) = kernel.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "kernel", index });
        }
        Ok(Self { kernel, s_grid, u_grid })
    }

    pub fn kernel(&self) -> &DMatrix<T> {
        &self.kernel
    }

    pub fn s_grid(&self) -> &Arc<SamplingGrid<T>> {
        &self.s_grid
    }

    pub fn u_grid(&self) -> &Arc<SamplingGrid<T>> {
        &self.u_grid
    }

    /// `K̂φ` on the u-grid.
    pub fn apply(&self, phi: &GridCurve<T>) -> Result<GridCurve<T>> {
        ensure_same_grid(phi.grid(), &self.s_grid)?;
        let weighted = weighted_vector(self.s_grid.weights(), phi.values());
        let out = &self.kernel * weighted;
        GridCurve::new(Arc::clone(&self.u_grid), out.data.into())
    }

    /// `K̂*ψ` on the s-grid.
    pub fn apply_adjoint(&self, psi: &GridCurve<T>) -> Result<GridCurve<T>> {
        ensure_same_grid(psi.grid(), &self.u_grid)?;
        let weighted = weighted_vector(self.u_grid.weights(), psi.values());
        let out = self.kernel.tr_mul(&weighted);
        GridCurve::new(Arc::clone(&self.s_grid), out.data.into())
    }

    /// `D_u^{1/2} k D_s^{1/2}`: the matrix of `K̂` between the weighted
    /// coordinate systems in which both grid inner products are Euclidean.
    pub fn weighted_kernel(&self) -> DMatrix<T> {
        let su: Vec<T> = self.u_grid.weights().iter().map(|d| d.sqrt()).collect();
        let ss: Vec<T> = self.s_grid.weights().iter().map(|d| d.sqrt()).collect();
        DMatrix::from_fn(self.kernel.nrows(), self.kernel.ncols(), |i, j| su[i] * self.kernel[(i, j)] * ss[j])
    }

    /// `‖k̂‖ = (Σ_{i,j} k̂(s_j,u_i)² δ_i^u δ_j^s)^{1/2}`, an upper bound on the
    /// operator norm of `K̂`.
    pub fn kernel_norm(&self) -> T {
        self.weighted_kernel().norm()
    }
}

fn weighted_vector<T: Scalar>(weights: &[T], values: &[T]) -> DVector<T> {
    DVector::from_iterator(values.len(), weights.iter().zip(values).map(|(d, v)| *d * *v))
}

pub fn estimate_moment<T: Scalar>(y: &[T], psi: &PsiMatrix<T>) -> Result<MomentCurve<T>> {
    check_len("outcome sample", psi.observations(), y.len())?;
    if let Some(index) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "outcomes", index });
    }
    let n = T::from_usize_lossy(y.len());
    let yv = DVector::from_column_slice(y);
    let r = psi.entries() * yv / n;
    Ok(MomentCurve(GridCurve::new(Arc::clone(psi.u_grid()), r.data.into())?))
}

/// `z` holds one observation per row and one s-grid node per column.
pub fn estimate_kernel<T: Scalar>(z: &DMatrix<T>, s_grid: &Arc<SamplingGrid<T>>, psi: &PsiMatrix<T>) -> Result<DiscretizedOperator<T>> {
    check_len("regressor rows", psi.observations(), z.nrows())?;
    check_len("regressor columns (s-grid)", s_grid.len(), z.ncols())?;
    if let Some(index) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "regressors", index });
    }
    let n = T::from_usize_lossy(z.nrows());
    let kernel = psi.entries() * z / n;
    DiscretizedOperator::from_kernel(kernel, Arc::clone(s_grid), Arc::clone(psi.u_grid()))
}

/// Symmetric matrix of `K̂*K̂` in the `D_s^{1/2}`-scaled coordinates:
/// `A = D_s^{1/2} kᵀ D_u k D_s^{1/2}`.
///
/// On uniform grids over `[0, 1]` with `m` nodes this equals
/// `kᵀk / m² = ZᵀΨᵀΨZ / (T m)²`.
pub fn normal_matrix<T: Scalar>(op: &DiscretizedOperator<T>) -> DMatrix<T> {
    let b = op.weighted_kernel();
    let mut a = b.tr_mul(&b);
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            a[(i, j)] = a[(j, i)];
        }
    }
    a
}

/// The assembled inverse problem `K̂β = r̂`.
#[derive(Debug, Clone)]
pub struct IvProblem<T: Scalar> {
    pub operator: DiscretizedOperator<T>,
    pub moment: MomentCurve<T>,
}

impl<T: Scalar> IvProblem<T> {
    pub fn new(operator: DiscretizedOperator<T>, moment: MomentCurve<T>) -> Result<Self> {
        ensure_same_grid(operator.u_grid(), moment.grid())?;
        Ok(Self { operator, moment })
    }

    /// Estimates `r̂` and `k̂` from a sample. The u-grid defaults to the
    /// s-grid.
    pub fn from_sample(
        y: &[T],
        z: &DMatrix<T>,
        w: &[T],
        s_grid: &Arc<SamplingGrid<T>>,
        spec: &InstrumentSpec,
        u_grid: Option<&Arc<SamplingGrid<T>>>,
    ) -> Result<Self> {
        check_len("instrument sample", y.len(), w.len())?;
        let u_grid = u_grid.unwrap_or(s_grid);
        let psi = build_psi_matrix(spec, u_grid, w)?;
        let moment = estimate_moment(y, &psi)?;
        let operator = estimate_kernel(z, s_grid, &psi)?;
        Ok(Self { operator, moment })
    }

    /// `K̂*r̂` on the s-grid.
    pub fn adjoint_rhs(&self) -> GridCurve<T> {
        self.operator
            .apply_adjoint(self.moment.curve())
            .expect("moment shares the operator's u-grid")
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::grid::{l2_norm, riemann_inner_product};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(m: usize) -> Arc<SamplingGrid<f64>> {
        Arc::new(SamplingGrid::unit(m).unwrap())
    }

    fn random_grid(rng: &mut ChaCha8Rng, m: usize, a: f64) -> Arc<SamplingGrid<f64>> {
        let mut pts = vec![a];
        for _ in 0..m {
            let last = *pts.last().unwrap();
            pts.push(last + rng.random_range(0.05..1.0));
        }
        Arc::new(SamplingGrid::new(pts).unwrap())
    }

    fn random_operator(rng: &mut ChaCha8Rng, ms: usize, mu: usize) -> DiscretizedOperator<f64> {
        let s = random_grid(rng, ms, 0.0);
        let u = random_grid(rng, mu, -1.0);
        let k = DMatrix::from_fn(mu, ms, |_, _| rng.random_range(-2.0..2.0));
        DiscretizedOperator::from_kernel(k, s, u).unwrap()
    }

    fn random_curve(rng: &mut ChaCha8Rng, g: &Arc<SamplingGrid<f64>>) -> GridCurve<f64> {
        let v = (0..g.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
        GridCurve::new(g.clone(), v).unwrap()
    }

    #[test]
    fn moment_examples() {
        let g = unit(4);
        let psi = PsiMatrix::from_entries(DMatrix::from_element(4, 3, 0.3), g.clone()).unwrap();
        let r = estimate_moment(&[0.0, 0.0, 0.0], &psi).unwrap();
        assert!(r.values().iter().all(|&v| v == 0.0));

        let psi1 = PsiMatrix::from_entries(DMatrix::from_element(4, 1, 0.5), g.clone()).unwrap();
        let r1 = estimate_moment(&[2.0], &psi1).unwrap();
        assert!(r1.values().iter().all(|&v| v == 1.0));

        let g2 = unit(2);
        let p = DMatrix::from_row_slice(2, 3, &[0.1, 0.2, 0.3, 0.9, 0.8, 0.7]);
        let psi3 = PsiMatrix::from_entries(p, g2).unwrap();
        let r3 = estimate_moment(&[1.0, -2.0, 4.0], &psi3).unwrap();
        // (0.1 - 0.4 + 1.2) / 3 and (0.9 - 1.6 + 2.8) / 3
        assert_relative_eq!(r3.values()[0], 0.3, max_relative = 1e-14);
        assert_relative_eq!(r3.values()[1], 0.7, max_relative = 1e-14);

        assert!(matches!(estimate_moment(&[1.0, 2.0], &psi3), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn kernel_examples() {
        let g = unit(2);
        let psi = PsiMatrix::from_entries(DMatrix::from_row_slice(2, 1, &[0.25, 0.75]), g.clone()).unwrap();
        let zero = estimate_kernel(&DMatrix::zeros(1, 2), &g, &psi).unwrap();
        assert!(zero.kernel().iter().all(|&v| v == 0.0));

        // T = 1: outer product of the psi column and the Z row.
        let z = DMatrix::from_row_slice(1, 2, &[2.0, -4.0]);
        let k = estimate_kernel(&z, &g, &psi).unwrap();
        assert_eq!(k.kernel(), &DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 1.5, -3.0]));

        // T = 2, brute-force double sum.
        let p = [[0.2, 0.6], [0.4, 0.9]]; // p[i][t]
        let zz = [[1.0, 3.0], [-2.0, 5.0]]; // zz[t][j]
        let psi2 = PsiMatrix::from_entries(DMatrix::from_fn(2, 2, |i, t| p[i][t]), g.clone()).unwrap();
        let k2 = estimate_kernel(&DMatrix::from_fn(2, 2, |t, j| zz[t][j]), &g, &psi2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for t in 0..2 {
                    acc += zz[t][j] * p[i][t];
                }
                assert_relative_eq!(k2.kernel()[(i, j)], acc / 2.0, max_relative = 1e-15);
            }
        }

        let bad = DMatrix::zeros(3, 2);
        assert!(estimate_kernel(&bad, &g, &psi2).is_err());
    }

    #[test]
    fn apply_zero_and_reproducing_kernel() {
        let g = Arc::new(SamplingGrid::new(vec![0.0, 0.2, 0.5, 1.0]).unwrap());
        let d = g.weights().to_vec();
        let k = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 / d[j] } else { 0.0 });
        let op = DiscretizedOperator::from_kernel(k, g.clone(), g.clone()).unwrap();
        let phi = GridCurve::new(g.clone(), vec![1.5, -2.0, 7.0]).unwrap();
        let out = op.apply(&phi).unwrap();
        for (a, b) in out.values().iter().zip(phi.values()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-14);
        }
        assert!(op.apply(&GridCurve::zeros(g.clone())).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(op.apply_adjoint(&GridCurve::zeros(g)).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn apply_matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let op = random_operator(&mut rng, 3, 3);
        let phi = random_curve(&mut rng, op.s_grid());
        let out = op.apply(&phi).unwrap();
        let ds = op.s_grid().weights();
        for i in 0..3 {
            let mut acc = 0.0;
            for j in 0..3 {
                acc += op.kernel()[(i, j)] * phi.values()[j] * ds[j];
            }
            assert_relative_eq!(out.values()[i], acc, max_relative = 1e-13);
        }
    }

    #[test]
    fn rank_one_adjoint() {
        // k(s_j, u_i) = a_i b_j  =>  (K*ψ)(s_j) = b_j ⟨a, ψ⟩_u
        let g = unit(4);
        let a = [1.0, -1.0, 2.0, 0.5];
        let b = [3.0, 0.0, -2.0, 1.0];
        let k = DMatrix::from_fn(4, 4, |i, j| a[i] * b[j]);
        let op = DiscretizedOperator::from_kernel(k, g.clone(), g.clone()).unwrap();
        let psi = GridCurve::new(g.clone(), vec![0.5, 1.0, -1.0, 2.0]).unwrap();
        let a_curve = GridCurve::new(g, a.to_vec()).unwrap();
        let ip = riemann_inner_product(&a_curve, &psi).unwrap();
        let out = op.apply_adjoint(&psi).unwrap();
        for j in 0..4 {
            assert_relative_eq!(out.values()[j], b[j] * ip, epsilon = 1e-14);
        }
    }

    #[test]
    fn normal_matrix_matches_matrix_formula() {
        // m = 2, T = 1, uniform grid on [0, 1].
        let g = unit(2);
        let p = [0.6, 0.8];
        let zr = [1.5, -0.5];
        let psi = PsiMatrix::from_entries(DMatrix::from_row_slice(2, 1, &p), g.clone()).unwrap();
        let op = estimate_kernel(&DMatrix::from_row_slice(1, 2, &zr), &g, &psi).unwrap();
        let a = normal_matrix(&op);
        // ZᵀΨᵀΨZ / (T m)^2 with ΨᵀΨ = 0.36 + 0.64 = 1.
        let expected = [[2.25 / 4.0, -0.75 / 4.0], [-0.75 / 4.0, 0.25 / 4.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(a[(i, j)], expected[i][j], max_relative = 1e-14);
            }
        }
        let zero = DiscretizedOperator::from_kernel(DMatrix::zeros(2, 2), g.clone(), g).unwrap();
        assert!(normal_matrix(&zero).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normal_matrix_symmetric_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let op = random_operator(&mut rng, 12, 9);
            let a = normal_matrix(&op);
            assert_eq!(a, a.transpose());
            let eig = a.clone().symmetric_eigen();
            let floor = -1e-10 * a.trace() / 12.0;
            assert!(eig.eigenvalues.iter().all(|&l| l >= floor));
        }
    }

    #[test]
    fn normal_matrix_represents_composition() {
        // K*K φ = D_s^{-1/2} A D_s^{1/2} φ
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let op = random_operator(&mut rng, 6, 8);
        let phi = random_curve(&mut rng, op.s_grid());
        let direct = op.apply_adjoint(&op.apply(&phi).unwrap()).unwrap();
        let a = normal_matrix(&op);
        let ds = op.s_grid().weights();
        let x = DVector::from_fn(6, |j, _| ds[j].sqrt() * phi.values()[j]);
        let ax = &a * x;
        for j in 0..6 {
            assert_relative_eq!(ax[j] / ds[j].sqrt(), direct.values()[j], max_relative = 1e-12);
        }
    }

    #[test]
    fn problem_from_sample_uses_s_grid_for_u() {
        let g = unit(3);
        let z = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let p = IvProblem::from_sample(&[1.0, 2.0], &z, &[0.5, -0.5], &g, &InstrumentSpec::logistic(), None).unwrap();
        assert!(p.operator.u_grid().same_as(&g));
        assert_eq!(p.adjoint_rhs().len(), 3);
        assert!(IvProblem::from_sample(&[1.0], &z, &[0.5, -0.5], &g, &InstrumentSpec::logistic(), None).is_err());
    }

    proptest! {
        #[test]
        fn adjoint_identity_linearity_and_norm_bound(seed in any::<u64>(), ms in 1usize..9, mu in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let op = random_operator(&mut rng, ms, mu);
            let phi = random_curve(&mut rng, op.s_grid());
            let phi2 = random_curve(&mut rng, op.s_grid());
            let psi = random_curve(&mut rng, op.u_grid());
            let kphi = op.apply(&phi).unwrap();
            let kstar = op.apply_adjoint(&psi).unwrap();
            let lhs = riemann_inner_product(&kphi, &psi).unwrap();
            let rhs = riemann_inner_product(&phi, &kstar).unwrap();
            let scale = op.kernel_norm() * l2_norm(&phi) * l2_norm(&psi);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300));

            prop_assert!(l2_norm(&kphi) <= op.kernel_norm() * l2_norm(&phi) * (1.0 + 1e-12));

            let combo = phi.axpby(2.0, &phi2, -0.5).unwrap();
            let lin = op.apply(&phi).unwrap().axpby(2.0, &op.apply(&phi2).unwrap(), -0.5).unwrap();
            let got = op.apply(&combo).unwrap();
            for (a, b) in got.values().iter().zip(lin.values()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()) * scale.max(1.0));
            }
        }
    }
}
