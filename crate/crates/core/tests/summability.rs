//! Mean squared deviation of the sample moment curve against the bound
//! `T⁻¹ Σ_{|h|≤H} ‖γ_h‖₁`.

use mfiv::diagnostics::moment_process;
use mfiv::instrument::InstrumentSpec;
use mfiv::simulate::{replication_rng, simulate_sample_with};
use mfiv::{autocov_diagnostic, build_psi_matrix, DgpConfig};
use nalgebra::{DMatrix, DVector};

#[test]
fn moment_deviation_respects_autocovariance_bound() {
    let cfg = DgpConfig {
        sample_size: 200,
        m_sim: 40,
        ..DgpConfig::default()
    };
    let reps: u64 = 200;
    let t = cfg.sample_size;
    let mut means = Vec::with_capacity(reps as usize);
    let mut bounds = Vec::with_capacity(reps as usize);
    let mut grid = None;
    for r in 0..reps {
        let s = simulate_sample_with(&cfg, &mut replication_rng(99, r)).unwrap();
        let psi = build_psi_matrix(&InstrumentSpec::logistic(), &s.grid, &s.w).unwrap();
        let x: DMatrix<f64> = moment_process(&s.y, &psi).unwrap();
        let summary = autocov_diagnostic(&x, &s.grid, t / 2 - 1).unwrap();
        bounds.push(summary.total() / t as f64);
        means.push(x.row_mean().transpose());
        grid = Some(s.grid);
    }
    let grid = grid.unwrap();
    // population mean approximated by the pooled mean over all replications
    let pooled: DVector<f64> = means.iter().fold(DVector::zeros(grid.len()), |a, m| a + m) / reps as f64;
    let lhs = means
        .iter()
        .map(|m| {
            let d: Vec<f64> = (m - &pooled).iter().map(|v| v * v).collect();
            grid.integrate(&d).unwrap()
        })
        .sum::<f64>()
        / reps as f64;
    let rhs = bounds.iter().sum::<f64>() / reps as f64;
    assert!(lhs <= rhs * 1.25, "E‖mean − EX‖² = {lhs}, bound {rhs}");
}
