use std::sync::Arc;

use mfiv::simulate::{replication_rng, simulate_brownian, simulate_instrument};
use mfiv::{simulate_sample, DgpConfig, SamplingGrid};

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn brownian_increments_scale_with_time() {
    let grid = Arc::new(SamplingGrid::unit(200).unwrap());
    let mut rng = replication_rng(11, 0);
    let n = 100_000;
    let mut inc = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for _ in 0..n {
        let p = simulate_brownian(&grid, &mut rng);
        for (k, j) in [49, 99, 199].into_iter().enumerate() {
            inc[k].push(p.path.values()[j] - p.initial);
        }
    }
    for (k, s) in [0.25, 0.5, 1.0].into_iter().enumerate() {
        let v = variance(&inc[k]);
        assert!((v / s - 1.0).abs() < 0.05, "Var[B({s}) - B(0)] = {v}");
    }
    assert!((variance(&inc[2]) - 1.0).abs() < 0.02);
}

#[test]
fn instrument_is_stationary_ar1() {
    let cfg = DgpConfig {
        sample_size: 100_000,
        ..DgpConfig::default()
    };
    let w = simulate_instrument(&cfg, &mut replication_rng(3, 0));
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    assert!((mean - 5.0 / 3.0).abs() < 0.02, "mean {mean}");
    assert!((variance(&w) * 0.51 - 1.0).abs() < 0.05, "variance {}", variance(&w));
}

#[test]
fn regressor_is_endogenous_and_instrument_is_excluded() {
    let cfg = DgpConfig {
        sample_size: 10_000,
        m_sim: 50,
        seed: 5,
        ..DgpConfig::default()
    };
    let s = simulate_sample(&cfg).unwrap();
    let z_int: Vec<f64> = (0..s.sample_size())
        .map(|t| s.grid.integrate(&s.z.row(t).iter().copied().collect::<Vec<_>>()).unwrap())
        .collect();
    // Var ∫B = Var B(0) + ∫∫ min(s, s') = 1/12 + 1/3; ∫k(·, W) is independent of B and V
    let sigma = cfg.sigma;
    let var_int_b = 1.0 / 12.0 + 1.0 / 3.0;
    let k_int: Vec<f64> = (0..s.sample_size())
        .map(|t| z_int[t] - sigma * s.grid.integrate(&s.brownian.row(t).iter().copied().collect::<Vec<_>>()).unwrap())
        .collect();
    let oracle = 0.5 * sigma * var_int_b / ((0.25 * var_int_b + 0.25) * (sigma * sigma * var_int_b + variance(&k_int))).sqrt();
    let got = corr(&s.u, &z_int);
    assert!(got > 0.05 && (got - oracle).abs() < 0.03, "corr(U, ∫Z) = {got}, oracle {oracle}");
    assert!(corr(&s.w, &z_int) > 0.5, "instrument relevance {}", corr(&s.w, &z_int));
    assert!(corr(&s.w, &s.u).abs() < 0.05);
}
