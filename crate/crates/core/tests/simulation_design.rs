mod common;

use causal_isotonic::estimator::fit_causal_isotonic;
use causal_isotonic::inference::{fit_variance_model, kappa_dr, kappa_plugin};
use causal_isotonic::nuisance::{ExposureScale, OutcomeFeatures, OutcomeSpec, UnitRatio};
use causal_isotonic::simulation::{Arm, DgpConfig};
use common::{brute_force_isotonic, reference_pava};

#[test]
fn reference_oracles_agree() {
    let y = [3.0, 1.0, 2.0, 0.0, 5.0];
    let a = reference_pava(&y, &[1.0; 5]);
    let b = brute_force_isotonic(&y);
    assert_eq!(b, vec![1.5, 1.5, 1.5, 1.5, 5.0]);
    for (u, v) in a.iter().zip(&b) {
        assert!((u - v).abs() < 1e-14);
    }
}

#[test]
fn rank_variable_is_marginally_uniform() {
    let dgp = DgpConfig::default();
    let n = 100_000;
    let data = dgp.generate(n, 5).unwrap();
    let mut u: Vec<f64> = data.a().iter().map(|&a| dgp.mixture_cdf(a)).collect();
    for (i, &ui) in u.iter().enumerate() {
        assert!(dgp.rank_density(ui.min(1.0), data.w(i)) >= 0.1);
    }
    u.sort_by(f64::total_cmp);
    let ks = u
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / n as f64 - v).max(v - i as f64 / n as f64))
        .fold(0.0, f64::max);
    assert!(ks < 1.63 / (n as f64).sqrt(), "KS = {ks}");
}

#[test]
fn exposure_mean_matches_symmetric_mixture() {
    let dgp = DgpConfig::default();
    let n = 100_000;
    let data = dgp.generate(n, 6).unwrap();
    let mean = data.a().iter().sum::<f64>() / n as f64;
    // mixture of N(-2, 1) and N(2, 1) has variance 5
    assert!(mean.abs() < 4.0 * 5f64.sqrt() / (n as f64).sqrt(), "mean = {mean}");
}

#[test]
fn true_curve_at_zero_collapses_to_one_dimension() {
    let dgp = DgpConfig::default();
    // E expit(-1 + 2Z) by Simpson on [-12, 12]
    let m = 20_000;
    let h = 24.0 / m as f64;
    let f = |z: f64| common::expit(-1.0 + 2.0 * z) * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(-12.0) + f(12.0);
    for k in 1..m {
        s += f(-12.0 + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let oracle = s * h / 3.0;
    assert!((dgp.true_theta(0.0) - oracle).abs() < 1e-8);
    assert!((oracle - 0.3523).abs() < 1e-3);
}

#[test]
fn true_curve_quadrature_agrees_with_monte_carlo() {
    let dgp = DgpConfig::default();
    for a in [-2.0, 0.0, 1.5] {
        let q = dgp.true_theta(a);
        let mc = dgp.true_theta_mc(a, 10_000_000, 9);
        assert!((q - mc).abs() < 1e-3, "a={a}: {q} vs {mc}");
    }
}

#[test]
fn true_curve_lies_in_unit_interval() {
    let dgp = DgpConfig::default();
    for k in 0..=600 {
        let t = dgp.true_theta(-3.0 + k as f64 * 0.01);
        assert!(t > 0.0 && t < 1.0);
    }
}

// Fails under the default coefficients: the outcome index has a positive
// a^2 term, so the curve dips before rising. See the README.
#[test]
fn true_curve_is_monotone_on_grid() {
    let dgp = DgpConfig::default();
    let grid: Vec<f64> = (0..=600).map(|k| -3.0 + k as f64 * 0.01).collect();
    let theta: Vec<f64> = grid.iter().map(|&a| dgp.true_theta(a)).collect();
    let drops: Vec<(f64, f64)> = grid
        .windows(2)
        .zip(theta.windows(2))
        .filter(|(_, t)| t[1] < t[0])
        .map(|(g, t)| (g[0], t[0] - t[1]))
        .collect();
    assert!(
        drops.is_empty(),
        "{} decreasing steps, first at a = {}",
        drops.len(),
        drops[0].0
    );
}

#[test]
fn plugin_kappa_matches_quadrature() {
    let dgp = DgpConfig::default();
    let data = dgp.generate(5000, 11).unwrap();
    let nu = Arm::BothCorrect.nuisance_spec().fit(&data).unwrap();
    let var = fit_variance_model(&data, &nu.outcome).unwrap();
    let k = kappa_plugin(&data, &nu.outcome, &nu.ratio, &var, 0.0).unwrap();
    let truth = dgp.true_kappa(0.0);
    assert!((k / truth - 1.0).abs() < 0.10, "kappa {k} vs {truth}");
}

fn dr_kappa_with_unit_ratio(a: f64, grid: Option<&[f64]>) -> (f64, f64) {
    let dgp = DgpConfig::default();
    let data = dgp.generate(5000, 12).unwrap();
    let spec = OutcomeSpec::Logistic {
        features: OutcomeFeatures {
            covariates: vec![],
            interactions: false,
            quadratic: true,
        },
        scale: ExposureScale::Raw,
        ridge: 0.0,
    };
    let mu = spec.fit(&data).unwrap();
    let fit = fit_causal_isotonic(&data, &mu, &UnitRatio, None).unwrap();
    (kappa_dr(&fit, a, grid).unwrap().value, dgp.conditional_variance(a))
}

// Fails under the default coefficients for the same reason as the
// monotonicity check: at a = 0 the isotonic fit sits on a pooled block far
// from E[Y | A = 0], and that gap enters eta.
#[test]
fn dr_kappa_tracks_conditional_variance() {
    let (k, truth) = dr_kappa_with_unit_ratio(0.0, None);
    assert!((k / truth - 1.0).abs() < 0.20, "kappa {k} vs {truth}");
}

// The smoother itself, at a fixed bandwidth where the curve increases. The
// data-driven bandwidth is not used here: on the default grid the selection
// criterion is nearly flat and settles on h of a few 1/n.
#[test]
fn dr_kernel_smoother_tracks_conditional_variance_where_curve_increases() {
    let (k, truth) = dr_kappa_with_unit_ratio(1.5, Some(&[0.05]));
    assert!((k / truth - 1.0).abs() < 0.20, "kappa {k} vs {truth}");
}
