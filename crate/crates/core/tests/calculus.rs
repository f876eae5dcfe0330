use std::f64::consts::PI;

use bernstein_lab::bernstein::{synthesize, SpectralBand};
use bernstein_lab::calculus::{
    gradient_pair_norm, heat_operator, heat_operator_real, holomorphic_norm_scan,
    multiplier_uniformity, riesz_transform, spectral_multiplier, Combination, ComplexTime,
    MultiplierSpec, RieszKind,
};
use bernstein_lab::models::{circle_model, dirichlet_interval_model, eigensystem, Interval};
use bernstein_lab::numerics::{opnorm, opnorm_p_to_q, weighted_norm, KernelPolicy, OpNormConfig};
use bernstein_lab::sweep::dyadic;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn apply(m: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(u)).as_slice().to_vec()
}

#[test]
fn smooth_cutoff_fixes_the_low_band() {
    let m = circle_model(128).unwrap();
    let e = eigensystem(&m).unwrap();
    let n_index = 12;
    let h = 1.0 / e.lambdas_sq()[n_index];
    let psi = spectral_multiplier(&e, &MultiplierSpec::smooth_cutoff().unwrap(), h).unwrap();
    let alpha: Vec<f64> = (0..=n_index).map(|k| 1.0 / (1.0 + k as f64)).collect();
    let u = synthesize(&e, &alpha, SpectralBand::head(n_index, &e).unwrap())
        .unwrap()
        .values;
    let v = apply(&psi, &u);
    let err = u
        .iter()
        .zip(&v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-12, "{err:e}");
}

#[test]
fn bump_outside_the_spectrum_is_zero() {
    let e = eigensystem(&circle_model(64).unwrap()).unwrap();
    let h = 0.45;
    assert!(e.lambdas_sq().iter().all(|&l| h * l <= 2.0 || h * l >= 4.0));
    let psi = spectral_multiplier(&e, &MultiplierSpec::bump(3.0, 1.0).unwrap(), h).unwrap();
    assert_eq!(psi.amax(), 0.0);
}

#[test]
fn circle_heat_is_a_markov_operator() {
    let e = eigensystem(&circle_model(128).unwrap()).unwrap();
    for t in [0.01, 0.1, 1.0] {
        let heat = heat_operator_real(&e, t).unwrap();
        assert!(heat.min() > -1e-15);
        let b = opnorm_p_to_q(&heat, e.weights(), 1.0, 1.0).unwrap();
        assert!((b.value() - 1.0).abs() < 1e-12, "t={t}: {}", b.value());
    }
}

#[test]
fn complex_time_heat_rotates_fourier_modes() {
    let n = 96;
    let e = eigensystem(&circle_model(n).unwrap()).unwrap();
    let t = 0.05;
    let z = Complex64::new(t, -t);
    let heat = heat_operator(&e, ComplexTime::new(z).unwrap()).unwrap();
    let h = 2.0 * PI / n as f64;
    let mu = 4.0 / (h * h) * (3.0 * h / 2.0).sin().powi(2);
    let factor = (-z * mu).exp();
    let x = e.n_nodes();
    let u: Vec<f64> = (0..x).map(|i| (3.0 * i as f64 * h).cos()).collect();
    let re = apply(&heat.re, &u);
    let im = apply(&heat.im, &u);
    for i in 0..x {
        assert!((re[i] - factor.re * u[i]).abs() < 1e-12);
        assert!((im[i] - factor.im * u[i]).abs() < 1e-12);
    }
}

#[test]
fn riesz_transform_is_an_isometry_at_two() {
    let m = dirichlet_interval_model(80, Interval::new(0.0, 1.0).unwrap(), |_| 0.0).unwrap();
    let e = eigensystem(&m).unwrap();
    let r = riesz_transform(&e, &m, RieszKind::Gradient, KernelPolicy::Strict).unwrap();
    let b = opnorm(
        &r,
        m.grid().weights(),
        m.edge_weights(),
        2.0,
        2.0,
        &OpNormConfig::default(),
    )
    .unwrap();
    assert!((b.value() - 1.0).abs() < 1e-10);

    let m = circle_model(80).unwrap();
    let e = eigensystem(&m).unwrap();
    let r = riesz_transform(&e, &m, RieszKind::Gradient, KernelPolicy::RestrictToRange).unwrap();
    let b = opnorm(
        &r,
        m.grid().weights(),
        m.edge_weights(),
        2.0,
        2.0,
        &OpNormConfig::default(),
    )
    .unwrap();
    assert!((b.value() - 1.0).abs() < 1e-10);
}

#[test]
fn riesz_pair_splits_the_norm() {
    let m = dirichlet_interval_model(80, Interval::symmetric(3.0).unwrap(), |x| x * x).unwrap();
    let e = eigensystem(&m).unwrap();
    let rg = riesz_transform(&e, &m, RieszKind::Gradient, KernelPolicy::Strict).unwrap();
    let rp = riesz_transform(&e, &m, RieszKind::SqrtPotential, KernelPolicy::Strict).unwrap();
    for s in 0..10 {
        let mut u: Vec<f64> = m
            .grid()
            .nodes()
            .iter()
            .map(|x| ((s + 1) as f64 * x).sin() + 0.3 * x)
            .collect();
        m.restrict(&mut u);
        let g = weighted_norm(&apply(&rg, &u), m.edge_weights(), 2.0);
        let p = weighted_norm(&apply(&rp, &u), m.grid().weights(), 2.0);
        let n = weighted_norm(&u, m.grid().weights(), 2.0);
        assert!(((g * g + p * p).sqrt() / n - 1.0).abs() < 1e-10);
    }
}

#[test]
fn gradient_of_band_projection_has_the_discrete_symbol() {
    let n = 128;
    let m = circle_model(n).unwrap();
    let e = eigensystem(&m).unwrap();
    let deg = 10;
    let band = e.band_vectors(0, 2 * deg);
    let mut p = &band * band.transpose();
    for j in 0..n {
        p.column_mut(j).scale_mut(e.weights()[j]);
    }
    let b = gradient_pair_norm(&m, &p, 2.0, Combination::Sum, &OpNormConfig::default()).unwrap();
    let h = 2.0 * PI / n as f64;
    let symbol = 2.0 / h * (deg as f64 * h / 2.0).sin();
    assert!((b.value() - symbol).abs() < 1e-10 * symbol);
}

#[test]
fn real_time_semigroup_contracts() {
    let m = dirichlet_interval_model(60, Interval::symmetric(2.0).unwrap(), |x| x * x).unwrap();
    let e = eigensystem(&m).unwrap();
    let ts = dyadic(-6, 2);
    for q in [1.0, 2.0, f64::INFINITY] {
        let s = holomorphic_norm_scan(&e, 0.0, q, &ts).unwrap();
        assert!(
            s.table.rows.iter().all(|r| r.bounds.upper <= 1.0 + 1e-12),
            "q={q}"
        );
    }
}

#[test]
fn two_norm_along_a_ray_is_the_ground_decay() {
    let m = dirichlet_interval_model(60, Interval::symmetric(2.0).unwrap(), |x| x * x).unwrap();
    let e = eigensystem(&m).unwrap();
    let theta = 1.0;
    let ts = dyadic(-6, 2);
    let s = holomorphic_norm_scan(&e, theta, 2.0, &ts).unwrap();
    for r in &s.table.rows {
        let want = (-e.lambdas_sq()[0] * r.param * theta.cos()).exp();
        assert!((r.bounds.upper - want).abs() < 1e-14);
    }
}

#[test]
fn two_norm_of_multipliers_is_the_spectral_maximum() {
    let e = eigensystem(&circle_model(64).unwrap()).unwrap();
    let spec = MultiplierSpec::bump(2.0, 1.5).unwrap();
    let hs = dyadic(-8, 2);
    let s = multiplier_uniformity(&e, &spec, 2.0, &hs).unwrap();
    let psi = |x: f64| spec.psi(x).abs();
    let want = hs
        .iter()
        .flat_map(|h| e.lambdas_sq().iter().map(move |l| psi(h * l)))
        .fold(0.0, f64::max);
    assert!((s.sup - want).abs() < 1e-12);
    let zero = multiplier_uniformity(&e, &MultiplierSpec::zero(), 2.0, &hs).unwrap();
    assert_eq!(zero.sup, 0.0);
}
