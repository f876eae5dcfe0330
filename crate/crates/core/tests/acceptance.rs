//! Acceptance criteria 1-11, one PASS/FAIL line each.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use bernstein_lab::bernstein::{
    bernstein_ratio, diverges, lp_lq_sweep, max_bernstein_ratio, max_reverse_ratio,
    psi_equivalence_audit, semiclassical_reverse_scan, OptimizerConfig, ScanDirection,
    SpectralBand,
};
use bernstein_lab::calculus::{
    holomorphic_norm_scan, multiplier_uniformity, multiplier_via_fourier_heat, spectral_multiplier,
    Combination, FourierQuadrature, MultiplierSpec,
};
use bernstein_lab::kernels::{
    fit_on_diagonal, gaussian_fit_sweep, gaussian_mass_check, grigoryan_integral,
    heat_kernel_table, mehler_1d, mehler_series, mehler_table, on_diagonal_fit,
    regularity_closed_form, regularity_scan,
};
use bernstein_lab::models::{
    circle_model, dirichlet_interval_model, divergence_form_model, eigensystem,
    harmonic_oscillator_model, oscillator_grid, Interval, ModelOperator,
};
use bernstein_lab::numerics::{
    assemble_real, opnorm_p_to_q, spectral_values, weighted_norm, EigenSystem, KernelPolicy,
};
use bernstein_lab::sweep::{dyadic, relative_change};
use bernstein_lab::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn circle(n: usize) -> Result<(ModelOperator, EigenSystem)> {
    let m = circle_model(n)?;
    let e = eigensystem(&m)?;
    Ok((m, e))
}

fn dirichlet_x2(n: usize) -> Result<(ModelOperator, EigenSystem)> {
    let m = dirichlet_interval_model(n, Interval::symmetric(4.0)?, |x| x * x)?;
    let e = eigensystem(&m)?;
    Ok((m, e))
}

fn oscillator(k: usize) -> Result<(ModelOperator, EigenSystem)> {
    let m = harmonic_oscillator_model(k, oscillator_grid(k)?)?;
    let e = eigensystem(&m)?;
    Ok((m, e))
}

fn bump() -> Result<MultiplierSpec> {
    MultiplierSpec::bump(2.0, 1.5)
}

fn criterion_1() -> Result<Verdict> {
    let start = Instant::now();
    let (m, e) = circle(2048)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for deg in [4, 8, 16] {
        let r = max_bernstein_ratio(
            &m,
            &e,
            2 * deg,
            f64::INFINITY,
            Combination::Sum,
            &OptimizerConfig::default(),
        )?;
        let a = &r.alpha;
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cos_sim = (a[2 * deg - 1].powi(2) + a[2 * deg].powi(2)).sqrt() / norm;
        ok &= (0.99..=1.02).contains(&r.ratio.lower) && cos_sim >= 0.99;
        parts.push(format!("N={deg}: {:.6} cos={cos_sim:.6}", r.ratio.lower));
    }
    let el = start.elapsed();
    verdict(
        ok && within(el, 60),
        format!("{} ({:.1?})", parts.join(", "), el),
    )
}

fn criterion_2() -> Result<Verdict> {
    let start = Instant::now();
    let interval = Interval::symmetric(2.0)?;
    let models = vec![
        circle_model(256)?,
        dirichlet_interval_model(256, interval, |x| x * x)?,
        divergence_form_model(256, interval, |x| 1.0 + 0.25 * x * x)?,
        harmonic_oscillator_model(32, oscillator_grid(32)?)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_identity: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_eigen: f64 = 0.0;
    for m in &models {
        let e = eigensystem(m)?;
        let n_index = 20.min(e.n_modes() - 1);
        let band = SpectralBand::head(n_index, &e)?;
        let phi = e.band_vectors(0, n_index);
        let lambda_n = e.lambda(n_index);
        let w = e.weights();
        let sw = m.sqrt_potential();
        for _ in 0..1000 {
            let alpha: Vec<f64> = (0..band.len())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let u = &phi * nalgebra::DVector::from_column_slice(&alpha);
            let sqrt_l: Vec<f64> = alpha
                .iter()
                .enumerate()
                .map(|(k, a)| a * e.lambda(k))
                .collect();
            let sqrt_lu = &phi * nalgebra::DVector::from_vec(sqrt_l);
            let du = m.gradient().apply(u.as_slice());
            let wu: Vec<f64> = u.iter().zip(&sw).map(|(a, b)| a * b).collect();
            let left = (weighted_norm(&du, m.edge_weights(), 2.0).powi(2)
                + weighted_norm(&wu, w, 2.0).powi(2))
            .sqrt();
            let right = weighted_norm(sqrt_lu.as_slice(), w, 2.0);
            worst_identity = worst_identity.max(relative_change(left, right));
            worst_ratio = worst_ratio.max(left / (lambda_n * weighted_norm(u.as_slice(), w, 2.0)));
        }
        let mut top = vec![0.0; band.len()];
        top[n_index] = 1.0;
        let at_top = bernstein_ratio(m, &e, &top, n_index, 2.0, Combination::Stacked)?;
        worst_eigen = worst_eigen.max((at_top - 1.0).abs());
    }
    let el = start.elapsed();
    let ok = worst_identity <= 1e-12 && worst_ratio <= 1.0 + 1e-12 && worst_eigen <= 1e-12;
    verdict(
        ok && within(el, 10),
        format!(
            "identity {worst_identity:.2e}, max ratio {worst_ratio:.15}, |ratio(e_N)-1| {worst_eigen:.2e} ({el:.1?})"
        ),
    )
}

fn criterion_3() -> Result<Verdict> {
    let start = Instant::now();
    let xs: Vec<f64> = (0..61).map(|i| -3.0 + 0.1 * i as f64).collect();
    let mut worst: f64 = 0.0;
    for t in [0.25, 0.5, 1.0] {
        for &x in &xs {
            for &y in &xs {
                let sum = mehler_series(t, x, y, 201)?;
                let exact = mehler_1d(t, x, y)?;
                worst = worst.max((exact - sum).abs() / exact);
            }
        }
    }
    let el = start.elapsed();
    verdict(
        worst <= 1e-8 && within(el, 30),
        format!("max relative error {worst:.2e} ({el:.1?})"),
    )
}

fn criterion_4() -> Result<Verdict> {
    let start = Instant::now();
    let (_, e) = circle(128)?;
    let spec = bump()?;
    let w = e.weights().to_vec();
    let gap = |dxi: f64| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for h in dyadic(-8, 2) {
            let spectral = spectral_multiplier(&e, &spec, h)?;
            let quad = FourierQuadrature { xi_max: 200.0, dxi };
            let fourier = multiplier_via_fourier_heat(&e, &spec, h, quad)?.matrix;
            worst = worst.max(opnorm_p_to_q(&(spectral - fourier), &w, 2.0, 2.0)?.upper);
        }
        Ok(worst)
    };
    let coarse = gap(0.05)?;
    let fine = gap(0.025)?;
    let shrink = coarse / fine;
    let el = start.elapsed();
    verdict(
        coarse <= 1e-6 && shrink >= 4.0 && within(el, 60),
        format!(
            "gap {coarse:.3e} at dxi=0.05, {fine:.3e} at dxi=0.025, shrink {shrink:.3} ({el:.1?})"
        ),
    )
}

fn criterion_5() -> Result<Verdict> {
    let start = Instant::now();
    let ts = dyadic(-10, 3);
    let mut ok = true;
    let mut parts = Vec::new();
    let coarse = dirichlet_x2(512)?;
    let fine = dirichlet_x2(1024)?;
    for p in [1.0, 2.0, f64::INFINITY] {
        let how = if p == 2.0 {
            Combination::Stacked
        } else {
            Combination::Sum
        };
        let a = regularity_scan(&coarse.0, &coarse.1, p, &ts, how)?;
        let b = regularity_scan(&fine.0, &fine.1, p, &ts, how)?;
        let change = relative_change(a.sup, b.sup);
        ok &= a.is_finite() && b.is_finite() && change < 0.2;
        parts.push(format!(
            "p={p}: sup {:.4} -> {:.4} ({:.1}%)",
            a.sup,
            b.sup,
            100.0 * change
        ));
        if p == 2.0 {
            let mut dev: f64 = 0.0;
            for (scan, sys) in [(&a, &coarse.1), (&b, &fine.1)] {
                for row in &scan.rows {
                    let closed = regularity_closed_form(sys, row.param).upper;
                    dev = dev.max((row.bounds.upper - closed).abs());
                    ok &= closed <= (2.0 * std::f64::consts::E).powf(-0.5);
                }
            }
            ok &= dev <= 1e-10;
            parts.push(format!("closed-form deviation {dev:.2e}"));
        }
    }
    let el = start.elapsed();
    verdict(ok, format!("{} ({el:.1?})", parts.join(", ")))
}

fn criterion_6() -> Result<Verdict> {
    let start = Instant::now();
    let (m, e) = circle(2048)?;
    let cfg = OptimizerConfig {
        complex: true,
        ..OptimizerConfig::default()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for q in [1.0, 2.0, f64::INFINITY] {
        let mut values = Vec::new();
        for deg in [4, 8, 16] {
            let band = SpectralBand::circle_tail(deg, 4 * deg, &e)?;
            let r = max_reverse_ratio(&m, &e, band, q, Combination::Sum, &cfg)?;
            values.push(r.ratio.lower);
        }
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        ok &= values.iter().all(|v| v.is_finite() && *v > 0.0) && hi / lo < 2.0;
        if q == 2.0 {
            ok &= values.iter().all(|v| (v - 1.0).abs() <= 1e-10);
        }
        parts.push(format!("q={q}: {values:.4?}"));
    }
    let el = start.elapsed();
    verdict(ok, format!("{} ({el:.1?})", parts.join(", ")))
}

fn criterion_7() -> Result<Verdict> {
    let start = Instant::now();
    let spec = bump()?;
    let hs = dyadic(-12, 6);
    let (_, e512) = circle(512)?;
    let (_, e1024) = circle(1024)?;
    let a = multiplier_uniformity(&e512, &spec, 1.0, &hs)?;
    let b = multiplier_uniformity(&e1024, &spec, 1.0, &hs)?;
    let change = relative_change(a.sup, b.sup);
    let two = multiplier_uniformity(&e512, &spec, 2.0, &hs)?;
    let w = e512.weights().to_vec();
    let mut dev: f64 = 0.0;
    for row in &two.rows {
        let values = spectral_values(&e512, |x| spec.psi(row.param * x), KernelPolicy::Strict)?;
        let gram = opnorm_p_to_q(&assemble_real(&e512, &values), &w, 2.0, 2.0)?.upper;
        dev = dev.max((row.bounds.upper - gram).abs());
    }
    let el = start.elapsed();
    verdict(
        change < 0.2 && dev <= 1e-12,
        format!(
            "sup 1->1 {:.4} (n=512) vs {:.4} (n=1024), change {:.2}%, 2->2 deviation {dev:.2e} ({el:.1?})",
            a.sup,
            b.sup,
            100.0 * change
        ),
    )
}

fn criterion_8() -> Result<Verdict> {
    let start = Instant::now();
    let ts = dyadic(-8, 3);
    let theta = PI / 4.0;
    let (_, e512) = circle(512)?;
    let (_, e1024) = circle(1024)?;
    let a = holomorphic_norm_scan(&e512, theta, 1.0, &ts)?;
    let b = holomorphic_norm_scan(&e1024, theta, 1.0, &ts)?;
    let change = relative_change(a.fitted_c, b.fitted_c);
    let mut two_ok = true;
    for sys in [&e512, &e1024] {
        let s = holomorphic_norm_scan(sys, theta, 2.0, &ts)?;
        two_ok &= s.table.rows.iter().all(|r| r.bounds.upper <= 1.0);
    }
    let el = start.elapsed();
    verdict(
        change < 0.1 && two_ok,
        format!(
            "C {:.4} (n=512) vs {:.4} (n=1024), change {:.2}%, 2->2 <= 1: {two_ok} ({el:.1?})",
            a.fitted_c,
            b.fitted_c,
            100.0 * change
        ),
    )
}

fn criterion_9() -> Result<Verdict> {
    let start = Instant::now();
    let (m, e) = circle(1024)?;
    let indices: Vec<usize> = [4, 8, 16, 32, 64].iter().map(|d| 2 * d).collect();
    let cfg = OptimizerConfig::default();
    let one_two = lp_lq_sweep(&m, &e, &indices, 1.0, 2.0, 1.0, &cfg)?;
    let one_inf = lp_lq_sweep(&m, &e, &indices, 1.0, f64::INFINITY, 1.0, &cfg)?;
    let el = start.elapsed();
    let ok = (one_two.slope - 1.5).abs() <= 0.1
        && (one_inf.slope - 2.0).abs() <= 0.15
        && within(el, 300);
    verdict(
        ok,
        format!(
            "slope (1,2) {:.4}, slope (1,inf) {:.4} ({el:.1?})",
            one_two.slope, one_inf.slope
        ),
    )
}

fn criterion_10() -> Result<Verdict> {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();

    let (cm, ce) = circle(256)?;
    let grid = cm.grid().clone();
    let k1 = heat_kernel_table(&ce, &grid, 0.05)?;
    let k2 = heat_kernel_table(&ce, &grid, 0.08)?;
    let k12 = heat_kernel_table(&ce, &grid, 0.13)?;
    let ck = (k1.compose(&k2).values - &k12.values).amax() / k12.values.amax();
    ok &= ck <= 1e-9;
    parts.push(format!("CK {ck:.2e}"));

    let ts = dyadic(-7, 0);
    let circle_tables = ts
        .iter()
        .map(|&t| heat_kernel_table(&ce, &grid, t))
        .collect::<Result<Vec<_>>>()?;
    let g_circle = gaussian_fit_sweep(&circle_tables, cm.geometry(), 0.125)?;
    let (om, _) = oscillator(64)?;
    let osc_tables = ts
        .iter()
        .map(|&t| mehler_table(om.grid(), t))
        .collect::<Result<Vec<_>>>()?;
    let g_osc = gaussian_fit_sweep(&osc_tables, om.geometry(), 0.125)?;
    ok &= g_circle.uniform && g_osc.uniform;
    parts.push(format!(
        "G spread circle {:.3} oscillator {:.3}",
        g_circle.spread, g_osc.spread
    ));

    let grig: Vec<f64> = ts
        .iter()
        .map(|&t| grigoryan_integral(&cm, &ce, t, 1.0 / 16.0, 0).map(|g| g.ratio))
        .collect::<Result<_>>()?;
    let grig_spread = grig.iter().copied().fold(0.0, f64::max)
        / grig.iter().copied().fold(f64::INFINITY, f64::min);
    ok &= grig_spread <= 2.0;
    parts.push(format!("grigoryan spread {grig_spread:.3}"));

    let (cm2, _) = circle(512)?;
    let hs = dyadic(-7, 0);
    let mass = |m: &ModelOperator| -> Result<f64> {
        hs.iter()
            .map(|&h| gaussian_mass_check(m.geometry(), m.grid(), h, 0.125))
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
    };
    let (m1, m2) = (mass(&cm)?, mass(&cm2)?);
    let mass_change = relative_change(m1, m2);
    ok &= mass_change < 0.2;
    parts.push(format!("mass {m1:.4} vs {m2:.4}"));

    let (_, ce_big) = circle(1024)?;
    let diag_ts = dyadic(-10, -3);
    let circle_fit = on_diagonal_fit(&ce_big, &diag_ts)?;
    let osc_diag: Vec<f64> = diag_ts
        .iter()
        .map(|&t| mehler_1d(t, 0.0, 0.0))
        .collect::<Result<_>>()?;
    let osc_fit = fit_on_diagonal(&diag_ts, &osc_diag)?;
    ok &= (circle_fit.m - 1.0).abs() <= 0.05 && (osc_fit.m - 1.0).abs() <= 0.05;
    parts.push(format!(
        "m circle {:.4} oscillator {:.4}",
        circle_fit.m, osc_fit.m
    ));

    let el = start.elapsed();
    verdict(ok, format!("{} ({el:.1?})", parts.join(", ")))
}

fn criterion_11() -> Result<Verdict> {
    let start = Instant::now();
    let (m, e) = circle(512)?;
    let forward = psi_equivalence_audit(
        &m,
        &e,
        &MultiplierSpec::smooth_cutoff()?,
        &MultiplierSpec::bump(1.5, 0.5)?,
        1.0,
        &dyadic(-14, 4),
        ScanDirection::Forward,
    )?;
    let hs = dyadic(-14, 4);
    let reverse = psi_equivalence_audit(
        &m,
        &e,
        &MultiplierSpec::tail_step(0.5, 1.0)?,
        &MultiplierSpec::power_decay(1.0)?,
        2.0,
        &hs,
        ScanDirection::Reverse,
    )?;
    let tail_inf = semiclassical_reverse_scan(
        &m,
        &e,
        &MultiplierSpec::tail_step(0.5, 1.0)?,
        f64::INFINITY,
        &hs,
        0,
    )?;
    let ok = forward.both_finite
        && reverse.both_finite
        && !forward.diverging.iter().any(|&d| d)
        && !reverse.diverging.iter().any(|&d| d)
        && tail_inf.table.is_finite()
        && !diverges(&tail_inf.table);
    let el = start.elapsed();
    verdict(
        ok,
        format!(
            "forward ratio {:.4} (sups {:.4}, {:.4}), reverse ratio {:.4} (sups {:.4}, {:.4}), tail q=inf sup {:.4} ({el:.1?})",
            forward.ratio, forward.first.sup, forward.second.sup, reverse.ratio, reverse.first.sup, reverse.second.sup,
            tail_inf.table.sup
        ),
    )
}

fn main() {
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let criteria: [(usize, &str, fn() -> Result<Verdict>); 11] = [
        (1, "circle Bernstein constant", criterion_1),
        (2, "discrete form identity", criterion_2),
        (3, "Mehler oracle", criterion_3),
        (4, "route equivalence", criterion_4),
        (5, "heat regularity", criterion_5),
        (6, "reverse Bernstein on the circle", criterion_6),
        (7, "multiplier uniformity", criterion_7),
        (8, "holomorphic bound", criterion_8),
        (9, "Lp-Lq exponent", criterion_9),
        (10, "kernel audits", criterion_10),
        (11, "profile independence", criterion_11),
    ];
    let mut failures = 0;
    for (id, name, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        match run() {
            Ok(v) => {
                let tag = if v.pass { "PASS" } else { "FAIL" };
                if !v.pass {
                    failures += 1;
                }
                println!("{tag} criterion {id:>2} ({name}): {}", v.detail);
            }
            Err(err) => {
                failures += 1;
                println!("FAIL criterion {id:>2} ({name}): error: {err}");
            }
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
