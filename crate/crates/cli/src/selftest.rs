//! Fast sanity checks against closed forms.

use bernstein_lab::bernstein::bernstein_ratio;
use bernstein_lab::calculus::{heat_operator_real, Combination};
use bernstein_lab::models::{
    circle_model, eigensystem, harmonic_oscillator_model, oscillator_grid,
};
use bernstein_lab::numerics::opnorm_p_to_q;
use bernstein_lab::Result;

use crate::experiments::mehler_series_error;

struct Probe {
    name: &'static str,
    run: fn() -> Result<(f64, f64)>,
}

fn sine_at_infinity() -> Result<(f64, f64)> {
    let (n, deg) = (512, 6);
    let m = circle_model(n)?;
    let e = eigensystem(&m)?;
    let mut alpha = vec![0.0; 2 * deg + 1];
    alpha[2 * deg] = 1.0;
    let r = bernstein_ratio(&m, &e, &alpha, 2 * deg, f64::INFINITY, Combination::Sum)?;
    let nh = deg as f64 * 2.0 * std::f64::consts::PI / n as f64;
    Ok(((r - 1.0).abs(), nh * nh))
}

fn top_mode_square_sum() -> Result<(f64, f64)> {
    let m = harmonic_oscillator_model(16, oscillator_grid(16)?)?;
    let e = eigensystem(&m)?;
    let mut alpha = vec![0.0; 9];
    alpha[8] = 1.0;
    let r = bernstein_ratio(&m, &e, &alpha, 8, 2.0, Combination::Stacked)?;
    Ok(((r - 1.0).abs(), 1e-12))
}

fn heat_preserves_mass() -> Result<(f64, f64)> {
    let e = eigensystem(&circle_model(64)?)?;
    let heat = heat_operator_real(&e, 0.1)?;
    let b = opnorm_p_to_q(&heat, e.weights(), 1.0, 1.0)?;
    Ok(((b.value() - 1.0).abs(), 1e-12))
}

fn mehler_agreement() -> Result<(f64, f64)> {
    Ok((mehler_series_error(0.5)?, 1e-8))
}

const PROBES: [Probe; 4] = [
    Probe {
        name: "sine attains the classical constant at p = inf",
        run: sine_at_infinity,
    },
    Probe {
        name: "top oscillator mode saturates the square-sum form",
        run: top_mode_square_sum,
    },
    Probe {
        name: "circle heat semigroup has 1 -> 1 norm 1",
        run: heat_preserves_mass,
    },
    Probe {
        name: "Hermite series matches the Mehler kernel",
        run: mehler_agreement,
    },
];

/// Prints one line per probe; returns whether all passed.
pub fn run() -> bool {
    let mut ok = true;
    for p in &PROBES {
        let line = match (p.run)() {
            Ok((err, tol)) if err <= tol => format!("PASS {}: {err:e} <= {tol:e}", p.name),
            Ok((err, tol)) => {
                ok = false;
                format!("FAIL {}: {err:e} > {tol:e}", p.name)
            }
            Err(e) => {
                ok = false;
                format!("FAIL {}: {e}", p.name)
            }
        };
        println!("{line}");
    }
    ok
}
