//! Functional calculus: spectral multipliers `psi(hL)` by eigen-truncation and
//! by the Fourier–heat integral, complex-time semigroups, Riesz transforms
//! and uniformity scans.

pub mod profile;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

pub use profile::{FourierTable, MultiplierSpec, Profile};

use crate::error::{precondition, LabError, Result};
use crate::models::ModelOperator;
use crate::numerics::{
    assemble_real, matrix_function, matrix_function_real, opnorm, opnorm_complex, spectral_values,
    CMatrix, EigenSystem, KernelPolicy, NormBounds, NormMethod, OpNormConfig,
};
use crate::sweep::{SweepRow, SweepTable};

/// Largest accepted imaginary residue of the Fourier–heat route.
pub const QUADRATURE_RESIDUE_TOLERANCE: f64 = 1e-10;

/// Complex time with nonnegative real part (`z = 0` allowed).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexTime(Complex64);

impl ComplexTime {
    pub fn new(z: Complex64) -> Result<Self> {
        precondition(z.re > 0.0 || z == Complex64::new(0.0, 0.0), || {
            format!("complex time needs Re z > 0 (or z = 0), got {z}")
        })?;
        Ok(Self(z))
    }

    pub fn real(t: f64) -> Result<Self> {
        Self::new(Complex64::new(t, 0.0))
    }

    /// `z = t e^{i theta}`.
    pub fn polar(t: f64, theta: f64) -> Result<Self> {
        Self::new(Complex64::from_polar(t, theta))
    }

    pub fn z(&self) -> Complex64 {
        self.0
    }
}

/// `psi(hL)`.
pub fn spectral_multiplier(e: &EigenSystem, spec: &MultiplierSpec, h: f64) -> Result<DMatrix<f64>> {
    precondition(h > 0.0, || format!("h must be positive, got {h}"))?;
    matrix_function_real(e, |x| spec.psi(h * x), KernelPolicy::Strict)
}

/// `e^{-zL}`.
pub fn heat_operator(e: &EigenSystem, z: ComplexTime) -> Result<CMatrix> {
    let z = z.z();
    matrix_function(e, |x| (-z * x).exp(), KernelPolicy::Strict)
}

/// `e^{-tL}` for real `t >= 0`.
pub fn heat_operator_real(e: &EigenSystem, t: f64) -> Result<DMatrix<f64>> {
    precondition(t >= 0.0, || format!("t must be >= 0, got {t}"))?;
    matrix_function_real(e, |x| (-t * x).exp(), KernelPolicy::Strict)
}

/// Trapezoid parameters for the frequency integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierQuadrature {
    pub xi_max: f64,
    pub dxi: f64,
}

impl Default for FourierQuadrature {
    fn default() -> Self {
        Self {
            xi_max: 200.0,
            dxi: 0.05,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FourierHeatOutcome {
    pub matrix: DMatrix<f64>,
    /// Largest imaginary part of the quadrature over the spectrum.
    pub imag_residue: f64,
    /// `max |\hat{psi_e}(+-xi_max)|`.
    pub tail: f64,
}

/// `psi(hL) = (2 pi)^{-1/2} int \hat{psi_e}(xi) e^{-(2 - i xi) hL} dxi`,
/// truncated to `|xi| <= xi_max` and summed by the trapezoid rule.
pub fn multiplier_via_fourier_heat(
    e: &EigenSystem,
    spec: &MultiplierSpec,
    h: f64,
    quad: FourierQuadrature,
) -> Result<FourierHeatOutcome> {
    precondition(h > 0.0, || format!("h must be positive, got {h}"))?;
    precondition(quad.dxi > 0.0 && quad.xi_max > 0.0, || {
        "quadrature needs dxi, xi_max > 0".into()
    })?;
    let n = e.n_nodes();
    if spec.profile() == &Profile::Zero {
        return Ok(FourierHeatOutcome {
            matrix: DMatrix::zeros(n, n),
            imag_residue: 0.0,
            tail: 0.0,
        });
    }
    let table = spec
        .fourier_table()
        .ok_or_else(|| LabError::Unsupported(format!("{} has no Fourier table", spec.name())))?;
    let ratio = quad.dxi / profile::TABLE_SPACING;
    precondition(
        (ratio - ratio.round()).abs() < 1e-9 && ratio.round() >= 1.0,
        || {
            format!(
                "dxi = {} must be a multiple of the table spacing {}",
                quad.dxi,
                profile::TABLE_SPACING
            )
        },
    )?;
    let steps = (quad.xi_max / quad.dxi).round() as i64;
    precondition(steps as f64 * quad.dxi <= table.xi_max() + 1e-9, || {
        format!(
            "xi_max = {} exceeds the table window {}",
            quad.xi_max,
            table.xi_max()
        )
    })?;
    let nodes: Vec<(f64, Complex64)> = (-steps..=steps)
        .map(|j| {
            let xi = j as f64 * quad.dxi;
            let w = if j.abs() == steps { 0.5 } else { 1.0 };
            table.at(xi).map(|v| (xi, v * w))
        })
        .collect::<Result<_>>()?;
    let scale = quad.dxi / (2.0 * PI).sqrt();
    let symbols: Vec<Complex64> = e
        .lambdas_sq()
        .par_iter()
        .map(|&lam| {
            let s = h * lam.max(0.0);
            let damp = (-2.0 * s).exp();
            let mut acc = Complex64::new(0.0, 0.0);
            for &(xi, v) in &nodes {
                acc += v * Complex64::from_polar(damp, xi * s);
            }
            acc * scale
        })
        .collect();
    let imag_residue = symbols.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let tail = table
        .at(nodes[0].0)?
        .norm()
        .max(table.at(-nodes[0].0)?.norm());
    if imag_residue > QUADRATURE_RESIDUE_TOLERANCE {
        return Err(LabError::Accuracy {
            what: "Fourier–heat imaginary residue".into(),
            measured: imag_residue,
            tolerance: QUADRATURE_RESIDUE_TOLERANCE,
            tail,
        });
    }
    let re: Vec<f64> = symbols.iter().map(|v| v.re).collect();
    Ok(FourierHeatOutcome {
        matrix: assemble_real(e, &re),
        imag_residue,
        tail,
    })
}

/// `(D M, diag(sqrt W) M)`.
pub fn gradient_of_multiplier(
    model: &ModelOperator,
    m: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if m.nrows() != model.n_nodes() {
        return Err(LabError::DimensionMismatch {
            what: "multiplier rows",
            expected: model.n_nodes(),
            found: m.nrows(),
        });
    }
    let grad = model.gradient().compose(m);
    let sw = model.sqrt_potential();
    let mut pot = m.clone();
    for (i, s) in sw.iter().enumerate() {
        pot.row_mut(i).scale_mut(*s);
    }
    Ok((grad, pot))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RieszKind {
    Gradient,
    SqrtPotential,
}

/// `D L^{-1/2}` or `sqrt(W) L^{-1/2}`.
pub fn riesz_transform(
    e: &EigenSystem,
    model: &ModelOperator,
    kind: RieszKind,
    policy: KernelPolicy,
) -> Result<DMatrix<f64>> {
    let inv_sqrt = matrix_function_real(e, |x| 1.0 / x.sqrt(), policy)?;
    let (grad, pot) = gradient_of_multiplier(model, &inv_sqrt)?;
    Ok(match kind {
        RieszKind::Gradient => grad,
        RieszKind::SqrtPotential => pot,
    })
}

/// How the gradient and potential parts are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Combination {
    /// `||D M||_{p->p} + ||sqrt(W) M||_{p->p}`.
    #[default]
    Sum,
    /// `||[D; sqrt(W)] M||_{p->p}`, the square-sum form at `p = 2`.
    Stacked,
}

/// Norm of the pair `(D M, sqrt(W) M)` from `L^p(w)` to `L^p`.
pub fn gradient_pair_norm(
    model: &ModelOperator,
    m: &DMatrix<f64>,
    p: f64,
    how: Combination,
    cfg: &OpNormConfig,
) -> Result<NormBounds> {
    let (grad, pot) = gradient_of_multiplier(model, m)?;
    let w = model.grid().weights();
    let omega = model.edge_weights();
    match how {
        Combination::Sum => {
            let g = opnorm(&grad, w, omega, p, p, cfg)?;
            if model.has_potential() {
                Ok(g.add(opnorm(&pot, w, w, p, p, cfg)?))
            } else {
                Ok(g)
            }
        }
        Combination::Stacked => {
            let (r1, r2) = (grad.nrows(), pot.nrows());
            let mut stacked = DMatrix::zeros(r1 + r2, m.ncols());
            stacked.rows_mut(0, r1).copy_from(&grad);
            stacked.rows_mut(r1, r2).copy_from(&pot);
            let weights: Vec<f64> = omega.iter().chain(w).copied().collect();
            opnorm(&stacked, w, &weights, p, p, cfg)
        }
    }
}

/// `||g(L)||_{2->2} = max_k |g(lambda_k^2)|` for self-adjoint `g(L)`.
pub fn spectral_two_norm(values: &[f64]) -> NormBounds {
    NormBounds::exact(
        values.iter().map(|v| v.abs()).fold(0.0, f64::max),
        NormMethod::ClosedForm,
    )
}

fn check_corner_exponent(q: f64) -> Result<()> {
    precondition(q == 1.0 || q == 2.0 || q.is_infinite(), || {
        format!("q must be 1, 2 or inf, got {q}")
    })
}

#[derive(Clone, Debug)]
pub struct HolomorphicScan {
    pub theta: f64,
    pub q: f64,
    pub table: SweepTable,
    /// `max_t ||e^{-zL}||_{q->q} / (1/cos theta)^{|1/2 - 1/q| + 1/2}`.
    pub fitted_c: f64,
}

/// `||e^{-zL}||_{q->q}` along the ray `z = t e^{i theta}`.
pub fn holomorphic_norm_scan(
    e: &EigenSystem,
    theta: f64,
    q: f64,
    ts: &[f64],
) -> Result<HolomorphicScan> {
    precondition(theta.abs() < PI / 2.0, || {
        format!("|theta| must be < pi/2, got {theta}")
    })?;
    check_corner_exponent(q)?;
    let w = e.weights();
    let rows: Vec<SweepRow> = ts
        .par_iter()
        .map(|&t| {
            let z = ComplexTime::polar(t, theta)?;
            let bounds = if q == 2.0 {
                let zz = z.z();
                let mods: Vec<f64> = e
                    .lambdas_sq()
                    .iter()
                    .map(|&l| (-zz * l).exp().norm())
                    .collect();
                spectral_two_norm(&mods)
            } else {
                opnorm_complex(&heat_operator(e, z)?, w, w, q, q)?
            };
            Ok(SweepRow { param: t, bounds })
        })
        .collect::<Result<_>>()?;
    let table = SweepTable::from_rows(rows);
    let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
    let exponent = (0.5 - inv_q).abs() + 0.5;
    let fitted_c = table.sup / (1.0 / theta.cos()).powf(exponent);
    Ok(HolomorphicScan {
        theta,
        q,
        table,
        fitted_c,
    })
}

/// `sup_h ||psi(hL)||_{q->q}` over `hs`.
pub fn multiplier_uniformity(
    e: &EigenSystem,
    spec: &MultiplierSpec,
    q: f64,
    hs: &[f64],
) -> Result<SweepTable> {
    precondition(q >= 1.0, || format!("q must be >= 1, got {q}"))?;
    let w = e.weights();
    let cfg = OpNormConfig::default();
    let rows: Vec<SweepRow> = hs
        .par_iter()
        .map(|&h| {
            precondition(h > 0.0, || format!("h must be positive, got {h}"))?;
            let values = spectral_values(e, |x| spec.psi(h * x), KernelPolicy::Strict)?;
            let bounds = if q == 2.0 {
                spectral_two_norm(&values)
            } else {
                opnorm(&assemble_real(e, &values), w, w, q, q, &cfg)?
            };
            Ok(SweepRow { param: h, bounds })
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{circle_model, eigensystem};

    #[test]
    fn zero_time_heat_is_identity() {
        let m = circle_model(16).unwrap();
        let e = eigensystem(&m).unwrap();
        let id = heat_operator(&e, ComplexTime::new(Complex64::new(0.0, 0.0)).unwrap()).unwrap();
        assert!((id.re - DMatrix::<f64>::identity(16, 16)).amax() < 1e-12);
        assert!(id.im.amax() < 1e-14);
        assert!(ComplexTime::new(Complex64::new(-0.1, 1.0)).is_err());
    }

    #[test]
    fn zero_profile_gives_zero_operators() {
        let m = circle_model(16).unwrap();
        let e = eigensystem(&m).unwrap();
        let z = MultiplierSpec::zero();
        assert_eq!(spectral_multiplier(&e, &z, 0.5).unwrap().amax(), 0.0);
        let f = multiplier_via_fourier_heat(&e, &z, 0.5, FourierQuadrature::default()).unwrap();
        assert_eq!(f.matrix.amax(), 0.0);
    }

    #[test]
    fn off_lattice_step_is_rejected() {
        let m = circle_model(16).unwrap();
        let e = eigensystem(&m).unwrap();
        let spec = MultiplierSpec::bump(2.0, 1.5).unwrap();
        let quad = FourierQuadrature {
            xi_max: 200.0,
            dxi: 0.03,
        };
        assert!(multiplier_via_fourier_heat(&e, &spec, 0.1, quad).is_err());
    }
}
