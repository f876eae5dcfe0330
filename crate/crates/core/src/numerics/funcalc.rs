//! Eigensystems of weighted self-adjoint operators and the functional calculus
//! built on them.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{LabError, Result};

/// Orthonormality tolerance enforced on every [`EigenSystem`].
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-10;

/// Spectral data of a nonnegative operator that is self-adjoint for the
/// weighted inner product `<f, g> = sum_i w_i f_i g_i`.
///
/// `vectors` is `n_nodes x n_modes`; column `k` holds `phi_k` sampled on the
/// grid, normalised so that `sum_i w_i phi_k(i) phi_j(i) = delta_kj`.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    lambdas_sq: Vec<f64>,
    vectors: DMatrix<f64>,
    weights: Vec<f64>,
}

impl EigenSystem {
    pub fn new(lambdas_sq: Vec<f64>, vectors: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        if vectors.ncols() != lambdas_sq.len() {
            return Err(LabError::DimensionMismatch {
                what: "eigenvector count",
                expected: lambdas_sq.len(),
                found: vectors.ncols(),
            });
        }
        if vectors.nrows() != weights.len() {
            return Err(LabError::DimensionMismatch {
                what: "eigenvector length",
                expected: weights.len(),
                found: vectors.nrows(),
            });
        }
        if let Some(k) = lambdas_sq.windows(2).position(|w| w[0] > w[1]) {
            return Err(LabError::Validation(format!(
                "eigenvalues not ascending at index {k}"
            )));
        }
        let scale = lambdas_sq.last().copied().unwrap_or(0.0).abs().max(1.0);
        if let Some(&l0) = lambdas_sq.first() {
            if l0 < -1e-10 * scale {
                return Err(LabError::Validation(format!(
                    "operator is not nonnegative: lambda_0^2 = {l0:e}"
                )));
            }
        }
        let sys = Self {
            lambdas_sq,
            vectors,
            weights,
        };
        let defect = sys.orthonormality_defect();
        if defect > ORTHONORMALITY_TOLERANCE {
            return Err(LabError::Validation(format!(
                "eigenvectors are not weighted-orthonormal: defect {defect:e}"
            )));
        }
        Ok(sys)
    }

    pub fn lambdas_sq(&self) -> &[f64] {
        &self.lambdas_sq
    }

    /// `lambda_k = sqrt(lambda_k^2)`, clamping roundoff below zero.
    pub fn lambda(&self, k: usize) -> f64 {
        self.lambdas_sq[k].max(0.0).sqrt()
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_nodes(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas_sq.len()
    }

    /// Threshold below which an eigenvalue is treated as part of the kernel.
    pub fn kernel_threshold(&self) -> f64 {
        1e-10
            * self
                .lambdas_sq
                .last()
                .copied()
                .unwrap_or(1.0)
                .abs()
                .max(1.0)
    }

    pub fn is_kernel_mode(&self, k: usize) -> bool {
        self.lambdas_sq[k].abs() <= self.kernel_threshold()
    }

    /// `max |Phi^T W Phi - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let wphi = self.weighted_vectors();
        let gram = self.vectors.transpose() * wphi;
        let m = gram.nrows();
        (gram - DMatrix::<f64>::identity(m, m)).amax()
    }

    /// `diag(w) * Phi`.
    pub fn weighted_vectors(&self) -> DMatrix<f64> {
        let mut out = self.vectors.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row *= self.weights[i];
        }
        out
    }

    /// Coefficients `alpha_k = <u, phi_k>` of a grid function.
    pub fn coefficients(&self, u: &[f64]) -> Vec<f64> {
        (0..self.n_modes())
            .map(|k| {
                self.vectors
                    .column(k)
                    .iter()
                    .zip(u)
                    .zip(&self.weights)
                    .map(|((p, x), w)| p * x * w)
                    .sum()
            })
            .collect()
    }

    /// Columns `k_lo..=k_hi` of the eigenvector matrix.
    pub fn band_vectors(&self, k_lo: usize, k_hi: usize) -> DMatrix<f64> {
        self.vectors.columns(k_lo, k_hi - k_lo + 1).into_owned()
    }
}

/// Complex matrix stored as separate real and imaginary parts so that both
/// halves go through the real GEMM kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl CMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            re: DMatrix::zeros(nrows, ncols),
            im: DMatrix::zeros(nrows, ncols),
        }
    }

    pub fn from_real(re: DMatrix<f64>) -> Self {
        let im = DMatrix::zeros(re.nrows(), re.ncols());
        Self { re, im }
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[(i, j)], self.im[(i, j)])
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        CMatrix {
            re: &self.re * &other.re - &self.im * &other.im,
            im: &self.re * &other.im + &self.im * &other.re,
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        CMatrix {
            re: &self.re - &other.re,
            im: &self.im - &other.im,
        }
    }

    /// Largest entry modulus.
    pub fn max_modulus(&self) -> f64 {
        self.re
            .iter()
            .zip(self.im.iter())
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.im.amax()
    }
}

/// What to do with eigenvalues in the kernel of the operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KernelPolicy {
    /// Evaluate `g` everywhere; a non-finite value is an error.
    #[default]
    Strict,
    /// Force `g = 0` on kernel modes (restriction to the orthogonal
    /// complement of the kernel).
    RestrictToRange,
}

/// Samples `g` on the spectrum, applying the kernel policy.
pub fn spectral_values<T, F>(e: &EigenSystem, g: F, policy: KernelPolicy) -> Result<Vec<T>>
where
    T: SpectralScalar,
    F: Fn(f64) -> T,
{
    e.lambdas_sq
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            if policy == KernelPolicy::RestrictToRange && e.is_kernel_mode(k) {
                return Ok(T::zero());
            }
            let v = g(l.max(0.0));
            if v.finite() {
                Ok(v)
            } else {
                Err(LabError::SingularSpectrum { index: k, value: l })
            }
        })
        .collect()
}

pub trait SpectralScalar: Copy {
    fn zero() -> Self;
    fn finite(&self) -> bool;
}

impl SpectralScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl SpectralScalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// `Phi diag(values) Phi^T diag(w)` for precomputed spectral values; modes
/// with a zero value are skipped.
pub fn assemble_real(e: &EigenSystem, values: &[f64]) -> DMatrix<f64> {
    let active: Vec<usize> = (0..values.len()).filter(|&k| values[k] != 0.0).collect();
    let n = e.n_nodes();
    if active.is_empty() {
        return DMatrix::zeros(n, n);
    }
    let mut left = DMatrix::zeros(n, active.len());
    let mut right = DMatrix::zeros(n, active.len());
    for (j, &k) in active.iter().enumerate() {
        let col = e.vectors.column(k);
        for i in 0..n {
            left[(i, j)] = col[i] * values[k];
            right[(i, j)] = col[i] * e.weights[i];
        }
    }
    left * right.transpose()
}

/// `g(L)` for a real-valued `g`.
pub fn matrix_function_real<F>(e: &EigenSystem, g: F, policy: KernelPolicy) -> Result<DMatrix<f64>>
where
    F: Fn(f64) -> f64,
{
    let values = spectral_values(e, g, policy)?;
    Ok(assemble_real(e, &values))
}

/// `g(L)` for a complex-valued `g`, acting on grid functions.
pub fn matrix_function<F>(e: &EigenSystem, g: F, policy: KernelPolicy) -> Result<CMatrix>
where
    F: Fn(f64) -> Complex64,
{
    let values = spectral_values(e, g, policy)?;
    let re: Vec<f64> = values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    Ok(CMatrix {
        re: assemble_real(e, &re),
        im: assemble_real(e, &im),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::tridiag::{eig_sym_tridiag, SymTridiag};

    /// Dirichlet Laplacian on 12 nodes with uniform weight h; eigenvectors
    /// rescaled to weighted orthonormality.
    fn small_system() -> (EigenSystem, DMatrix<f64>) {
        let n = 12;
        let h = 1.0 / (n as f64 + 1.0);
        let t = SymTridiag::new(vec![2.0 / (h * h); n], vec![-1.0 / (h * h); n - 1]).unwrap();
        let pairs = eig_sym_tridiag(&t).unwrap();
        let vectors = pairs.vectors / h.sqrt();
        let sys = EigenSystem::new(pairs.values, vectors, vec![h; n]).unwrap();
        (sys, t.to_dense())
    }

    #[test]
    fn identity_and_reconstruction() {
        let (sys, l) = small_system();
        let id = matrix_function_real(&sys, |_| 1.0, KernelPolicy::Strict).unwrap();
        assert!((id - DMatrix::<f64>::identity(12, 12)).amax() < 1e-12);
        let rec = matrix_function_real(&sys, |x| x, KernelPolicy::Strict).unwrap();
        assert!((rec - &l).amax() <= 1e-10 * l.amax());
    }

    #[test]
    fn exact_on_eigenvectors() {
        let (sys, _) = small_system();
        let g = |x: f64| (-0.01 * x).exp();
        let m = matrix_function_real(&sys, g, KernelPolicy::Strict).unwrap();
        for k in 0..sys.n_modes() {
            let v = sys.vectors().column(k);
            let mv = &m * v;
            let expect = v * g(sys.lambdas_sq()[k]);
            assert!((mv - &expect).amax() <= 1e-12 * expect.amax().max(1e-300) + 1e-14);
        }
    }

    #[test]
    fn homomorphism_property() {
        let (sys, _) = small_system();
        let g1 = |x: f64| (-0.002 * x).exp();
        let g2 = |x: f64| 1.0 / (1.0 + 0.001 * x);
        let a = matrix_function_real(&sys, g1, KernelPolicy::Strict).unwrap();
        let b = matrix_function_real(&sys, g2, KernelPolicy::Strict).unwrap();
        let ab = matrix_function_real(&sys, |x| g1(x) * g2(x), KernelPolicy::Strict).unwrap();
        assert!((&a * &b - ab).amax() < 1e-10);
    }

    #[test]
    fn singular_spectrum_reports_index() {
        let lambdas = vec![0.0, 1.0];
        let vectors = DMatrix::identity(2, 2);
        let sys = EigenSystem::new(lambdas, vectors, vec![1.0, 1.0]).unwrap();
        let err = matrix_function_real(&sys, |x| x.powf(-0.5), KernelPolicy::Strict).unwrap_err();
        assert_eq!(
            err,
            LabError::SingularSpectrum {
                index: 0,
                value: 0.0
            }
        );
        let ok =
            matrix_function_real(&sys, |x| x.powf(-0.5), KernelPolicy::RestrictToRange).unwrap();
        assert_eq!(ok[(0, 0)], 0.0);
        assert_eq!(ok[(1, 1)], 1.0);
    }

    #[test]
    fn rejects_non_orthonormal_and_unsorted() {
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(EigenSystem::new(vec![0.0, 1.0], v, vec![1.0, 1.0]).is_err());
        assert!(EigenSystem::new(vec![2.0, 1.0], DMatrix::identity(2, 2), vec![1.0, 1.0]).is_err());
    }
}
