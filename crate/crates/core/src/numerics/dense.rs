//! Dense symmetric eigensolvers.
//!
//! `eig_sym_dense` is a cyclic Jacobi solver returning full eigenpairs.
//! `sym_eigenvalues` reduces to tridiagonal form by Householder reflections and
//! finishes with the QL iteration; it is the workhorse behind exact 2->2
//! operator norms where only the spectrum is needed.

use nalgebra::DMatrix;

use super::tridiag::{sort_pairs, tql, EigenPairs};
use crate::error::{LabError, Result};

/// Sweep cap for the cyclic Jacobi solver.
pub const MAX_JACOBI_SWEEPS: usize = 100;

/// Relative symmetry defect accepted by [`eig_sym_dense`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

pub fn symmetry_defect(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

fn check_square_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(LabError::DimensionMismatch {
            what: "square matrix",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if a.is_empty() {
        return Err(LabError::Precondition("empty matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Precondition(
            "matrix has non-finite entries".into(),
        ));
    }
    let scale = a.amax();
    let defect = symmetry_defect(a);
    if defect > SYMMETRY_TOLERANCE * scale {
        return Err(LabError::Precondition(format!(
            "matrix is not symmetric: defect {defect:e} vs scale {scale:e}"
        )));
    }
    Ok(())
}

/// Full eigendecomposition of a dense symmetric matrix by cyclic Jacobi
/// rotations. Eigenvalues ascending, eigenvectors as orthonormal columns.
pub fn eig_sym_dense(a: &DMatrix<f64>) -> Result<EigenPairs> {
    check_square_symmetric(a)?;
    let n = a.nrows();
    // symmetrize exactly so rotations see a symmetric matrix
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    if n == 1 {
        return Ok(EigenPairs {
            values: vec![m[(0, 0)]],
            vectors: v,
        });
    }

    let total_norm = m.norm();
    let mut sweep = 0;
    loop {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..j {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off == 0.0 || off.sqrt() <= f64::EPSILON * total_norm {
            break;
        }
        sweep += 1;
        if sweep > MAX_JACOBI_SWEEPS {
            return Err(LabError::NonConvergence {
                routine: "cyclic Jacobi",
                index: 0,
                iterations: MAX_JACOBI_SWEEPS,
            });
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    Ok(sort_pairs(values, Some(v)).into_pairs())
}

/// Eigenvalues (ascending) of a dense symmetric matrix.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_square_symmetric(a)?;
    let n = a.nrows();
    let (mut d, mut e) = householder_tridiagonalize(a);
    tql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    debug_assert_eq!(d.len(), n);
    Ok(d)
}

/// Largest eigenvalue of a dense symmetric matrix.
pub fn sym_max_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    Ok(*sym_eigenvalues(a)?.last().expect("non-empty"))
}

/// Reduces a symmetric matrix to tridiagonal form. Returns the diagonal and a
/// sub-diagonal vector `e` with `e[i]` coupling `i-1` and `i` (`e[0] = 0`).
fn householder_tridiagonalize(a: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    // column-major working copy of the full symmetric matrix
    let mut w: Vec<f64> = a.iter().copied().collect();
    for j in 0..n {
        for i in 0..j {
            let s = 0.5 * (w[i + j * n] + w[j + i * n]);
            w[i + j * n] = s;
            w[j + i * n] = s;
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        // reflect x = A[k+1.., k]
        let col = &w[k * n..(k + 1) * n];
        let x = &col[k + 1..];
        let alpha_norm = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        d[k] = col[k];
        if alpha_norm == 0.0 {
            e[k + 1] = 0.0;
            continue;
        }
        let alpha = if x[0] > 0.0 { -alpha_norm } else { alpha_norm };
        let m = n - k - 1;
        v[..m].copy_from_slice(x);
        v[0] -= alpha;
        let vnorm2: f64 = v[..m].iter().map(|t| t * t).sum();
        e[k + 1] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // p = beta * A_sub * v   (A_sub is the trailing m x m block)
        let off = k + 1;
        for pi in p[..m].iter_mut() {
            *pi = 0.0;
        }
        for j in 0..m {
            let vj = v[j];
            if vj == 0.0 {
                continue;
            }
            let colj = &w[(off + j) * n + off..(off + j) * n + off + m];
            for (pi, aij) in p[..m].iter_mut().zip(colj) {
                *pi += aij * vj;
            }
        }
        for pi in p[..m].iter_mut() {
            *pi *= beta;
        }
        let kfac = 0.5 * beta * v[..m].iter().zip(&p[..m]).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..m {
            p[i] -= kfac * v[i];
        }
        // A_sub -= v q^T + q v^T with q = p
        for j in 0..m {
            let vj = v[j];
            let qj = p[j];
            let colj = &mut w[(off + j) * n + off..(off + j) * n + off + m];
            for (i, aij) in colj.iter_mut().enumerate() {
                *aij -= v[i] * qj + p[i] * vj;
            }
        }
    }
    if n >= 2 {
        d[n - 2] = w[(n - 2) + (n - 2) * n];
        e[n - 1] = w[(n - 1) + (n - 2) * n];
    }
    d[n - 1] = w[(n - 1) + (n - 1) * n];
    e[0] = 0.0;
    (d, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        // Gram-Schmidt on a random matrix
        let mut q = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        for j in 0..n {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let ci = q.column(i).clone_owned();
                let mut cj = q.column_mut(j);
                cj -= ci * proj;
            }
            let norm = q.column(j).norm();
            q.column_mut(j).scale_mut(1.0 / norm);
        }
        q
    }

    #[test]
    fn identity_and_scalar() {
        let pairs = eig_sym_dense(&DMatrix::identity(5, 5)).unwrap();
        assert!(pairs.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let one = eig_sym_dense(&DMatrix::from_element(1, 1, -2.5)).unwrap();
        assert_eq!(one.values, vec![-2.5]);
    }

    #[test]
    fn recovers_constructed_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 24;
        let q = random_orthogonal(n, &mut rng);
        let mut spectrum: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let a = &q
            * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(spectrum.clone()))
            * q.transpose();
        spectrum.sort_by(f64::total_cmp);
        let pairs = eig_sym_dense(&a).unwrap();
        for (got, want) in pairs.values.iter().zip(&spectrum) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        for k in 0..n {
            let v = pairs.vectors.column(k);
            let r = &a * v - v * pairs.values[k];
            assert!(r.norm() <= 1e-10 * (1.0 + pairs.values[k].abs()));
        }
        let gram = pairs.vectors.transpose() * &pairs.vectors;
        assert!((gram - DMatrix::<f64>::identity(n, n)).amax() < 1e-10);

        let vals = sym_eigenvalues(&a).unwrap();
        for (got, want) in vals.iter().zip(&spectrum) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let mut a = DMatrix::<f64>::identity(3, 3);
        a[(0, 2)] = 0.5;
        assert!(matches!(eig_sym_dense(&a), Err(LabError::Precondition(_))));
        assert!(sym_eigenvalues(&a).is_err());
    }

    #[test]
    fn householder_handles_small_sizes() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let vals = sym_eigenvalues(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let b = DMatrix::from_element(1, 1, 7.0);
        assert_eq!(sym_eigenvalues(&b).unwrap(), vec![7.0]);
    }
}
