//! Symmetric tridiagonal eigensolver (implicit QL with Wilkinson-type shifts).

use nalgebra::DMatrix;

use crate::error::{precondition, LabError, Result};

/// Maximum number of QL sweeps spent on a single eigenvalue before giving up.
pub const MAX_QL_ITERATIONS: usize = 64;

/// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiag {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        precondition(!diag.is_empty(), || {
            "tridiagonal matrix needs n >= 1".into()
        })?;
        if offdiag.len() + 1 != diag.len() {
            return Err(LabError::DimensionMismatch {
                what: "tridiagonal off-diagonal",
                expected: diag.len() - 1,
                found: offdiag.len(),
            });
        }
        if let Some(i) = diag.iter().chain(&offdiag).position(|v| !v.is_finite()) {
            return Err(LabError::Precondition(format!(
                "tridiagonal entry {i} is not finite"
            )));
        }
        Ok(Self { diag, offdiag })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.offdiag[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.offdiag[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = self.diag[i];
            if i + 1 < n {
                a[(i, i + 1)] = self.offdiag[i];
                a[(i + 1, i)] = self.offdiag[i];
            }
        }
        a
    }
}

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// stored as columns.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Full eigendecomposition of a symmetric tridiagonal matrix.
pub fn eig_sym_tridiag(t: &SymTridiag) -> Result<EigenPairs> {
    let n = t.len();
    let mut d = t.diag.clone();
    let mut e = vec![0.0; n];
    e[1..].copy_from_slice(&t.offdiag);
    let mut v = DMatrix::identity(n, n);
    tql(&mut d, &mut e, Some(&mut v))?;
    Ok(sort_pairs(d, Some(v)).into_pairs())
}

/// Eigenvalues only, ascending.
pub fn eigvals_sym_tridiag(t: &SymTridiag) -> Result<Vec<f64>> {
    let n = t.len();
    let mut d = t.diag.clone();
    let mut e = vec![0.0; n];
    e[1..].copy_from_slice(&t.offdiag);
    tql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Raw QL iteration. `e[i]` holds the sub-diagonal entry coupling `i-1` and
/// `i` on input (`e[0]` ignored). Rotations are accumulated into the columns
/// of `v` when provided.
pub(crate) fn tql(d: &mut [f64], e: &mut [f64], mut v: Option<&mut DMatrix<f64>>) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(LabError::NonConvergence {
                        routine: "implicit QL",
                        index: l,
                        iterations: MAX_QL_ITERATIONS,
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = v.as_deref_mut() {
                        rotate_columns(v, i, c, s);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[inline]
fn rotate_columns(v: &mut DMatrix<f64>, i: usize, c: f64, s: f64) {
    let nrows = v.nrows();
    let data = v.as_mut_slice();
    let (left, right) = data.split_at_mut((i + 1) * nrows);
    let col_i = &mut left[i * nrows..];
    let col_j = &mut right[..nrows];
    for (a, b) in col_i.iter_mut().zip(col_j.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

pub(crate) struct Sorted {
    values: Vec<f64>,
    vectors: Option<DMatrix<f64>>,
}

impl Sorted {
    pub(crate) fn into_pairs(self) -> EigenPairs {
        EigenPairs {
            values: self.values,
            vectors: self.vectors.expect("vectors requested"),
        }
    }
}

pub(crate) fn sort_pairs(values: Vec<f64>, vectors: Option<DMatrix<f64>>) -> Sorted {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let vectors = vectors.map(|v| {
        let mut out = DMatrix::zeros(v.nrows(), order.len());
        for (dst, &src) in order.iter().enumerate() {
            out.set_column(dst, &v.column(src));
        }
        out
    });
    Sorted {
        values: sorted,
        vectors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual_ok(t: &SymTridiag, pairs: &EigenPairs, tol: f64) {
        let n = t.len();
        for k in 0..n {
            let v: Vec<f64> = pairs.vectors.column(k).iter().copied().collect();
            let tv = t.mul_vec(&v);
            let lam = pairs.values[k];
            let res: f64 = tv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - lam * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res <= tol * (1.0 + lam.abs()), "residual {res} at {k}");
        }
        let gram = pairs.vectors.transpose() * &pairs.vectors;
        let defect = (gram - DMatrix::<f64>::identity(n, n)).amax();
        assert!(defect <= 1e-10, "orthonormality defect {defect}");
    }

    #[test]
    fn two_by_two_closed_form() {
        let t = SymTridiag::new(vec![2.0, 2.0], vec![-1.0]).unwrap();
        let pairs = eig_sym_tridiag(&t).unwrap();
        assert!((pairs.values[0] - 1.0).abs() < 1e-14);
        assert!((pairs.values[1] - 3.0).abs() < 1e-14);
        residual_ok(&t, &pairs, 1e-12);
    }

    #[test]
    fn diagonal_input_gives_identity_vectors() {
        let c = 1.75;
        let t = SymTridiag::new(vec![c; 6], vec![0.0; 5]).unwrap();
        let pairs = eig_sym_tridiag(&t).unwrap();
        assert!(pairs.values.iter().all(|&v| v == c));
        assert_eq!(pairs.vectors, DMatrix::identity(6, 6));
    }

    #[test]
    fn dirichlet_laplacian_matches_discrete_sine_spectrum() {
        // Oracle: the n-point second difference with Dirichlet ends has
        // eigenvalues (4/h^2) sin^2(k pi / (2(n+1))), k = 1..n.
        let n = 50;
        let h = 1.0 / (n as f64 + 1.0);
        let t = SymTridiag::new(vec![2.0 / (h * h); n], vec![-1.0 / (h * h); n - 1]).unwrap();
        let pairs = eig_sym_tridiag(&t).unwrap();
        for k in 1..=n {
            let s = (k as f64 * std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin();
            let exact = 4.0 / (h * h) * s * s;
            assert!(
                (pairs.values[k - 1] - exact).abs() <= 1e-9 * exact.max(1.0),
                "k={k}: {} vs {exact}",
                pairs.values[k - 1]
            );
        }
        residual_ok(&t, &pairs, 1e-10);
    }

    #[test]
    fn single_entry() {
        let t = SymTridiag::new(vec![-4.5], vec![]).unwrap();
        let pairs = eig_sym_tridiag(&t).unwrap();
        assert_eq!(pairs.values, vec![-4.5]);
    }

    #[test]
    fn rejects_non_finite_and_bad_lengths() {
        assert!(SymTridiag::new(vec![1.0, f64::NAN], vec![0.0]).is_err());
        assert!(SymTridiag::new(vec![1.0, 2.0], vec![]).is_err());
        assert!(SymTridiag::new(vec![], vec![]).is_err());
    }

    #[test]
    fn values_only_path_agrees() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| (i as f64 * 1.3).cos()).collect();
        let t = SymTridiag::new(diag, off).unwrap();
        let full = eig_sym_tridiag(&t).unwrap();
        let vals = eigvals_sym_tridiag(&t).unwrap();
        for (a, b) in full.values.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-12);
        }
        residual_ok(&t, &full, 1e-10);
    }
}
