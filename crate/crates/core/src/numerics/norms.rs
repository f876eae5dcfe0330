//! Weighted discrete `L^p` norms and `L^p -> L^q` operator-norm estimates.
//!
//! Grid functions carry quadrature weights, `||f||_p = (sum_i w_i |f_i|^p)^(1/p)`
//! and `||f||_inf = max_i |f_i|`. Operators map a space with input weights `w`
//! to one with output weights `omega` (these differ when the output lives on
//! edges). Corner norms (1,1), (inf,inf), (2,2) and (1,inf) are computed
//! exactly; everything else gets an interval.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ascent::{multistart, weighted_norm_complex, AscentConfig, Block, RatioProblem, Side};
use super::dense::sym_max_eigenvalue;
use super::funcalc::CMatrix;
use crate::error::{precondition, LabError, Result};

/// Relative slack allowed between lower and upper bounds.
pub const BOUNDS_SLACK: f64 = 1e-12;

/// Weighted `L^p` norm of a real grid function; `p = f64::INFINITY` for the max norm.
pub fn weighted_norm(f: &[f64], w: &[f64], p: f64) -> f64 {
    weighted_norm_complex(f, None, w, p)
}

/// Weighted `L^p` norm of a complex grid function given by parts.
pub fn weighted_norm_c(re: &[f64], im: &[f64], w: &[f64], p: f64) -> f64 {
    weighted_norm_complex(re, Some(im), w, p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormMethod {
    WeightedColumnSums,
    RowSums,
    SpectralGram,
    MaxKernelEntry,
    RieszThorin,
    HolderInclusion,
    RandomSampling,
    ProjectedAscent,
    ClosedForm,
    ColumnNorms,
    DualRowNorms,
}

impl fmt::Display for NormMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::WeightedColumnSums => "weighted-column-sums",
            Self::RowSums => "row-sums",
            Self::SpectralGram => "spectral-gram",
            Self::MaxKernelEntry => "max-kernel-entry",
            Self::RieszThorin => "riesz-thorin",
            Self::HolderInclusion => "holder-inclusion",
            Self::RandomSampling => "random-sampling",
            Self::ProjectedAscent => "projected-ascent",
            Self::ClosedForm => "closed-form",
            Self::ColumnNorms => "column-norms",
            Self::DualRowNorms => "dual-row-norms",
        };
        f.write_str(s)
    }
}

/// Lower and upper estimates of an operator norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormBounds {
    pub lower: f64,
    pub upper: f64,
    pub method_lower: NormMethod,
    pub method_upper: NormMethod,
}

impl NormBounds {
    pub fn exact(value: f64, method: NormMethod) -> Self {
        Self {
            lower: value,
            upper: value,
            method_lower: method,
            method_upper: method,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.upper - self.lower <= BOUNDS_SLACK * self.upper.abs().max(f64::MIN_POSITIVE)
    }

    /// Midpoint, the natural point value for exact bounds.
    pub fn value(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn is_consistent(&self) -> bool {
        self.lower >= 0.0 && self.lower <= self.upper * (1.0 + BOUNDS_SLACK)
    }

    /// Bounds for `a * self`, `a >= 0`.
    pub fn scale(self, a: f64) -> Self {
        Self {
            lower: a * self.lower,
            upper: a * self.upper,
            ..self
        }
    }

    /// Bounds for the sum of two norms.
    pub fn add(self, other: Self) -> Self {
        Self {
            lower: self.lower + other.lower,
            upper: self.upper + other.upper,
            method_lower: self.method_lower,
            method_upper: self.method_upper,
        }
    }
}

/// Settings for the non-corner norm path.
#[derive(Clone, Debug, PartialEq)]
pub struct OpNormConfig {
    pub random_vectors: usize,
    pub refine_starts: usize,
    pub ascent: AscentConfig,
    pub seed: u64,
}

impl Default for OpNormConfig {
    fn default() -> Self {
        Self {
            random_vectors: 64,
            refine_starts: 4,
            ascent: AscentConfig {
                max_iters: 200,
                ..AscentConfig::default()
            },
            seed: 0x5eed,
        }
    }
}

fn check_exponents(p: f64, q: f64) -> Result<()> {
    precondition(p >= 1.0 && q >= 1.0, || {
        format!("exponents must be >= 1, got p={p}, q={q}")
    })
}

fn check_weights(a_rows: usize, a_cols: usize, w_in: &[f64], w_out: &[f64]) -> Result<()> {
    if w_in.len() != a_cols {
        return Err(LabError::DimensionMismatch {
            what: "input weights",
            expected: a_cols,
            found: w_in.len(),
        });
    }
    if w_out.len() != a_rows {
        return Err(LabError::DimensionMismatch {
            what: "output weights",
            expected: a_rows,
            found: w_out.len(),
        });
    }
    precondition(
        w_in.iter().chain(w_out).all(|&v| v > 0.0 && v.is_finite()),
        || "weights must be positive and finite".into(),
    )
}

/// Entry moduli for a real or complex matrix.
struct Moduli<'a> {
    re: &'a DMatrix<f64>,
    im: Option<&'a DMatrix<f64>>,
}

impl Moduli<'_> {
    fn at(&self, i: usize, j: usize) -> f64 {
        match self.im {
            Some(im) => self.re[(i, j)].hypot(im[(i, j)]),
            None => self.re[(i, j)].abs(),
        }
    }

    fn norm_11(&self, w_in: &[f64], w_out: &[f64]) -> f64 {
        (0..self.re.ncols())
            .map(|j| {
                (0..self.re.nrows())
                    .map(|i| w_out[i] * self.at(i, j))
                    .sum::<f64>()
                    / w_in[j]
            })
            .fold(0.0, f64::max)
    }

    fn norm_inf_inf(&self) -> f64 {
        (0..self.re.nrows())
            .map(|i| (0..self.re.ncols()).map(|j| self.at(i, j)).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn norm_1_inf(&self, w_in: &[f64]) -> f64 {
        let mut best: f64 = 0.0;
        for j in 0..self.re.ncols() {
            for i in 0..self.re.nrows() {
                best = best.max(self.at(i, j) / w_in[j]);
            }
        }
        best
    }

    /// `||A||_{1->q} = max_j ||A e_j||_q / w_j`: the unit ball of `L^1(w)` has
    /// extreme points `e_j / w_j`.
    fn norm_1_q(&self, w_in: &[f64], w_out: &[f64], q: f64) -> f64 {
        let rows = self.re.nrows();
        (0..self.re.ncols())
            .map(|j| {
                let col: Vec<f64> = (0..rows).map(|i| self.at(i, j)).collect();
                weighted_norm(&col, w_out, q) / w_in[j]
            })
            .fold(0.0, f64::max)
    }

    /// `||A||_{p->inf} = max_i ||(A_ij / w_j)_j||_{p'}` in `L^{p'}(w)`.
    fn norm_p_inf(&self, w_in: &[f64], p: f64) -> f64 {
        let dual = if p == 1.0 {
            f64::INFINITY
        } else if p.is_infinite() {
            1.0
        } else {
            p / (p - 1.0)
        };
        let cols = self.re.ncols();
        (0..self.re.nrows())
            .map(|i| {
                let row: Vec<f64> = (0..cols).map(|j| self.at(i, j) / w_in[j]).collect();
                weighted_norm(&row, w_in, dual)
            })
            .fold(0.0, f64::max)
    }

    fn norm_22(&self, w_in: &[f64], w_out: &[f64]) -> Result<f64> {
        let scale = |m: &DMatrix<f64>| {
            DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
                m[(i, j)] * (w_out[i] / w_in[j]).sqrt()
            })
        };
        let br = scale(self.re);
        let (rows, cols) = br.shape();
        let lam = match self.im {
            None => {
                let gram = if rows < cols {
                    &br * br.transpose()
                } else {
                    br.tr_mul(&br)
                };
                sym_max_eigenvalue(&symmetrize(gram))?
            }
            Some(im) => {
                let bi = scale(im);
                // Hermitian Gram B^H B = X + iY, embedded as [[X, -Y], [Y, X]]
                let (x, y) = if rows < cols {
                    (
                        &br * br.transpose() + &bi * bi.transpose(),
                        &bi * br.transpose() - &br * bi.transpose(),
                    )
                } else {
                    (
                        br.tr_mul(&br) + bi.tr_mul(&bi),
                        br.tr_mul(&bi) - bi.tr_mul(&br),
                    )
                };
                let m = x.nrows();
                let mut big = DMatrix::zeros(2 * m, 2 * m);
                big.view_mut((0, 0), (m, m)).copy_from(&x);
                big.view_mut((m, m), (m, m)).copy_from(&x);
                big.view_mut((0, m), (m, m)).copy_from(&(-&y));
                big.view_mut((m, 0), (m, m)).copy_from(&y);
                sym_max_eigenvalue(&symmetrize(big))?
            }
        };
        Ok(lam.max(0.0).sqrt())
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Which exact corner, if any, `(p, q)` is.
fn corner(p: f64, q: f64) -> Option<(u8, u8)> {
    let code = |x: f64| {
        if x == 1.0 {
            Some(1)
        } else if x == 2.0 {
            Some(2)
        } else if x.is_infinite() {
            Some(0)
        } else {
            None
        }
    };
    match (code(p)?, code(q)?) {
        c @ ((1, 1) | (0, 0) | (2, 2) | (1, 0)) => Some(c),
        _ => None,
    }
}

fn exact_corner(m: &Moduli<'_>, c: (u8, u8), w_in: &[f64], w_out: &[f64]) -> Result<NormBounds> {
    Ok(match c {
        (1, 1) => NormBounds::exact(m.norm_11(w_in, w_out), NormMethod::WeightedColumnSums),
        (0, 0) => NormBounds::exact(m.norm_inf_inf(), NormMethod::RowSums),
        (2, 2) => NormBounds::exact(m.norm_22(w_in, w_out)?, NormMethod::SpectralGram),
        (1, 0) => NormBounds::exact(m.norm_1_inf(w_in), NormMethod::MaxKernelEntry),
        _ => unreachable!("not a corner"),
    })
}

/// Riesz–Thorin upper bound from the corner norms, in `(1/p, 1/q)` coordinates.
/// Requires `1/q <= 1/p`.
fn riesz_thorin(x: f64, y: f64, n11: f64, ninf: f64, n22: f64, n1inf: f64) -> f64 {
    // vertices: a=(1,1), b=(0,0), c=(1/2,1/2), d=(1,0)
    let a = (1.0, 1.0, n11);
    let b = (0.0, 0.0, ninf);
    let c = (0.5, 0.5, n22);
    let d = (1.0, 0.0, n1inf);
    let mut best = f64::INFINITY;
    for tri in [[a, b, d], [a, c, d], [b, c, d]] {
        if let Some(theta) = barycentric(tri, x, y) {
            let mut value = 1.0;
            for (t, v) in theta.iter().zip(&tri) {
                if *t > 0.0 {
                    value *= v.2.powf(*t);
                }
            }
            best = best.min(value);
        }
    }
    best
}

fn barycentric(tri: [(f64, f64, f64); 3], x: f64, y: f64) -> Option<[f64; 3]> {
    let [(x1, y1, _), (x2, y2, _), (x3, y3, _)] = tri;
    let det = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3);
    if det.abs() < 1e-15 {
        return None;
    }
    let l1 = ((y2 - y3) * (x - x3) + (x3 - x2) * (y - y3)) / det;
    let l2 = ((y3 - y1) * (x - x3) + (x1 - x3) * (y - y3)) / det;
    let l3 = 1.0 - l1 - l2;
    let eps = 1e-12;
    if l1 < -eps || l2 < -eps || l3 < -eps {
        return None;
    }
    Some([l1.max(0.0), l2.max(0.0), l3.max(0.0)])
}

fn inv(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// `||A||_{p->q}` with the same weights on both sides.
pub fn opnorm_p_to_q(a: &DMatrix<f64>, w: &[f64], p: f64, q: f64) -> Result<NormBounds> {
    opnorm(a, w, w, p, q, &OpNormConfig::default())
}

/// `||A||_{p->q}` from `L^p(w_in)` to `L^q(w_out)`.
pub fn opnorm(
    a: &DMatrix<f64>,
    w_in: &[f64],
    w_out: &[f64],
    p: f64,
    q: f64,
    cfg: &OpNormConfig,
) -> Result<NormBounds> {
    check_exponents(p, q)?;
    check_weights(a.nrows(), a.ncols(), w_in, w_out)?;
    let m = Moduli { re: a, im: None };
    if let Some(c) = corner(p, q) {
        return exact_corner(&m, c, w_in, w_out);
    }
    if let Some(b) = exact_edge(&m, w_in, w_out, p, q) {
        return Ok(b);
    }
    let upper = interpolated_upper(&m, w_in, w_out, p, q)?;
    let (lower, method_lower) = sampled_lower(a, w_in, w_out, p, q, cfg);
    Ok(NormBounds {
        lower: lower.min(upper.0 * (1.0 + BOUNDS_SLACK)),
        upper: upper.0,
        method_lower,
        method_upper: upper.1,
    })
}

/// Complex-matrix operator norm; only the exact corners are supported.
pub fn opnorm_complex(
    a: &CMatrix,
    w_in: &[f64],
    w_out: &[f64],
    p: f64,
    q: f64,
) -> Result<NormBounds> {
    check_exponents(p, q)?;
    check_weights(a.nrows(), a.ncols(), w_in, w_out)?;
    let m = Moduli {
        re: &a.re,
        im: Some(&a.im),
    };
    if let Some(c) = corner(p, q) {
        return exact_corner(&m, c, w_in, w_out);
    }
    exact_edge(&m, w_in, w_out, p, q).ok_or_else(|| {
        LabError::Unsupported(format!(
            "complex operator norm needs p = 1, q = inf or a corner, got p={p}, q={q}"
        ))
    })
}

/// Exact norms on the edges `p = 1` and `q = inf` of the exponent square.
fn exact_edge(m: &Moduli<'_>, w_in: &[f64], w_out: &[f64], p: f64, q: f64) -> Option<NormBounds> {
    if p == 1.0 {
        Some(NormBounds::exact(
            m.norm_1_q(w_in, w_out, q),
            NormMethod::ColumnNorms,
        ))
    } else if q.is_infinite() {
        Some(NormBounds::exact(
            m.norm_p_inf(w_in, p),
            NormMethod::DualRowNorms,
        ))
    } else {
        None
    }
}

fn interpolated_upper(
    m: &Moduli<'_>,
    w_in: &[f64],
    w_out: &[f64],
    p: f64,
    q: f64,
) -> Result<(f64, NormMethod)> {
    let n11 = m.norm_11(w_in, w_out);
    let ninf = m.norm_inf_inf();
    let n22 = m.norm_22(w_in, w_out)?;
    let (x, y) = (inv(p), inv(q));
    if y <= x {
        let n1inf = m.norm_1_inf(w_in);
        Ok((
            riesz_thorin(x, y, n11, ninf, n22, n1inf),
            NormMethod::RieszThorin,
        ))
    } else {
        // q < p: ||Af||_q <= mu^(1/q - 1/p) ||Af||_p on a finite measure space
        let mu: f64 = w_out.iter().sum();
        let npp = riesz_thorin(x, x, n11, ninf, n22, m.norm_1_inf(w_in));
        Ok((mu.powf(y - x) * npp, NormMethod::HolderInclusion))
    }
}

fn sampled_lower(
    a: &DMatrix<f64>,
    w_in: &[f64],
    w_out: &[f64],
    p: f64,
    q: f64,
    cfg: &OpNormConfig,
) -> (f64, NormMethod) {
    let n = a.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ratio = |x: &[f64]| {
        let y = a * DVector::from_column_slice(x);
        weighted_norm(y.as_slice(), w_out, q) / weighted_norm(x, w_in, p)
    };
    let mut scored: Vec<(f64, Vec<f64>)> = (0..cfg.random_vectors.max(1))
        .map(|_| {
            let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            (ratio(&x), x)
        })
        .collect();
    // unit vectors at the heaviest column are natural extremizers near p = 1
    let heaviest = (0..n)
        .max_by(|&i, &j| {
            let ci = a.column(i).amax() / w_in[i];
            let cj = a.column(j).amax() / w_in[j];
            ci.total_cmp(&cj)
        })
        .unwrap_or(0);
    let mut e = vec![0.0; n];
    e[heaviest] = 1.0;
    scored.push((ratio(&e), e));
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let sampled = scored[0].0;
    if cfg.refine_starts == 0 {
        return (sampled, NormMethod::RandomSampling);
    }
    let problem = RatioProblem {
        numerator: Side::single(Block::real(a, w_out), q),
        denominator: Side::single(Block::identity(w_in), p),
    };
    let starts: Vec<Vec<f64>> = scored
        .into_iter()
        .take(cfg.refine_starts)
        .map(|(_, x)| x)
        .collect();
    let refined = multistart(&problem, &starts, &cfg.ascent);
    if refined.value > sampled {
        (refined.value, NormMethod::ProjectedAscent)
    } else {
        (sampled, NormMethod::RandomSampling)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identity_has_unit_norm_for_every_p() {
        let a = DMatrix::<f64>::identity(6, 6);
        let w = vec![0.25; 6];
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let b = opnorm_p_to_q(&a, &w, p, p).unwrap();
            assert!(
                (b.lower - 1.0).abs() < 1e-9 && (b.upper - 1.0).abs() < 1e-12,
                "p={p}: {b:?}"
            );
        }
    }

    #[test]
    fn one_point_one_to_inf_divides_by_weight() {
        let a = DMatrix::from_element(1, 1, 3.0);
        let b = opnorm_p_to_q(&a, &[0.5], 1.0, f64::INFINITY).unwrap();
        assert_eq!(b.lower, 6.0);
        assert_eq!(b.method_upper, NormMethod::MaxKernelEntry);
    }

    #[test]
    fn one_one_matches_brute_force_column_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(8, 8, |_, _| rng.random_range(0.0..1.0));
        let w: Vec<f64> = (0..8).map(|_| rng.random_range(0.1..1.0)).collect();
        let mut brute: f64 = 0.0;
        for j in 0..8 {
            let mut s = 0.0;
            for i in 0..8 {
                s += w[i] * a[(i, j)];
            }
            brute = brute.max(s / w[j]);
        }
        let b = opnorm_p_to_q(&a, &w, 1.0, 1.0).unwrap();
        assert!((b.lower - brute).abs() < 1e-14 * brute);
    }

    #[test]
    fn spectral_norm_of_weighted_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -5.0, 2.0]));
        let w = [1.0, 2.0, 0.5];
        let b = opnorm_p_to_q(&a, &w, 2.0, 2.0).unwrap();
        assert!((b.upper - 5.0).abs() < 1e-12);
    }

    #[test]
    fn complex_two_norm_of_rotation_phase() {
        // e^{i theta} times identity has norm 1
        let re = DMatrix::from_diagonal_element(4, 4, 0.6);
        let im = DMatrix::from_diagonal_element(4, 4, 0.8);
        let a = CMatrix { re, im };
        let w = [1.0; 4];
        for p in [1.0, 2.0, f64::INFINITY] {
            let b = opnorm_complex(&a, &w, &w, p, p).unwrap();
            assert!((b.upper - 1.0).abs() < 1e-12, "p={p}: {b:?}");
        }
        assert!(opnorm_complex(&a, &w, &w, 1.5, 3.0).is_err());
    }

    #[test]
    fn interior_points_give_consistent_intervals() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DMatrix::from_fn(7, 5, |_, _| rng.random_range(-1.0..1.0));
        let w_in = vec![0.2; 5];
        let w_out = vec![0.3; 7];
        for (p, q) in [(1.5, 3.0), (2.0, 4.0), (3.0, 1.5), (1.0, 2.0)] {
            let b = opnorm(&a, &w_in, &w_out, p, q, &OpNormConfig::default()).unwrap();
            assert!(b.is_consistent(), "({p},{q}): {b:?}");
        }
    }

    #[test]
    fn edge_norms_bound_and_meet_sampled_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = DMatrix::from_fn(6, 5, |_, _| rng.random_range(-1.0..1.0));
        let w_in: Vec<f64> = (0..5).map(|_| rng.random_range(0.2..1.0)).collect();
        let w_out: Vec<f64> = (0..6).map(|_| rng.random_range(0.2..1.0)).collect();
        let m = Moduli { re: &a, im: None };
        let cfg = OpNormConfig::default();
        for (p, q) in [
            (1.0, 2.0),
            (1.0, 3.0),
            (2.0, f64::INFINITY),
            (1.5, f64::INFINITY),
        ] {
            let exact = opnorm(&a, &w_in, &w_out, p, q, &cfg).unwrap();
            assert!(exact.is_exact());
            let (lower, _) = sampled_lower(&a, &w_in, &w_out, p, q, &cfg);
            assert!(lower <= exact.upper * (1.0 + 1e-12), "({p},{q})");
            assert!(
                lower >= exact.upper * (1.0 - 1e-3),
                "({p},{q}): {lower} vs {}",
                exact.upper
            );
            assert!(
                exact.upper
                    <= interpolated_upper(&m, &w_in, &w_out, p, q).unwrap().0 * (1.0 + 1e-12)
            );
        }
    }

    #[test]
    fn rejects_sub_unit_exponents() {
        let a = DMatrix::<f64>::identity(2, 2);
        assert!(opnorm_p_to_q(&a, &[1.0, 1.0], 0.5, 2.0).is_err());
    }
}
