//! Heat kernels and audits of pointwise and integrated kernel estimates.
//!
//! Entries smaller than `NOISE_FLOOR` times the largest entry are treated as
//! unresolved by the fits: multiplying rounding noise by `exp(c d^2 / t)`
//! would otherwise dominate every constant.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use twofloat::TwoFloat;

use crate::calculus::{gradient_pair_norm, heat_operator_real, Combination};
use crate::error::{precondition, LabError, Result};
use crate::models::{Geometry, Grid1D, ModelOperator};
use crate::numerics::{EigenSystem, NormBounds, NormMethod, OpNormConfig};
use crate::sweep::{linear_fit, SweepRow, SweepTable};

/// Relative magnitude below which kernel entries are considered unresolved.
pub const NOISE_FLOOR: f64 = 1e-10;

/// Largest/smallest fitted constant accepted as "uniform".
pub const UNIFORMITY_FACTOR: f64 = 2.0;

/// `p_t(x_i, x_j)` on a grid.
#[derive(Clone, Debug)]
pub struct KernelTable {
    pub t: f64,
    pub values: DMatrix<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl KernelTable {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(P f)(x_i) = sum_j w_j p_t(x_i, x_j) f_j`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let wf: Vec<f64> = f.iter().zip(&self.weights).map(|(a, b)| a * b).collect();
        (&self.values * DVector::from_vec(wf)).as_slice().to_vec()
    }

    /// The integral operator as a matrix on grid functions.
    pub fn operator(&self) -> DMatrix<f64> {
        let mut m = self.values.clone();
        for (j, w) in self.weights.iter().enumerate() {
            m.column_mut(j).scale_mut(*w);
        }
        m
    }

    /// Kernel of the composition `P_self P_other`.
    pub fn compose(&self, other: &KernelTable) -> KernelTable {
        let mut left = self.values.clone();
        for (j, w) in self.weights.iter().enumerate() {
            left.column_mut(j).scale_mut(*w);
        }
        KernelTable {
            t: self.t + other.t,
            values: left * &other.values,
            nodes: self.nodes.clone(),
            weights: self.weights.clone(),
        }
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.values - self.values.transpose()).amax()
    }

    pub fn min_entry(&self) -> f64 {
        self.values.min()
    }

    /// `max_i sum_j w_j p_t(x_i, x_j)`.
    pub fn max_row_mass(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                (0..self.len())
                    .map(|j| self.weights[j] * self.values[(i, j)])
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn diagonal_max(&self) -> f64 {
        self.values.diagonal().max()
    }
}

/// `p_t(x_i, x_j) = sum_k e^{-t lambda_k^2} phi_k(x_i) phi_k(x_j)`.
pub fn heat_kernel_table(e: &EigenSystem, grid: &Grid1D, t: f64) -> Result<KernelTable> {
    precondition(t > 0.0, || format!("t must be positive, got {t}"))?;
    if grid.len() != e.n_nodes() {
        return Err(LabError::DimensionMismatch {
            what: "grid nodes",
            expected: e.n_nodes(),
            found: grid.len(),
        });
    }
    let phi = e.vectors();
    let mut scaled = phi.clone();
    for (k, &l) in e.lambdas_sq().iter().enumerate() {
        scaled.column_mut(k).scale_mut((-t * l).exp());
    }
    let values = scaled * phi.transpose();
    Ok(KernelTable {
        t,
        values: (&values + values.transpose()) * 0.5,
        nodes: grid.nodes().to_vec(),
        weights: grid.weights().to_vec(),
    })
}

/// One-dimensional Mehler kernel of `-d^2/dx^2 + x^2`.
pub fn mehler_1d(t: f64, x: f64, y: f64) -> Result<f64> {
    precondition(t > 0.0, || format!("t must be positive, got {t}"))?;
    let th = t.tanh();
    let pre = (2.0 * std::f64::consts::PI * (2.0 * t).sinh()).powf(-0.5);
    Ok(pre * (-th * (x + y) * (x + y) / 4.0 - (x - y) * (x - y) / (4.0 * th)).exp())
}

/// `sum_{k < terms} e^{-(2k+1)t} h_k(x) h_k(y)`, evaluated in double-double
/// arithmetic so far off-diagonal values survive the cancellation.
pub fn mehler_series(t: f64, x: f64, y: f64, terms: usize) -> Result<f64> {
    precondition(t > 0.0, || format!("t must be positive, got {t}"))?;
    precondition(
        x.abs() <= SERIES_ARGUMENT_MAX && y.abs() <= SERIES_ARGUMENT_MAX,
        || format!("series arguments must satisfy |x| <= {SERIES_ARGUMENT_MAX}, got ({x}, {y})"),
    )?;
    let hx = hermite_extended(x, terms);
    let hy = hermite_extended(y, terms);
    let step = exp_extended(-2.0 * t);
    let mut decay = TwoFloat::from(1.0);
    let mut sum = TwoFloat::from(0.0);
    for (a, b) in hx.iter().zip(&hy) {
        sum += decay * *a * *b;
        decay *= step;
    }
    // common factors only need working precision
    let scale = (-t - 0.5 * (x * x + y * y)).exp() / std::f64::consts::PI.sqrt();
    Ok(sum.hi() * scale)
}

/// Largest argument accepted by [`mehler_series`]; beyond it the unscaled
/// recurrence overflows.
pub const SERIES_ARGUMENT_MAX: f64 = 25.0;

// twofloat's add and mul are exact to double-double precision; its division
// and elementary functions are not, so those are rebuilt here.

/// `a / b` with one residual correction.
fn div_extended(a: TwoFloat, b: f64) -> TwoFloat {
    let q0 = a.hi() / b;
    let r = a - TwoFloat::from(q0) * b;
    TwoFloat::from(q0) + r.hi() / b
}

/// Square root refined by one Newton step.
fn sqrt_extended(a: TwoFloat) -> TwoFloat {
    let s0 = a.hi().sqrt();
    if s0 == 0.0 {
        return TwoFloat::from(0.0);
    }
    let s = TwoFloat::from(s0);
    s + (a - s * s).hi() / (2.0 * s0)
}

/// `e^a` by scaling and squaring a Taylor series.
fn exp_extended(a: f64) -> TwoFloat {
    let mut squarings = 0;
    let mut r = a;
    while r.abs() > 1.0 / 16.0 {
        r /= 2.0;
        squarings += 1;
    }
    let r = TwoFloat::from(r);
    let mut term = TwoFloat::from(1.0);
    let mut sum = TwoFloat::from(1.0);
    for k in 1..30 {
        term = div_extended(term * r, k as f64);
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// Hermite functions up to the common factor `pi^{-1/4} e^{-x^2/2}`.
fn hermite_extended(x: f64, count: usize) -> Vec<TwoFloat> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let xd = TwoFloat::from(x);
    let mut prev = TwoFloat::from(0.0);
    let mut cur = TwoFloat::from(1.0);
    out.push(cur);
    for k in 1..count {
        let kf = k as f64;
        let a = sqrt_extended(div_extended(TwoFloat::from(2.0), kf));
        let b = sqrt_extended(div_extended(TwoFloat::from(kf - 1.0), kf));
        let next = a * xd * cur - b * prev;
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// Mehler kernel in `x.len()` dimensions (product of 1D kernels).
pub fn mehler_kernel(t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(LabError::DimensionMismatch {
            what: "Mehler point dimension",
            expected: x.len(),
            found: y.len(),
        });
    }
    precondition(!x.is_empty(), || {
        "Mehler kernel needs dimension >= 1".into()
    })?;
    x.iter()
        .zip(y)
        .try_fold(1.0, |acc, (&a, &b)| Ok(acc * mehler_1d(t, a, b)?))
}

/// Mehler kernel sampled on a grid.
pub fn mehler_table(grid: &Grid1D, t: f64) -> Result<KernelTable> {
    precondition(t > 0.0, || format!("t must be positive, got {t}"))?;
    let x = grid.nodes();
    let values = DMatrix::from_fn(x.len(), x.len(), |i, j| {
        mehler_1d(t, x[i], x[j]).expect("t > 0")
    });
    Ok(KernelTable {
        t,
        values,
        nodes: x.to_vec(),
        weights: grid.weights().to_vec(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianFit {
    pub c: f64,
    pub constant: f64,
    /// `(x, y, t)` attaining the maximum.
    pub worst_pair: (f64, f64, f64),
}

/// `C = max p_t(x,y) V(x, sqrt t) exp(c d(x,y)^2 / t)` over resolved entries.
pub fn gaussian_bound_fit(table: &KernelTable, geometry: &Geometry, c: f64) -> Result<GaussianFit> {
    precondition(c > 0.0, || {
        format!("decay rate c must be positive, got {c}")
    })?;
    let t = table.t;
    let floor = NOISE_FLOOR * table.values.amax();
    let x = &table.nodes;
    let mut best = (0.0, (x[0], x[0], t));
    for i in 0..x.len() {
        let v = geometry.volume(x[i], t.sqrt());
        for j in 0..x.len() {
            let p = table.values[(i, j)];
            if p.abs() <= floor {
                continue;
            }
            let d = geometry.distance(x[i], x[j]);
            let val = p.abs() * v * (c * d * d / t).exp();
            if val > best.0 {
                best = (val, (x[i], x[j], t));
            }
        }
    }
    Ok(GaussianFit {
        c,
        constant: best.0,
        worst_pair: best.1,
    })
}

#[derive(Clone, Debug)]
pub struct GaussianSweep {
    pub fits: Vec<GaussianFit>,
    /// `max C / min C` over the sweep.
    pub spread: f64,
    pub uniform: bool,
    /// Constants grow monotonically as `t` decreases.
    pub growing: bool,
}

/// Fits every table at decay rate `c` and flags non-uniformity.
pub fn gaussian_fit_sweep(
    tables: &[KernelTable],
    geometry: &Geometry,
    c: f64,
) -> Result<GaussianSweep> {
    let fits: Vec<GaussianFit> = tables
        .par_iter()
        .map(|tb| gaussian_bound_fit(tb, geometry, c))
        .collect::<Result<_>>()?;
    let cs: Vec<f64> = fits.iter().map(|f| f.constant).collect();
    let max = cs.iter().copied().fold(0.0, f64::max);
    let min = cs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut order: Vec<usize> = (0..fits.len()).collect();
    order.sort_by(|&a, &b| fits[a].worst_pair.2.total_cmp(&fits[b].worst_pair.2));
    let growing = order.windows(2).all(|w| cs[w[0]] >= cs[w[1]]) && max > UNIFORMITY_FACTOR * min;
    let spread = max / min;
    Ok(GaussianSweep {
        fits,
        spread,
        uniform: spread <= UNIFORMITY_FACTOR,
        growing,
    })
}

#[derive(Clone, Debug)]
pub struct LiYauReport {
    pub t: f64,
    pub c_trial: f64,
    /// Smallest `c` for which `p_t >= exp(-c d^2/t) / (C V(x, sqrt t))` holds on
    /// the resolved pairs with `d > 0`.
    pub c_low: f64,
    pub worst_pair: Option<(f64, f64)>,
    /// Pairs `(i, j)` where no `c` works: pinned nodes, negative resolved kernel,
    /// or a diagonal entry below `1/(C V)`.
    pub failures: Vec<(usize, usize)>,
    pub unresolved: usize,
}

impl LiYauReport {
    pub fn holds(&self) -> bool {
        self.failures.is_empty() && self.c_low.is_finite()
    }
}

/// Lower Gaussian fit for `W = 0` models.
pub fn liyau_lower_fit(
    model: &ModelOperator,
    table: &KernelTable,
    c_trial: f64,
) -> Result<LiYauReport> {
    if model.has_potential() {
        return Err(LabError::Unsupported(
            "the lower Gaussian estimate is only audited for W = 0".into(),
        ));
    }
    precondition(c_trial > 0.0, || {
        format!("prefactor must be positive, got {c_trial}")
    })?;
    let t = table.t;
    let geometry = model.geometry();
    let free = model.free_nodes();
    let floor = NOISE_FLOOR * table.values.amax();
    let x = &table.nodes;
    let mut c_low: f64 = 0.0;
    let mut worst = None;
    let mut failures = Vec::new();
    let mut unresolved = 0;
    for i in 0..x.len() {
        let v = geometry.volume(x[i], t.sqrt());
        for j in 0..x.len() {
            if !(free[i] && free[j]) {
                failures.push((i, j));
                continue;
            }
            let p = table.values[(i, j)];
            if p.abs() <= floor {
                unresolved += 1;
                continue;
            }
            if p < 0.0 {
                failures.push((i, j));
                continue;
            }
            let d = geometry.distance(x[i], x[j]);
            let s = p * c_trial * v;
            if s >= 1.0 {
                continue;
            }
            if d == 0.0 {
                failures.push((i, j));
                continue;
            }
            let need = -s.ln() * t / (d * d);
            if need > c_low {
                c_low = need;
                worst = Some((x[i], x[j]));
            }
        }
    }
    Ok(LiYauReport {
        t,
        c_trial,
        c_low,
        worst_pair: worst,
        failures,
        unresolved,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnDiagonalFit {
    pub constant: f64,
    pub m: f64,
}

/// Fits `max_x p_t(x,x) <= C t^{-m/2}` by log-log regression.
pub fn fit_on_diagonal(ts: &[f64], diag_max: &[f64]) -> Result<OnDiagonalFit> {
    precondition(ts.len() >= 4, || {
        format!("on-diagonal regression needs >= 4 points, got {}", ts.len())
    })?;
    if ts.len() != diag_max.len() {
        return Err(LabError::DimensionMismatch {
            what: "on-diagonal values",
            expected: ts.len(),
            found: diag_max.len(),
        });
    }
    precondition(ts.iter().all(|&t| t > 0.0 && t <= 1.0), || {
        "t-sweep must lie in (0, 1]".into()
    })?;
    precondition(diag_max.iter().all(|&v| v > 0.0), || {
        "diagonal values must be positive".into()
    })?;
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = diag_max.iter().map(|v| v.ln()).collect();
    let (slope, _) = linear_fit(&lx, &ly);
    let m = -2.0 * slope;
    let constant = ts
        .iter()
        .zip(diag_max)
        .map(|(t, v)| v * t.powf(m / 2.0))
        .fold(0.0, f64::max);
    Ok(OnDiagonalFit { constant, m })
}

/// On-diagonal fit of the spectral heat kernel.
pub fn on_diagonal_fit(e: &EigenSystem, ts: &[f64]) -> Result<OnDiagonalFit> {
    let phi = e.vectors();
    let sq = phi.component_mul(phi);
    let diag: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let decay =
                DVector::from_iterator(e.n_modes(), e.lambdas_sq().iter().map(|l| (-t * l).exp()));
            (&sq * decay).max()
        })
        .collect();
    fit_on_diagonal(ts, &diag)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrigoryanValue {
    pub t: f64,
    pub value: f64,
    /// `value * t * V(y, sqrt t)`.
    pub ratio: f64,
}

/// `sum_e omega_e |D_x p_t(., y)|_e^2 exp(c0 d(x_e, y)^2 / t)` for the node `y`.
pub fn grigoryan_integral(
    model: &ModelOperator,
    e: &EigenSystem,
    t: f64,
    c0: f64,
    y: usize,
) -> Result<GrigoryanValue> {
    precondition(t > 0.0 && c0 > 0.0, || {
        format!("need t, c0 > 0, got t={t}, c0={c0}")
    })?;
    precondition(y < e.n_nodes(), || format!("node {y} out of range"))?;
    let phi = e.vectors();
    let coeffs = DVector::from_iterator(
        e.n_modes(),
        e.lambdas_sq()
            .iter()
            .enumerate()
            .map(|(k, l)| (-t * l).exp() * phi[(y, k)]),
    );
    let column = phi * coeffs;
    let grad = model.gradient().apply(column.as_slice());
    let floor = NOISE_FLOOR * grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let geometry = model.geometry();
    let xy = model.grid().nodes()[y];
    let value: f64 = grad
        .iter()
        .zip(model.edge_points())
        .zip(model.edge_weights())
        .filter(|((g, _), _)| g.abs() > floor)
        .map(|((g, xe), w)| {
            let d = geometry.distance(xe, xy);
            w * g * g * (c0 * d * d / t).exp()
        })
        .sum();
    let v = geometry.volume(xy, t.sqrt());
    Ok(GrigoryanValue {
        t,
        value,
        ratio: value * t * v,
    })
}

/// Grigor'yan integral of the Mehler kernel at `y`, from the closed-form
/// `x`-derivative and the grid quadrature. Each term is formed in log space,
/// so short times do not overflow.
pub fn grigoryan_mehler(grid: &Grid1D, t: f64, c0: f64, y: f64) -> Result<GrigoryanValue> {
    precondition(t > 0.0 && c0 > 0.0, || {
        format!("need t, c0 > 0, got t={t}, c0={c0}")
    })?;
    let th = t.tanh();
    let log_pre = -0.5 * (2.0 * std::f64::consts::PI * (2.0 * t).sinh()).ln();
    let value: f64 = grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .map(|(&x, &w)| {
            let (s, d) = (x + y, x - y);
            let slope = -th * s / 2.0 - d / (2.0 * th);
            if slope == 0.0 {
                return 0.0;
            }
            let log_p = log_pre - th * s * s / 4.0 - d * d / (4.0 * th);
            w * (2.0 * (log_p + slope.abs().ln()) + c0 * d * d / t).exp()
        })
        .sum();
    Ok(GrigoryanValue {
        t,
        value,
        ratio: value * t * Geometry::Line.volume(y, t.sqrt()),
    })
}

/// `max_y sum_i w_i exp(-c d(x_i, y)^2 / h) / V(y, sqrt h)`.
pub fn gaussian_mass_check(geometry: &Geometry, grid: &Grid1D, h: f64, c: f64) -> Result<f64> {
    precondition(h > 0.0 && c > 0.0, || {
        format!("need h, c > 0, got h={h}, c={c}")
    })?;
    let x = grid.nodes();
    let w = grid.weights();
    Ok(x.par_iter()
        .map(|&y| {
            let s: f64 = x
                .iter()
                .zip(w)
                .map(|(&xi, wi)| {
                    let d = geometry.distance(xi, y);
                    wi * (-c * d * d / h).exp()
                })
                .sum();
            s / geometry.volume(y, h.sqrt())
        })
        .reduce(|| 0.0, f64::max))
}

/// `sqrt(t) (||D e^{-tL}||_{p->p} + ||sqrt(W) e^{-tL}||_{p->p})` over `ts`.
pub fn regularity_scan(
    model: &ModelOperator,
    e: &EigenSystem,
    p: f64,
    ts: &[f64],
    how: Combination,
) -> Result<SweepTable> {
    let cfg = OpNormConfig::default();
    let rows: Vec<SweepRow> = ts
        .par_iter()
        .map(|&t| {
            precondition(t > 0.0, || format!("t must be positive, got {t}"))?;
            let heat = heat_operator_real(e, t)?;
            let b = gradient_pair_norm(model, &heat, p, how, &cfg)?;
            Ok(SweepRow {
                param: t,
                bounds: b.scale(t.sqrt()),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable::from_rows(rows))
}

/// `sqrt(t) max_k lambda_k e^{-t lambda_k^2}`: the `p = 2` square-sum value.
pub fn regularity_closed_form(e: &EigenSystem, t: f64) -> NormBounds {
    let v = e
        .lambdas_sq()
        .iter()
        .map(|&l| (t * l).sqrt() * (-t * l).exp())
        .fold(0.0, f64::max);
    NormBounds::exact(v, NormMethod::ClosedForm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{circle_model, eigensystem, Interval};

    #[test]
    fn series_matches_closed_form_far_off_diagonal() {
        let exact = mehler_1d(0.25, 3.0, -3.0).unwrap();
        let series = mehler_series(0.25, 3.0, -3.0, 201).unwrap();
        assert!(exact < 1e-15);
        assert!(
            (series - exact).abs() < 1e-10 * exact,
            "{series:e} vs {exact:e}"
        );
        assert!(mehler_series(0.25, 30.0, 0.0, 10).is_err());
    }

    #[test]
    fn mehler_origin_value() {
        let t: f64 = 0.7;
        let want = (2.0 * std::f64::consts::PI * (2.0 * t).sinh()).powf(-0.5);
        assert!((mehler_1d(t, 0.0, 0.0).unwrap() - want).abs() < 1e-15);
        assert!(mehler_1d(0.0, 0.0, 0.0).is_err());
        let two = mehler_kernel(t, &[0.3, -0.2], &[1.0, 0.5]).unwrap();
        let prod = mehler_1d(t, 0.3, 1.0).unwrap() * mehler_1d(t, -0.2, 0.5).unwrap();
        assert!((two - prod).abs() < 1e-16);
    }

    #[test]
    fn on_diagonal_needs_four_points() {
        assert!(fit_on_diagonal(&[0.1, 0.2, 0.4], &[1.0, 0.8, 0.6]).is_err());
    }

    #[test]
    fn liyau_rejects_potentials() {
        let m =
            crate::models::dirichlet_interval_model(20, Interval::new(-1.0, 1.0).unwrap(), |x| {
                x * x
            })
            .unwrap();
        let e = eigensystem(&m).unwrap();
        let tb = heat_kernel_table(&e, m.grid(), 0.1).unwrap();
        assert!(matches!(
            liyau_lower_fit(&m, &tb, 4.0),
            Err(LabError::Unsupported(_))
        ));
    }

    #[test]
    fn long_time_circle_kernel_is_flat() {
        let m = circle_model(32).unwrap();
        let e = eigensystem(&m).unwrap();
        let tb = heat_kernel_table(&e, m.grid(), 50.0).unwrap();
        let c = 1.0 / (2.0 * std::f64::consts::PI);
        assert!(tb.values.iter().all(|v| (v - c).abs() < 1e-12));
    }
}
