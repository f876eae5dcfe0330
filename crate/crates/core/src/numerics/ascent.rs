//! Projected gradient ascent on the unit sphere for ratios of weighted norms.
//!
//! The objective is `log(num(x)) - log(den(x))`, where both sides combine
//! weighted `L^p` norms of linear images of `x`. Non-smooth norms are handled by smoothing:
//! `|v| -> sqrt(v^2 + delta^2)` with `delta = smoothing * max|v|`, and
//! `L^inf` is replaced by a continuation over large finite exponents. The
//! best value of the *exact* (unsmoothed) ratio seen along the way is kept, so
//! every reported value is attained by the reported vector.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// One linear image `x -> M x` (complex when `im` is present) measured in a
/// weighted norm. `re = None` means the identity.
#[derive(Clone, Copy, Debug)]
pub struct Block<'a> {
    pub re: Option<&'a DMatrix<f64>>,
    pub im: Option<&'a DMatrix<f64>>,
    pub weights: &'a [f64],
}

impl<'a> Block<'a> {
    pub fn real(m: &'a DMatrix<f64>, weights: &'a [f64]) -> Self {
        Self {
            re: Some(m),
            im: None,
            weights,
        }
    }

    pub fn identity(weights: &'a [f64]) -> Self {
        Self {
            re: None,
            im: None,
            weights,
        }
    }

    fn apply(&self, x: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
        let xv = DVector::from_column_slice(x);
        let re = match self.re {
            Some(m) => (m * &xv).as_slice().to_vec(),
            None => x.to_vec(),
        };
        let im = self.im.map(|m| (m * &xv).as_slice().to_vec());
        (re, im)
    }

    fn pull_back(&self, g_re: &[f64], g_im: Option<&[f64]>, out: &mut [f64], scale: f64) {
        match self.re {
            Some(m) => {
                let g = m.tr_mul(&DVector::from_column_slice(g_re));
                for (o, v) in out.iter_mut().zip(g.iter()) {
                    *o += scale * v;
                }
            }
            None => {
                for (o, v) in out.iter_mut().zip(g_re) {
                    *o += scale * v;
                }
            }
        }
        if let (Some(m), Some(gi)) = (self.im, g_im) {
            let g = m.tr_mul(&DVector::from_column_slice(gi));
            for (o, v) in out.iter_mut().zip(g.iter()) {
                *o += scale * v;
            }
        }
    }

    fn dim(&self) -> usize {
        match self.re {
            Some(m) => m.ncols(),
            None => self.weights.len(),
        }
    }
}

/// How numerator norms are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Combine {
    /// `sum_b ||M_b x||`
    #[default]
    Sum,
    /// `sqrt(sum_b ||M_b x||^2)`
    SquareSum,
}

/// `log(num(x)) - log(den(x))` where each side combines weighted norms of
/// linear images of `x`.
#[derive(Clone, Debug)]
pub struct RatioProblem<'a> {
    pub numerator: Side<'a>,
    pub denominator: Side<'a>,
}

/// One side of a ratio: blocks measured in `L^exponent`, then combined.
#[derive(Clone, Debug)]
pub struct Side<'a> {
    pub blocks: Vec<Block<'a>>,
    pub exponent: f64,
    pub combine: Combine,
}

impl<'a> Side<'a> {
    pub fn single(block: Block<'a>, exponent: f64) -> Self {
        Self {
            blocks: vec![block],
            exponent,
            combine: Combine::Sum,
        }
    }

    pub fn new(blocks: Vec<Block<'a>>, exponent: f64, combine: Combine) -> Self {
        Self {
            blocks,
            exponent,
            combine,
        }
    }

    fn exact(&self, x: &[f64]) -> f64 {
        let parts: Vec<f64> = self
            .blocks
            .iter()
            .map(|b| {
                let (re, im) = b.apply(x);
                weighted_norm_complex(&re, im.as_deref(), b.weights, self.exponent)
            })
            .collect();
        combine(&parts, self.combine)
    }

    /// Smoothed value, exact value, and gradient of the smoothed value.
    fn smoothed(&self, x: &[f64], inf_exponent: f64, smoothing: f64) -> (f64, f64, Vec<f64>) {
        let parts: Vec<Smoothed> = self
            .blocks
            .iter()
            .map(|b| {
                let (re, im) = b.apply(x);
                smoothed_norm(
                    &re,
                    im.as_deref(),
                    b.weights,
                    self.exponent,
                    inf_exponent,
                    smoothing,
                )
            })
            .collect();
        let values: Vec<f64> = parts.iter().map(|p| p.value).collect();
        let exacts: Vec<f64> = parts.iter().map(|p| p.exact).collect();
        let total = combine(&values, self.combine);
        let mut grad = vec![0.0; x.len()];
        for (b, p) in self.blocks.iter().zip(&parts) {
            let scale = match self.combine {
                Combine::Sum => 1.0,
                Combine::SquareSum => p.value / total,
            };
            b.pull_back(&p.grad_re, p.grad_im.as_deref(), &mut grad, scale);
        }
        (total, combine(&exacts, self.combine), grad)
    }
}

/// Exact weighted norm of a (possibly complex) vector.
pub fn weighted_norm_complex(re: &[f64], im: Option<&[f64]>, w: &[f64], p: f64) -> f64 {
    let modulus = |i: usize| match im {
        Some(im) => re[i].hypot(im[i]),
        None => re[i].abs(),
    };
    if p.is_infinite() {
        (0..re.len()).map(modulus).fold(0.0, f64::max)
    } else if p == 1.0 {
        (0..re.len()).map(|i| w[i] * modulus(i)).sum()
    } else if p == 2.0 {
        (0..re.len())
            .map(|i| w[i] * modulus(i).powi(2))
            .sum::<f64>()
            .sqrt()
    } else {
        let m = (0..re.len()).map(modulus).fold(0.0, f64::max);
        if m == 0.0 {
            return 0.0;
        }
        m * (0..re.len())
            .map(|i| w[i] * (modulus(i) / m).powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

struct Smoothed {
    value: f64,
    exact: f64,
    grad_re: Vec<f64>,
    grad_im: Option<Vec<f64>>,
}

fn smoothed_norm(
    re: &[f64],
    im: Option<&[f64]>,
    w: &[f64],
    p: f64,
    inf_exponent: f64,
    smoothing: f64,
) -> Smoothed {
    let n = re.len();
    let exact = weighted_norm_complex(re, im, w, p);
    let modsq: Vec<f64> = (0..n)
        .map(|i| re[i] * re[i] + im.map_or(0.0, |v| v[i] * v[i]))
        .collect();
    let vmax = modsq.iter().copied().fold(0.0, f64::max).sqrt();
    let delta = smoothing * if vmax > 0.0 { vmax } else { 1.0 };
    let e = if p.is_infinite() { inf_exponent } else { p };
    let s: Vec<f64> = modsq.iter().map(|m| (m + delta * delta).sqrt()).collect();
    let smax = s.iter().copied().fold(0.0, f64::max);
    let big_s: f64 = s
        .iter()
        .zip(w)
        .map(|(si, wi)| wi * (si / smax).powf(e))
        .sum();
    let value = smax * big_s.powf(1.0 / e);
    let factor = big_s.powf(1.0 / e - 1.0);
    let mut grad_re = vec![0.0; n];
    let mut grad_im = im.map(|_| vec![0.0; n]);
    for i in 0..n {
        let dn_ds = factor * w[i] * (s[i] / smax).powf(e - 1.0);
        grad_re[i] = dn_ds * re[i] / s[i];
        if let (Some(g), Some(v)) = (grad_im.as_mut(), im) {
            g[i] = dn_ds * v[i] / s[i];
        }
    }
    Smoothed {
        value,
        exact,
        grad_re,
        grad_im,
    }
}

pub(crate) struct Evaluation {
    pub log_value: f64,
    pub grad: Vec<f64>,
    pub exact: f64,
}

impl<'a> RatioProblem<'a> {
    pub fn dim(&self) -> usize {
        self.denominator.blocks[0].dim()
    }

    /// Exact ratio at `x` (scale invariant when both sides share homogeneity).
    pub fn exact(&self, x: &[f64]) -> f64 {
        self.numerator.exact(x) / self.denominator.exact(x)
    }

    pub(crate) fn evaluate(&self, x: &[f64], inf_exponent: f64, smoothing: f64) -> Evaluation {
        let (num, num_exact, gn) = self.numerator.smoothed(x, inf_exponent, smoothing);
        let (den, den_exact, gd) = self.denominator.smoothed(x, inf_exponent, smoothing);
        let grad = gn.iter().zip(&gd).map(|(a, b)| a / num - b / den).collect();
        let log_value = if num > 0.0 && den > 0.0 {
            num.ln() - den.ln()
        } else {
            f64::NEG_INFINITY
        };
        Evaluation {
            log_value,
            grad,
            exact: num_exact / den_exact,
        }
    }
}

fn combine(parts: &[f64], how: Combine) -> f64 {
    match how {
        Combine::Sum => parts.iter().sum(),
        Combine::SquareSum => parts.iter().map(|v| v * v).sum::<f64>().sqrt(),
    }
}

/// Optimizer settings.
#[derive(Clone, Debug, PartialEq)]
pub struct AscentConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub shrink: f64,
    /// Relative smoothing of `|v|` at zero.
    pub smoothing: f64,
    /// Finite exponents standing in for `L^inf`, used in order.
    pub inf_schedule: Vec<f64>,
    /// Multipliers of `smoothing` used in order when an `L^1` norm is present.
    pub l1_schedule: Vec<f64>,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-9,
            shrink: 0.5,
            smoothing: 1e-6,
            inf_schedule: vec![16.0, 64.0, 256.0, 1024.0],
            l1_schedule: vec![1e4, 1e3, 1e2, 10.0, 1.0],
        }
    }
}

#[derive(Clone, Debug)]
pub struct AscentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub stalled: bool,
}

fn normalize(x: &mut [f64]) -> bool {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= n);
    true
}

/// Single ascent run from `start`.
pub fn ascend(problem: &RatioProblem<'_>, start: &[f64], cfg: &AscentConfig) -> AscentOutcome {
    let mut x = start.to_vec();
    if !normalize(&mut x) {
        return AscentOutcome {
            x,
            value: f64::NAN,
            iterations: 0,
            stalled: true,
        };
    }
    let uses_inf =
        problem.numerator.exponent.is_infinite() || problem.denominator.exponent.is_infinite();
    let stages: Vec<f64> = if uses_inf {
        cfg.inf_schedule.clone()
    } else {
        vec![f64::INFINITY]
    };
    let uses_one = problem.numerator.exponent == 1.0 || problem.denominator.exponent == 1.0;
    let smoothing_boost: Vec<f64> = if uses_one && !cfg.l1_schedule.is_empty() {
        cfg.l1_schedule.clone()
    } else {
        vec![1.0]
    };
    let n_stages = stages.len().max(smoothing_boost.len());
    let stages: Vec<f64> = (0..n_stages)
        .map(|i| stages[i.min(stages.len() - 1)])
        .collect();
    let per_stage = (cfg.max_iters / stages.len()).max(1);

    let mut best_x = x.clone();
    let mut best = problem.exact(&x);
    if !best.is_finite() {
        best = f64::NEG_INFINITY;
    }
    let mut iterations = 0;
    let mut stalled = false;

    for (si, &inf_exp) in stages.iter().enumerate() {
        let smoothing = cfg.smoothing * smoothing_boost[si.min(smoothing_boost.len() - 1)];
        let mut cur = problem.evaluate(&x, inf_exp, smoothing);
        let mut step = 0.1;
        for _ in 0..per_stage {
            iterations += 1;
            let radial: f64 = cur.grad.iter().zip(&x).map(|(g, v)| g * v).sum();
            let tangent: Vec<f64> = cur
                .grad
                .iter()
                .zip(&x)
                .map(|(g, v)| g - radial * v)
                .collect();
            let gnorm = tangent.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !gnorm.is_finite() || gnorm < cfg.tol {
                break;
            }
            let mut accepted = None;
            while step > 1e-14 {
                let mut trial: Vec<f64> = x
                    .iter()
                    .zip(&tangent)
                    .map(|(v, t)| v + step * t / gnorm)
                    .collect();
                if !normalize(&mut trial) {
                    break;
                }
                let ev = problem.evaluate(&trial, inf_exp, smoothing);
                if ev.log_value.is_finite()
                    && ev.log_value > cur.log_value + 1e-4 * step * gnorm * 1e-3
                {
                    accepted = Some((trial, ev));
                    break;
                }
                step *= cfg.shrink;
            }
            let Some((trial, ev)) = accepted else {
                stalled = true;
                break;
            };
            let gain = ev.log_value - cur.log_value;
            x = trial;
            cur = ev;
            if cur.exact.is_finite() && cur.exact > best {
                best = cur.exact;
                best_x.clone_from(&x);
            }
            step = (step * 2.0).min(1.0);
            if gain < cfg.tol {
                break;
            }
        }
        if cur.exact.is_finite() && cur.exact > best {
            best = cur.exact;
            best_x.clone_from(&x);
        }
    }
    AscentOutcome {
        x: best_x,
        value: best,
        iterations,
        stalled,
    }
}

#[derive(Clone, Debug)]
pub struct MultiStartOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub best_start: usize,
    pub start_values: Vec<f64>,
    pub total_iterations: usize,
    pub stalls: usize,
}

/// Runs [`ascend`] from every start in parallel and keeps the best result;
/// ties go to the lowest start index so the outcome is deterministic.
pub fn multistart(
    problem: &RatioProblem<'_>,
    starts: &[Vec<f64>],
    cfg: &AscentConfig,
) -> MultiStartOutcome {
    let runs: Vec<AscentOutcome> = starts.par_iter().map(|s| ascend(problem, s, cfg)).collect();
    let mut best_start = 0;
    for (i, r) in runs.iter().enumerate() {
        if (r.value > runs[best_start].value || !runs[best_start].value.is_finite())
            && r.value.is_finite()
        {
            best_start = i;
        }
    }
    MultiStartOutcome {
        x: runs[best_start].x.clone(),
        value: runs[best_start].value,
        best_start,
        start_values: runs.iter().map(|r| r.value).collect(),
        total_iterations: runs.iter().map(|r| r.iterations).sum(),
        stalls: runs.iter().filter(|r| r.stalled).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_largest_singular_value_direction() {
        let a = DMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5]);
        let w = [1.0; 3];
        let problem = RatioProblem {
            numerator: Side::single(Block::real(&a, &w), 2.0),
            denominator: Side::single(Block::identity(&w), 2.0),
        };
        let out = ascend(&problem, &[0.3, 0.8, 0.5], &AscentConfig::default());
        assert!((out.value - 3.0).abs() < 1e-6, "{}", out.value);
        assert!((problem.exact(&out.x) - out.value).abs() < 1e-12);
    }

    #[test]
    fn infinity_norm_ratio_via_continuation() {
        // ||A x||_inf / ||x||_1 is the max |entry|: here 4
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -4.0, 2.0, 0.5]);
        let w = [1.0; 2];
        let problem = RatioProblem {
            numerator: Side::single(Block::real(&a, &w), f64::INFINITY),
            denominator: Side::single(Block::identity(&w), 1.0),
        };
        let starts = vec![vec![1.0, 1.0], vec![1.0, 0.2], vec![-0.3, 1.0]];
        let out = multistart(&problem, &starts, &AscentConfig::default());
        assert!((out.value - 4.0).abs() < 1e-3, "{}", out.value);
    }

    #[test]
    fn smoothed_norm_gradient_matches_finite_differences() {
        let v = [0.3, -1.2, 0.7, 2.0];
        let w = [0.5, 1.0, 0.25, 2.0];
        for &p in &[1.0, 1.5, 3.0, f64::INFINITY] {
            let base = smoothed_norm(&v, None, &w, p, 32.0, 1e-6);
            for i in 0..v.len() {
                let mut vp = v;
                let mut vm = v;
                vp[i] += 1e-6;
                vm[i] -= 1e-6;
                let fd = (smoothed_norm(&vp, None, &w, p, 32.0, 1e-6).value
                    - smoothed_norm(&vm, None, &w, p, 32.0, 1e-6).value)
                    / 2e-6;
                assert!(
                    (fd - base.grad_re[i]).abs() < 1e-5,
                    "p={p} i={i}: {fd} vs {}",
                    base.grad_re[i]
                );
            }
        }
    }
}
