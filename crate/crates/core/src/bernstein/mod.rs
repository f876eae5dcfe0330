//! Bernstein-type ratios over spectral bands and their extremization.
//!
//! A band function is `u = sum_{k in band} alpha_k phi_k`. The forward ratio is
//! `(||Du||_q + ||sqrt(W) u||_q) / (lambda_N^s ||u||_p)` over the head band
//! `[0, N]`; the reverse ratio is `lambda_N ||u||_q / (||Du||_q + ||sqrt(W) u||_q)`
//! over a tail band `[N, K]`. At `p = q = 2` the square-sum form
//! `sqrt(||Du||^2 + ||sqrt(W) u||^2)` is available and solved exactly as a
//! generalized eigenproblem; every other case runs multistart ascent and is
//! reported as an interval with an operator-norm upper bound.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::calculus::{gradient_pair_norm, spectral_two_norm, Combination, MultiplierSpec};
use crate::error::{precondition, LabError, Result};
use crate::models::ModelOperator;
use crate::numerics::{
    assemble_real, eig_sym_dense, multistart, opnorm, spectral_values, weighted_norm, AscentConfig,
    Block, Combine, EigenSystem, KernelPolicy, NormBounds, NormMethod, OpNormConfig, RatioProblem,
    Side,
};
use crate::sweep::{SweepRow, SweepTable};

/// Random test functions drawn by the direct reverse check.
pub const DIRECT_SAMPLES: usize = 64;

/// A scan diverges when its last value reaches this multiple of its median.
pub const DIVERGENCE_FACTOR: f64 = 2.0;

/// Inclusive eigenindex range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpectralBand {
    pub k_lo: usize,
    pub k_hi: usize,
}

impl SpectralBand {
    pub fn new(k_lo: usize, k_hi: usize, e: &EigenSystem) -> Result<Self> {
        precondition(k_lo <= k_hi && k_hi < e.n_modes(), || {
            format!("band [{k_lo}, {k_hi}] outside 0..{}", e.n_modes())
        })?;
        Ok(Self { k_lo, k_hi })
    }

    /// `[0, N]`.
    pub fn head(n_index: usize, e: &EigenSystem) -> Result<Self> {
        Self::new(0, n_index, e)
    }

    /// `[N, K]`; needs `lambda_N > 0`.
    pub fn tail(n_index: usize, k_index: usize, e: &EigenSystem) -> Result<Self> {
        let band = Self::new(n_index, k_index, e)?;
        if e.is_kernel_mode(n_index) {
            return Err(LabError::DegenerateBand(format!(
                "tail starts at kernel mode {n_index}"
            )));
        }
        Ok(band)
    }

    /// Trigonometric polynomials of degree `<= deg` on the circle.
    pub fn circle_head(deg: usize, e: &EigenSystem) -> Result<Self> {
        Self::head(2 * deg, e)
    }

    /// Frequencies `deg <= |k| <= k_deg` on the circle.
    pub fn circle_tail(deg: usize, k_deg: usize, e: &EigenSystem) -> Result<Self> {
        precondition(deg >= 1, || "circle tail needs degree >= 1".into())?;
        Self::tail(2 * deg - 1, 2 * k_deg, e)
    }

    pub fn len(&self) -> usize {
        self.k_hi - self.k_lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Settings for the extremal search.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    /// Seeded random starts, on top of the deterministic ones.
    pub restarts: usize,
    pub max_iters: usize,
    pub shrink: f64,
    pub tol: f64,
    pub smoothing: f64,
    pub seed: u64,
    /// Complex coefficients; circle only.
    pub complex: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iters: 500,
            shrink: 0.5,
            tol: 1e-9,
            smoothing: 1e-6,
            seed: 0,
            complex: false,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        precondition(self.restarts >= 1, || "restarts must be >= 1".into())?;
        precondition(self.max_iters >= 1, || "max_iters must be >= 1".into())?;
        precondition(self.shrink > 0.0 && self.shrink < 1.0, || {
            format!("shrink must lie in (0, 1), got {}", self.shrink)
        })?;
        precondition(self.tol > 0.0 && self.smoothing > 0.0, || {
            "tol and smoothing must be positive".into()
        })
    }

    fn ascent(&self) -> AscentConfig {
        AscentConfig {
            max_iters: self.max_iters,
            tol: self.tol,
            shrink: self.shrink,
            smoothing: self.smoothing,
            ..AscentConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatioKind {
    Forward,
    Reverse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerTrace {
    pub method: NormMethod,
    pub starts: usize,
    pub best_start: usize,
    pub total_iterations: usize,
    /// Runs that ended without meeting the tolerance.
    pub stalls: usize,
    pub start_values: Vec<f64>,
}

impl OptimizerTrace {
    fn exact() -> Self {
        Self {
            method: NormMethod::SpectralGram,
            starts: 0,
            best_start: 0,
            total_iterations: 0,
            stalls: 0,
            start_values: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioReport {
    pub kind: RatioKind,
    pub ratio: NormBounds,
    /// Unit-norm extremal coefficients (real parts when complex).
    pub alpha: Vec<f64>,
    pub alpha_imag: Option<Vec<f64>>,
    pub band: SpectralBand,
    pub n_index: usize,
    pub lambda_n: f64,
    /// Power of `lambda_N` dividing (forward) or multiplying (reverse) the raw ratio.
    pub normalization: f64,
    pub p: f64,
    pub q: f64,
    pub form: Combination,
    pub trace: OptimizerTrace,
}

impl RatioReport {
    /// Best attained ratio with the `lambda_N` power removed.
    pub fn unnormalized(&self) -> f64 {
        match self.kind {
            RatioKind::Forward => self.ratio.lower * self.normalization,
            RatioKind::Reverse => self.ratio.lower / self.normalization,
        }
    }

    fn coefficients(&self) -> Vec<f64> {
        let mut x = self.alpha.clone();
        if let Some(im) = &self.alpha_imag {
            x.extend_from_slice(im);
        }
        x
    }
}

/// Grid values of a band function and its full coefficient vector in the
/// eigenbasis (for the oscillator, the Hermite expansion).
#[derive(Clone, Debug, PartialEq)]
pub struct Synthesis {
    pub values: Vec<f64>,
    pub coefficients: Vec<f64>,
}

fn check_alpha(alpha: &[f64], band: SpectralBand) -> Result<()> {
    if alpha.len() != band.len() {
        return Err(LabError::DimensionMismatch {
            what: "band coefficients",
            expected: band.len(),
            found: alpha.len(),
        });
    }
    Ok(())
}

/// `u = sum_{k in band} alpha_k phi_k`.
pub fn synthesize(e: &EigenSystem, alpha: &[f64], band: SpectralBand) -> Result<Synthesis> {
    check_alpha(alpha, band)?;
    let u = e.band_vectors(band.k_lo, band.k_hi) * DVector::from_column_slice(alpha);
    let mut coefficients = vec![0.0; e.n_modes()];
    coefficients[band.k_lo..=band.k_hi].copy_from_slice(alpha);
    Ok(Synthesis {
        values: u.as_slice().to_vec(),
        coefficients,
    })
}

/// Real and imaginary parts of `sum alpha_k phi_k` for complex `alpha`.
pub fn synthesize_complex(
    e: &EigenSystem,
    alpha_re: &[f64],
    alpha_im: &[f64],
    band: SpectralBand,
) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((
        synthesize(e, alpha_re, band)?.values,
        synthesize(e, alpha_im, band)?.values,
    ))
}

/// Band images `U = Phi_band`, `G = D U` and `V = sqrt(W) U`, doubled into
/// `[M, 0]` and `[0, M]` for complex coefficients.
struct BandOps {
    u: DMatrix<f64>,
    g: DMatrix<f64>,
    v: Option<DMatrix<f64>>,
    u_im: Option<DMatrix<f64>>,
    g_im: Option<DMatrix<f64>>,
    v_im: Option<DMatrix<f64>>,
    w: Vec<f64>,
    omega: Vec<f64>,
    lambdas_sq: Vec<f64>,
}

fn double(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (r, c) = m.shape();
    let mut re = DMatrix::zeros(r, 2 * c);
    let mut im = DMatrix::zeros(r, 2 * c);
    re.columns_mut(0, c).copy_from(m);
    im.columns_mut(c, c).copy_from(m);
    (re, im)
}

impl BandOps {
    fn new(
        model: &ModelOperator,
        e: &EigenSystem,
        band: SpectralBand,
        complex: bool,
    ) -> Result<Self> {
        if e.n_nodes() != model.n_nodes() {
            return Err(LabError::DimensionMismatch {
                what: "eigensystem nodes",
                expected: model.n_nodes(),
                found: e.n_nodes(),
            });
        }
        if complex && model.kind() != crate::models::ModelKind::Circle {
            return Err(LabError::Unsupported(format!(
                "complex coefficients are only supported on the circle, not {}",
                model.kind().name()
            )));
        }
        let u = e.band_vectors(band.k_lo, band.k_hi);
        let g = model.gradient().compose(&u);
        let v = model.has_potential().then(|| {
            let sw = model.sqrt_potential();
            let mut v = u.clone();
            for (i, s) in sw.iter().enumerate() {
                v.row_mut(i).scale_mut(*s);
            }
            v
        });
        let mut ops = Self {
            u,
            g,
            v,
            u_im: None,
            g_im: None,
            v_im: None,
            w: e.weights().to_vec(),
            omega: model.edge_weights().to_vec(),
            lambdas_sq: e.lambdas_sq()[band.k_lo..=band.k_hi].to_vec(),
        };
        if complex {
            let (ur, ui) = double(&ops.u);
            let (gr, gi) = double(&ops.g);
            ops.u = ur;
            ops.u_im = Some(ui);
            ops.g = gr;
            ops.g_im = Some(gi);
            if let Some(v) = &ops.v {
                let (vr, vi) = double(v);
                ops.v = Some(vr);
                ops.v_im = Some(vi);
            }
        }
        Ok(ops)
    }

    fn u_block(&self) -> Block<'_> {
        Block {
            re: Some(&self.u),
            im: self.u_im.as_ref(),
            weights: &self.w,
        }
    }

    fn gradient_blocks(&self) -> Vec<Block<'_>> {
        let mut blocks = vec![Block {
            re: Some(&self.g),
            im: self.g_im.as_ref(),
            weights: &self.omega,
        }];
        if let Some(v) = &self.v {
            blocks.push(Block {
                re: Some(v),
                im: self.v_im.as_ref(),
                weights: &self.w,
            });
        }
        blocks
    }

    fn dim(&self) -> usize {
        self.u.ncols()
    }

    fn m(&self) -> usize {
        self.lambdas_sq.len()
    }
}

fn combine_of(form: Combination) -> Combine {
    match form {
        Combination::Sum => Combine::Sum,
        Combination::Stacked => Combine::SquareSum,
    }
}

/// The ratio as an ascent problem plus the constant factor in front of it.
struct Setup<'a> {
    problem: RatioProblem<'a>,
    factor: f64,
}

fn setup<'a>(
    ops: &'a BandOps,
    kind: RatioKind,
    p: f64,
    q: f64,
    form: Combination,
    normalization: f64,
) -> Setup<'a> {
    let grad = Side::new(ops.gradient_blocks(), q, combine_of(form));
    match kind {
        RatioKind::Forward => Setup {
            problem: RatioProblem {
                numerator: grad,
                denominator: Side::single(ops.u_block(), p),
            },
            factor: 1.0 / normalization,
        },
        RatioKind::Reverse => Setup {
            problem: RatioProblem {
                numerator: Side::single(ops.u_block(), q),
                denominator: grad,
            },
            factor: normalization,
        },
    }
}

fn check_form(form: Combination, p: f64, q: f64) -> Result<()> {
    precondition(form == Combination::Sum || (p == 2.0 && q == 2.0), || {
        format!("the square-sum form needs p = q = 2, got p={p}, q={q}")
    })
}

fn check_exponent(x: f64) -> Result<()> {
    precondition(x >= 1.0, || format!("exponent must be >= 1, got {x}"))
}

fn lambda_at(e: &EigenSystem, n_index: usize) -> Result<f64> {
    if n_index >= e.n_modes() {
        return Err(LabError::Precondition(format!(
            "index {n_index} outside 0..{}",
            e.n_modes()
        )));
    }
    if e.is_kernel_mode(n_index) {
        return Err(LabError::DegenerateBand(format!(
            "lambda_{n_index} is zero"
        )));
    }
    Ok(e.lambda(n_index))
}

fn exact_ratio(s: &Setup<'_>, x: &[f64]) -> Result<f64> {
    let r = s.problem.exact(x);
    if !r.is_finite() {
        return Err(LabError::Precondition(
            "band function is numerically zero".into(),
        ));
    }
    Ok(s.factor * r)
}

fn inv(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// `(||Du||_p + ||sqrt(W) u||_p) / (lambda_N ||u||_p)` for `u` on `[0, N]`;
/// the square-sum form at `p = 2` with [`Combination::Stacked`].
pub fn bernstein_ratio(
    model: &ModelOperator,
    e: &EigenSystem,
    alpha: &[f64],
    n_index: usize,
    p: f64,
    form: Combination,
) -> Result<f64> {
    check_exponent(p)?;
    check_form(form, p, p)?;
    let lambda_n = lambda_at(e, n_index)?;
    let band = SpectralBand::head(n_index, e)?;
    check_alpha(alpha, band)?;
    let ops = BandOps::new(model, e, band, false)?;
    exact_ratio(
        &setup(&ops, RatioKind::Forward, p, p, form, lambda_n),
        alpha,
    )
}

/// `lambda_N ||u||_q / (||Du||_q + ||sqrt(W) u||_q)` for `u` on the tail band.
pub fn reverse_bernstein_ratio(
    model: &ModelOperator,
    e: &EigenSystem,
    alpha: &[f64],
    band: SpectralBand,
    q: f64,
    form: Combination,
) -> Result<f64> {
    check_exponent(q)?;
    check_form(form, q, q)?;
    let band = SpectralBand::tail(band.k_lo, band.k_hi, e)?;
    check_alpha(alpha, band)?;
    let lambda_n = e.lambda(band.k_lo);
    let ops = BandOps::new(model, e, band, false)?;
    exact_ratio(
        &setup(&ops, RatioKind::Reverse, q, q, form, lambda_n),
        alpha,
    )
}

/// Recomputes the ratio attained by a report's coefficients.
pub fn reevaluate(model: &ModelOperator, e: &EigenSystem, report: &RatioReport) -> Result<f64> {
    let ops = BandOps::new(model, e, report.band, report.alpha_imag.is_some())?;
    let s = setup(
        &ops,
        report.kind,
        report.p,
        report.q,
        report.form,
        report.normalization,
    );
    exact_ratio(&s, &report.coefficients())
}

/// `M^T diag(weights) M`.
fn gram(m: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let mut wm = m.clone();
    for (i, mut row) in wm.row_iter_mut().enumerate() {
        row *= weights[i];
    }
    let g = m.tr_mul(&wm);
    (&g + g.transpose()) * 0.5
}

/// Eigenpairs of `A x = mu B x`, ascending, with `B`-orthonormal vectors.
fn generalized_eig(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| LabError::Validation("band Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let li = l
        .clone()
        .try_inverse()
        .ok_or_else(|| LabError::Validation("band Gram factor is singular".into()))?;
    let c = &li * a * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let pairs = eig_sym_dense(&c)?;
    Ok((pairs.values, li.transpose() * pairs.vectors))
}

/// `max (or min) of ||[D; sqrt W] u||_2 / ||u||_2` over the band, with argmax.
fn gram_extreme(ops: &BandOps, largest: bool, blocks: GramBlocks) -> Result<(f64, Vec<f64>)> {
    let m = ops.m();
    let u = ops.u.columns(0, m).into_owned();
    let b = gram(&u, &ops.w);
    let g = ops.g.columns(0, m).into_owned();
    let mut a = DMatrix::zeros(m, m);
    if blocks != GramBlocks::PotentialOnly {
        a += gram(&g, &ops.omega);
    }
    if blocks != GramBlocks::GradientOnly {
        if let Some(v) = &ops.v {
            a += gram(&v.columns(0, m).into_owned(), &ops.w);
        }
    }
    let (values, vectors) = generalized_eig(&a, &b)?;
    let k = if largest { m - 1 } else { 0 };
    let mut x: Vec<f64> = vectors.column(k).iter().copied().collect();
    normalize(&mut x);
    Ok((values[k].max(0.0).sqrt(), x))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum GramBlocks {
    Both,
    GradientOnly,
    PotentialOnly,
}

fn normalize(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    // fix the sign so the largest entry is positive
    if let Some(i) = (0..x.len()).max_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs())) {
        if x[i] < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

fn split(x: Vec<f64>, m: usize, complex: bool) -> (Vec<f64>, Option<Vec<f64>>) {
    if complex {
        let im = x[m..].to_vec();
        let mut re = x;
        re.truncate(m);
        (re, Some(im))
    } else {
        (x, None)
    }
}

/// Deterministic starts (an eigenvector and a localized spike) followed by
/// seeded Gaussian restarts.
fn starts(ops: &BandOps, focus: usize, cfg: &OptimizerConfig) -> Vec<Vec<f64>> {
    let m = ops.m();
    let dim = ops.dim();
    let mut out = Vec::with_capacity(cfg.restarts + 2);
    let mut e_focus = vec![0.0; dim];
    e_focus[focus] = 1.0;
    out.push(e_focus);
    let node = (0..ops.u.nrows())
        .max_by(|&i, &j| ops.u[(i, focus)].abs().total_cmp(&ops.u[(j, focus)].abs()))
        .unwrap_or(0);
    let mut spike = vec![0.0; dim];
    for k in 0..m {
        spike[k] = ops.u[(node, k)];
    }
    out.push(spike);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.restarts {
        out.push((0..dim).map(|_| StandardNormal.sample(&mut rng)).collect());
    }
    out
}

/// Cheap interval settings for the band-projector upper bounds.
fn projector_norm_config() -> OpNormConfig {
    OpNormConfig {
        random_vectors: 8,
        refine_starts: 0,
        ..OpNormConfig::default()
    }
}

/// Upper bound for the forward ratio: `||(D + sqrt W) P||_{p->q} / lambda^s`
/// with `P = U U^T diag(w)` the band projector.
fn forward_upper(
    model: &ModelOperator,
    ops: &BandOps,
    p: f64,
    q: f64,
    form: Combination,
) -> Result<f64> {
    let m = ops.m();
    if p == 2.0 && q == 2.0 {
        return Ok(match (form, ops.v.is_some()) {
            (Combination::Stacked, _) | (_, false) => gram_extreme(ops, true, GramBlocks::Both)?.0,
            (Combination::Sum, true) => {
                gram_extreme(ops, true, GramBlocks::GradientOnly)?.0
                    + gram_extreme(ops, true, GramBlocks::PotentialOnly)?.0
            }
        });
    }
    let u = ops.u.columns(0, m);
    let mut utw = u.transpose();
    for (j, mut col) in utw.column_iter_mut().enumerate() {
        col *= ops.w[j];
    }
    let proj = u * &utw;
    if p == q {
        return Ok(gradient_pair_norm(model, &proj, p, form, &projector_norm_config())?.upper);
    }
    let cfg = projector_norm_config();
    let dp = ops.g.columns(0, m) * &utw;
    let mut total = opnorm(&dp, &ops.w, &ops.omega, p, q, &cfg)?.upper;
    if let Some(v) = &ops.v {
        let vp = v.columns(0, m) * &utw;
        total += opnorm(&vp, &ops.w, &ops.w, p, q, &cfg)?.upper;
    }
    Ok(total)
}

/// Upper bound for the reverse ratio. On the tail,
/// `u = A1 (Du) + A2 (sqrt(W) u)` with `A1 = U Lambda^-1 G^T diag(omega)` and
/// `A2 = U Lambda^-1 V^T diag(w)`, so the ratio is at most
/// `lambda_N max(||A1||, ||A2||)`.
/// At `q = 2` the square-sum bound also covers the sum form, which is larger.
fn reverse_upper(ops: &BandOps, q: f64, lambda_n: f64) -> Result<f64> {
    let m = ops.m();
    if q == 2.0 {
        let (mu, _) = gram_extreme(ops, false, GramBlocks::Both)?;
        return Ok(lambda_n / mu);
    }
    let mut u_inv = ops.u.columns(0, m).into_owned();
    for (k, mut col) in u_inv.column_iter_mut().enumerate() {
        col /= ops.lambdas_sq[k];
    }
    let cfg = projector_norm_config();
    let mut gt = ops.g.columns(0, m).transpose();
    for (j, mut col) in gt.column_iter_mut().enumerate() {
        col *= ops.omega[j];
    }
    let a1 = &u_inv * gt;
    let mut worst = opnorm(&a1, &ops.omega, &ops.w, q, q, &cfg)?.upper;
    if let Some(v) = &ops.v {
        let mut vt = v.columns(0, m).transpose();
        for (j, mut col) in vt.column_iter_mut().enumerate() {
            col *= ops.w[j];
        }
        let a2 = &u_inv * vt;
        worst = worst.max(opnorm(&a2, &ops.w, &ops.w, q, q, &cfg)?.upper);
    }
    Ok(lambda_n * worst)
}

fn upper_method(p: f64, q: f64) -> NormMethod {
    if p == 2.0 && q == 2.0 {
        NormMethod::SpectralGram
    } else if p == 1.0 {
        NormMethod::ColumnNorms
    } else if q.is_infinite() {
        NormMethod::DualRowNorms
    } else {
        NormMethod::RieszThorin
    }
}

struct Request {
    kind: RatioKind,
    band: SpectralBand,
    n_index: usize,
    p: f64,
    q: f64,
    form: Combination,
    normalization: f64,
}

fn extremize(
    model: &ModelOperator,
    e: &EigenSystem,
    req: Request,
    cfg: &OptimizerConfig,
) -> Result<RatioReport> {
    cfg.validate()?;
    check_exponent(req.p)?;
    check_exponent(req.q)?;
    check_form(req.form, req.p, req.q)?;
    let lambda_n = e.lambda(req.n_index);
    let ops = BandOps::new(model, e, req.band, cfg.complex)?;
    let s = setup(&ops, req.kind, req.p, req.q, req.form, req.normalization);
    let m = ops.m();
    let forward = req.kind == RatioKind::Forward;
    let single_block = ops.v.is_none() || req.form == Combination::Stacked;

    let (ratio, x, trace) = if req.p == 2.0 && req.q == 2.0 && single_block {
        let (mu, mut x) = gram_extreme(&ops, forward, GramBlocks::Both)?;
        if cfg.complex {
            x.resize(2 * m, 0.0);
        }
        let gram_value = if forward {
            mu / req.normalization
        } else {
            req.normalization / mu
        };
        let attained = exact_ratio(&s, &x)?;
        let ratio = NormBounds {
            lower: attained.min(gram_value),
            upper: attained.max(gram_value),
            method_lower: NormMethod::SpectralGram,
            method_upper: NormMethod::SpectralGram,
        };
        (ratio, x, OptimizerTrace::exact())
    } else {
        let focus = if forward { m - 1 } else { 0 };
        let starts = starts(&ops, focus, cfg);
        let out = multistart(&s.problem, &starts, &cfg.ascent());
        let attained = exact_ratio(&s, &out.x)?;
        let upper = match req.kind {
            RatioKind::Forward => {
                forward_upper(model, &ops, req.p, req.q, req.form)? / req.normalization
            }
            RatioKind::Reverse => reverse_upper(&ops, req.q, lambda_n)?,
        };
        let trace = OptimizerTrace {
            method: NormMethod::ProjectedAscent,
            starts: starts.len(),
            best_start: out.best_start,
            total_iterations: out.total_iterations,
            stalls: out.stalls,
            start_values: out.start_values.iter().map(|v| v * s.factor).collect(),
        };
        let ratio = NormBounds {
            lower: attained,
            upper: upper.max(attained),
            method_lower: NormMethod::ProjectedAscent,
            method_upper: upper_method(req.p, req.q),
        };
        (ratio, out.x, trace)
    };
    let (alpha, alpha_imag) = split(x, m, cfg.complex);
    Ok(RatioReport {
        kind: req.kind,
        ratio,
        alpha,
        alpha_imag,
        band: req.band,
        n_index: req.n_index,
        lambda_n,
        normalization: req.normalization,
        p: req.p,
        q: req.q,
        form: req.form,
        trace,
    })
}

/// Extremal forward ratio over `[0, N]`.
pub fn max_bernstein_ratio(
    model: &ModelOperator,
    e: &EigenSystem,
    n_index: usize,
    p: f64,
    form: Combination,
    cfg: &OptimizerConfig,
) -> Result<RatioReport> {
    precondition(n_index >= 1, || "N must be >= 1".into())?;
    let lambda_n = lambda_at(e, n_index)?;
    let band = SpectralBand::head(n_index, e)?;
    extremize(
        model,
        e,
        Request {
            kind: RatioKind::Forward,
            band,
            n_index,
            p,
            q: p,
            form,
            normalization: lambda_n,
        },
        cfg,
    )
}

/// Extremal reverse ratio over `[N, K]`.
pub fn max_reverse_ratio(
    model: &ModelOperator,
    e: &EigenSystem,
    band: SpectralBand,
    q: f64,
    form: Combination,
    cfg: &OptimizerConfig,
) -> Result<RatioReport> {
    let band = SpectralBand::tail(band.k_lo, band.k_hi, e)?;
    let lambda_n = e.lambda(band.k_lo);
    extremize(
        model,
        e,
        Request {
            kind: RatioKind::Reverse,
            band,
            n_index: band.k_lo,
            p: q,
            q,
            form,
            normalization: lambda_n,
        },
        cfg,
    )
}

/// Reverse maxima for the tails `[N, jN]`, `j = 2, 4, 8` (clipped to the spectrum).
#[derive(Clone, Debug)]
pub struct ReverseStability {
    pub reports: Vec<RatioReport>,
    /// `max / min` of the attained values.
    pub spread: f64,
}

pub fn reverse_stability(
    model: &ModelOperator,
    e: &EigenSystem,
    n_index: usize,
    q: f64,
    form: Combination,
    cfg: &OptimizerConfig,
) -> Result<ReverseStability> {
    let top = e.n_modes() - 1;
    let reports = [2, 4, 8]
        .iter()
        .map(|&j| {
            let band = SpectralBand::tail(n_index, (j * n_index).min(top), e)?;
            max_reverse_ratio(model, e, band, q, form, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = reports.iter().map(|r| r.ratio.lower).collect();
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ReverseStability {
        reports,
        spread: hi / lo,
    })
}

/// Whether a `(p, q)` pair is covered without a regularity hypothesis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpLqRegime {
    /// `1 <= p <= q <= 2`.
    Unconditional,
    /// Needs `(R_q)`-type regularity.
    NeedsRegularity,
}

pub fn lp_lq_regime(p: f64, q: f64) -> LpLqRegime {
    if 1.0 <= p && p <= q && q <= 2.0 {
        LpLqRegime::Unconditional
    } else {
        LpLqRegime::NeedsRegularity
    }
}

#[derive(Clone, Debug)]
pub struct LpLqReport {
    pub report: RatioReport,
    pub regime: LpLqRegime,
    pub exponent: f64,
}

/// Extremal `(||Du||_q + ||sqrt(W) u||_q) / (lambda_N^{1 + m|1/p - 1/q|} ||u||_p)` over `[0, N]`.
pub fn lp_lq_bernstein(
    model: &ModelOperator,
    e: &EigenSystem,
    n_index: usize,
    p: f64,
    q: f64,
    m_dim: f64,
    cfg: &OptimizerConfig,
) -> Result<LpLqReport> {
    precondition(n_index >= 1, || "N must be >= 1".into())?;
    precondition(m_dim > 0.0, || {
        format!("doubling dimension must be positive, got {m_dim}")
    })?;
    let lambda_n = lambda_at(e, n_index)?;
    let band = SpectralBand::head(n_index, e)?;
    let exponent = 1.0 + m_dim * (inv(p) - inv(q)).abs();
    let report = extremize(
        model,
        e,
        Request {
            kind: RatioKind::Forward,
            band,
            n_index,
            p,
            q,
            form: Combination::Sum,
            normalization: lambda_n.powf(exponent),
        },
        cfg,
    )?;
    Ok(LpLqReport {
        report,
        regime: lp_lq_regime(p, q),
        exponent,
    })
}

#[derive(Clone, Debug)]
pub struct LpLqSweep {
    pub reports: Vec<LpLqReport>,
    /// Log-log slope of the unnormalized maximum against `lambda_N`.
    pub slope: f64,
    pub intercept: f64,
}

/// [`lp_lq_bernstein`] over several `N`, with the growth exponent fitted.
pub fn lp_lq_sweep(
    model: &ModelOperator,
    e: &EigenSystem,
    n_indices: &[usize],
    p: f64,
    q: f64,
    m_dim: f64,
    cfg: &OptimizerConfig,
) -> Result<LpLqSweep> {
    precondition(n_indices.len() >= 2, || {
        "slope fit needs at least two N".into()
    })?;
    let reports = n_indices
        .iter()
        .map(|&n| lp_lq_bernstein(model, e, n, p, q, m_dim, cfg))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = reports.iter().map(|r| r.report.lambda_n.ln()).collect();
    let y: Vec<f64> = reports
        .iter()
        .map(|r| r.report.unnormalized().ln())
        .collect();
    let (slope, intercept) = crate::sweep::linear_fit(&x, &y);
    Ok(LpLqSweep {
        reports,
        slope,
        intercept,
    })
}

fn check_hs(hs: &[f64]) -> Result<()> {
    precondition(!hs.is_empty(), || "empty h sweep".into())?;
    precondition(hs.iter().all(|&h| h > 0.0 && h.is_finite()), || {
        "h must be positive".into()
    })
}

/// `sqrt(h) (||D psi(hL)||_{p->p} + ||sqrt(W) psi(hL)||_{p->p})` over `hs`.
pub fn semiclassical_scan(
    model: &ModelOperator,
    e: &EigenSystem,
    spec: &MultiplierSpec,
    p: f64,
    hs: &[f64],
    form: Combination,
) -> Result<SweepTable> {
    check_exponent(p)?;
    check_form(form, p, p)?;
    check_hs(hs)?;
    let closed = p == 2.0 && (form == Combination::Stacked || !model.has_potential());
    let cfg = OpNormConfig::default();
    let rows: Vec<SweepRow> = hs
        .par_iter()
        .map(|&h| {
            let values = spectral_values(e, |x| spec.psi(h * x), KernelPolicy::Strict)?;
            let bounds = if values.iter().all(|&v| v == 0.0) {
                NormBounds::exact(0.0, NormMethod::ClosedForm)
            } else if closed {
                let scaled: Vec<f64> = values
                    .iter()
                    .zip(e.lambdas_sq())
                    .map(|(v, &l)| v * l.max(0.0).sqrt())
                    .collect();
                spectral_two_norm(&scaled)
            } else {
                gradient_pair_norm(model, &assemble_real(e, &values), p, form, &cfg)?
            };
            Ok(SweepRow {
                param: h,
                bounds: bounds.scale(h.sqrt()),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable::from_rows(rows))
}

#[derive(Clone, Debug)]
pub struct ReverseScan {
    /// `(1/sqrt h) ||Psi(hL) L^{-1/2}||_{q->q}` per `h`.
    pub table: SweepTable,
    /// Per `h`, the largest `||Psi(hL) u||_q / (sqrt(h) (||Du||_q + ||sqrt(W) u||_q))`
    /// over the random draws.
    pub direct: Vec<f64>,
}

impl ReverseScan {
    pub fn direct_max(&self) -> f64 {
        self.direct.iter().copied().fold(0.0, f64::max)
    }
}

/// Semiclassical reverse scan of a profile vanishing at 0.
pub fn semiclassical_reverse_scan(
    model: &ModelOperator,
    e: &EigenSystem,
    spec: &MultiplierSpec,
    q: f64,
    hs: &[f64],
    seed: u64,
) -> Result<ReverseScan> {
    check_exponent(q)?;
    check_hs(hs)?;
    let profile = spec.profile();
    precondition(
        profile.vanishing_radius().is_some() || profile.order_at_zero() >= 0.5,
        || format!("{} must vanish near 0 or to order >= 1/2", spec.name()),
    )?;
    let w = e.weights();
    let omega = model.edge_weights();
    let sw = model.sqrt_potential();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<f64>> = (0..DIRECT_SAMPLES)
        .map(|_| {
            let mut u: Vec<f64> = (0..e.n_nodes())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            model.restrict(&mut u);
            u
        })
        .collect();
    let denominators: Vec<f64> = samples
        .iter()
        .map(|u| {
            let du = model.gradient().apply(u);
            let wu: Vec<f64> = u.iter().zip(&sw).map(|(a, b)| a * b).collect();
            weighted_norm(&du, omega, q) + weighted_norm(&wu, w, q)
        })
        .collect();
    let cfg = OpNormConfig::default();
    let rows: Vec<(SweepRow, f64)> = hs
        .par_iter()
        .map(|&h| {
            let psi = spectral_values(e, |x| spec.psi(h * x), KernelPolicy::RestrictToRange)?;
            let values: Vec<f64> = psi
                .iter()
                .zip(e.lambdas_sq())
                .map(|(v, &l)| if *v == 0.0 { 0.0 } else { v / l.sqrt() })
                .collect();
            let bounds = if values.iter().all(|&v| v == 0.0) {
                NormBounds::exact(0.0, NormMethod::ClosedForm)
            } else if q == 2.0 {
                spectral_two_norm(&values)
            } else {
                opnorm(&assemble_real(e, &values), w, w, q, q, &cfg)?
            };
            let psi_op = assemble_real(e, &psi);
            let direct = samples
                .iter()
                .zip(&denominators)
                .map(|(u, den)| {
                    let pu = &psi_op * DVector::from_column_slice(u);
                    weighted_norm(pu.as_slice(), w, q) / (h.sqrt() * den)
                })
                .fold(0.0, f64::max);
            Ok((
                SweepRow {
                    param: h,
                    bounds: bounds.scale(1.0 / h.sqrt()),
                },
                direct,
            ))
        })
        .collect::<Result<_>>()?;
    let (rows, direct): (Vec<SweepRow>, Vec<f64>) = rows.into_iter().unzip();
    Ok(ReverseScan {
        table: SweepTable::from_rows(rows),
        direct,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanDirection {
    Forward,
    Reverse,
}

#[derive(Clone, Debug)]
pub struct EquivalenceAudit {
    pub first: SweepTable,
    pub second: SweepTable,
    /// `sup first / sup second`.
    pub ratio: f64,
    pub both_finite: bool,
    pub diverging: [bool; 2],
}

/// Whether the last value of a scan reaches [`DIVERGENCE_FACTOR`] times its median.
pub fn diverges(table: &SweepTable) -> bool {
    !table.is_finite() || table.last() >= DIVERGENCE_FACTOR * table.median()
}

/// Runs the same scan for two profiles and compares the suprema.
pub fn psi_equivalence_audit(
    model: &ModelOperator,
    e: &EigenSystem,
    first: &MultiplierSpec,
    second: &MultiplierSpec,
    p: f64,
    hs: &[f64],
    direction: ScanDirection,
) -> Result<EquivalenceAudit> {
    for spec in [first, second] {
        precondition(spec.profile().sup_abs() > 0.0, || {
            format!("{} is trivial", spec.name())
        })?;
    }
    let scan = |spec: &MultiplierSpec| match direction {
        ScanDirection::Forward => semiclassical_scan(model, e, spec, p, hs, Combination::Sum),
        ScanDirection::Reverse => {
            semiclassical_reverse_scan(model, e, spec, p, hs, 0).map(|s| s.table)
        }
    };
    let a = scan(first)?;
    let b = scan(second)?;
    Ok(EquivalenceAudit {
        ratio: a.sup / b.sup,
        both_finite: a.is_finite() && b.is_finite() && a.sup > 0.0 && b.sup > 0.0,
        diverging: [diverges(&a), diverges(&b)],
        first: a,
        second: b,
    })
}
