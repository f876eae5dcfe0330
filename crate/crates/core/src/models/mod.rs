//! Discretized model operators `L = D^T D + W` on 1D geometries.
//!
//! Every model carries a gradient factor `D` (nodes to edges, or to nodes for
//! the oscillator) with edge weights `omega` such that
//! `diag(w) L = D^T diag(omega) D + diag(w W)` on admissible functions, so the
//! discrete quadratic-form identity holds to rounding.

pub mod grid;
pub mod hermite;

use nalgebra::{DMatrix, DVector};

pub use grid::{Boundary, Geometry, Grid1D, Interval};

use crate::error::{precondition, LabError, Result};
use crate::numerics::{eig_sym_tridiag, EigenSystem, SparseMatrix, SymTridiag};

/// Tolerance for checking closed-form eigendata against the operator.
pub const EXACT_EIGS_TOLERANCE: f64 = 1e-8;

/// Largest admissible tail mass of the top Hermite function outside the grid.
pub const HERMITE_LEAK_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Circle,
    Dirichlet,
    Oscillator,
    Divergence,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Circle => "circle",
            ModelKind::Dirichlet => "dirichlet",
            ModelKind::Oscillator => "oscillator",
            ModelKind::Divergence => "divergence",
        }
    }
}

/// Linear map on grid functions.
#[derive(Clone, Debug)]
pub enum LinearOp {
    Sparse(SparseMatrix),
    Dense(DMatrix<f64>),
}

impl LinearOp {
    pub fn nrows(&self) -> usize {
        match self {
            LinearOp::Sparse(s) => s.nrows(),
            LinearOp::Dense(d) => d.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            LinearOp::Sparse(s) => s.ncols(),
            LinearOp::Dense(d) => d.ncols(),
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        match self {
            LinearOp::Sparse(s) => s.mul_vec(u),
            LinearOp::Dense(d) => (d * DVector::from_column_slice(u)).as_slice().to_vec(),
        }
    }

    /// `self * m`.
    pub fn compose(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            LinearOp::Sparse(s) => s.mul_dense(m),
            LinearOp::Dense(d) => d * m,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            LinearOp::Sparse(s) => s.to_dense(),
            LinearOp::Dense(d) => d.clone(),
        }
    }
}

/// Closed-form eigendata of a model.
#[derive(Clone, Debug)]
pub struct ExactEigs {
    pub lambdas_sq: Vec<f64>,
    pub vectors: Option<DMatrix<f64>>,
}

/// Hermite representation of the oscillator.
#[derive(Clone, Debug)]
pub struct HermiteData {
    /// Number of modes `K` kept in the eigensystem.
    pub modes: usize,
    /// Grid samples of `h_0..h_K` (K+1 columns).
    pub table: DMatrix<f64>,
    pub derivative: DMatrix<f64>,
    pub position: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct ModelOperator {
    kind: ModelKind,
    grid: Grid1D,
    geometry: Geometry,
    stiffness: LinearOp,
    gradient: LinearOp,
    edge_weights: Vec<f64>,
    potential: Vec<f64>,
    free: Vec<bool>,
    exact: Option<ExactEigs>,
    hermite: Option<HermiteData>,
}

impl ModelOperator {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn stiffness(&self) -> &LinearOp {
        &self.stiffness
    }

    pub fn gradient(&self) -> &LinearOp {
        &self.gradient
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.edge_weights
    }

    /// Positions of the gradient outputs: edge midpoints, or nodes for the
    /// oscillator.
    pub fn edge_points(&self) -> Vec<f64> {
        let x = self.grid.nodes();
        match self.kind {
            ModelKind::Oscillator => x.to_vec(),
            ModelKind::Circle => {
                let h = self.grid.spacing();
                x.iter().map(|v| v + 0.5 * h).collect()
            }
            ModelKind::Dirichlet | ModelKind::Divergence => {
                x.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect()
            }
        }
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn sqrt_potential(&self) -> Vec<f64> {
        self.potential.iter().map(|w| w.sqrt()).collect()
    }

    pub fn has_potential(&self) -> bool {
        self.potential.iter().any(|&w| w > 0.0)
    }

    /// `false` at pinned (Dirichlet boundary) nodes.
    pub fn free_nodes(&self) -> &[bool] {
        &self.free
    }

    pub fn exact_eigs(&self) -> Option<&ExactEigs> {
        self.exact.as_ref()
    }

    pub fn hermite(&self) -> Option<&HermiteData> {
        self.hermite.as_ref()
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.len()
    }

    /// Zeroes pinned entries.
    pub fn restrict(&self, u: &mut [f64]) {
        for (v, &f) in u.iter_mut().zip(&self.free) {
            if !f {
                *v = 0.0;
            }
        }
    }

    /// `sum omega |Du|^2 + sum w W |u|^2`.
    pub fn form_energy(&self, u: &[f64]) -> f64 {
        let du = self.gradient.apply(u);
        let grad: f64 = du
            .iter()
            .zip(&self.edge_weights)
            .map(|(d, w)| w * d * d)
            .sum();
        let pot: f64 = u
            .iter()
            .zip(self.grid.weights())
            .zip(&self.potential)
            .map(|((v, w), p)| w * p * v * v)
            .sum();
        grad + pot
    }

    /// `u^T diag(w) L u`.
    pub fn stiffness_energy(&self, u: &[f64]) -> f64 {
        let lu = self.stiffness.apply(u);
        lu.iter()
            .zip(u)
            .zip(self.grid.weights())
            .map(|((a, b), w)| w * a * b)
            .sum()
    }

    /// Largest entry of `diag(w) L - D^T diag(omega) D - diag(w W)` over free
    /// nodes, relative to the largest entry of `diag(w) L`. The oscillator is
    /// checked in Hermite coefficient space.
    pub fn factorization_defect(&self) -> f64 {
        if let Some(h) = &self.hermite {
            let k = h.modes;
            let n = h.derivative.transpose() * &h.derivative + h.position.transpose() * &h.position;
            let mut worst: f64 = 0.0;
            for i in 0..k {
                for j in 0..k {
                    let want = if i == j { 2.0 * i as f64 + 1.0 } else { 0.0 };
                    worst = worst.max((n[(i, j)] - want).abs());
                }
            }
            return worst / (2.0 * k as f64 - 1.0);
        }
        let w = self.grid.weights();
        let l = self.stiffness.to_dense();
        let d = self.gradient.to_dense();
        let mut dtd = d.transpose()
            * DMatrix::from_diagonal(&DVector::from_column_slice(&self.edge_weights))
            * &d;
        for i in 0..w.len() {
            dtd[(i, i)] += w[i] * self.potential[i];
        }
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..w.len() {
            for j in 0..w.len() {
                if !(self.free[i] && self.free[j]) {
                    continue;
                }
                let wl = w[i] * l[(i, j)];
                scale = scale.max(wl.abs());
                worst = worst.max((wl - dtd[(i, j)]).abs());
            }
        }
        worst / scale.max(f64::MIN_POSITIVE)
    }
}

/// Periodic second difference on `n` nodes of a circle of length `2 pi`.
pub fn circle_model(n: usize) -> Result<ModelOperator> {
    circle_model_with(n, 2.0 * std::f64::consts::PI)
}

pub fn circle_model_with(n: usize, circumference: f64) -> Result<ModelOperator> {
    precondition(n >= 8, || format!("circle model needs n >= 8, got {n}"))?;
    let grid = Grid1D::periodic(n, circumference)?;
    let h = grid.spacing();
    let inv_h = 1.0 / h;
    let inv_h2 = inv_h * inv_h;
    let d = SparseMatrix::from_triplets(
        n,
        n,
        (0..n).flat_map(|e| [(e, e, -inv_h), (e, (e + 1) % n, inv_h)]),
    );
    let l = SparseMatrix::from_triplets(
        n,
        n,
        (0..n).flat_map(|i| {
            [
                (i, i, 2.0 * inv_h2),
                (i, (i + n - 1) % n, -inv_h2),
                (i, (i + 1) % n, -inv_h2),
            ]
        }),
    );
    let exact = circle_exact_eigs(n, circumference);
    Ok(ModelOperator {
        kind: ModelKind::Circle,
        geometry: Geometry::Circle { circumference },
        stiffness: LinearOp::Sparse(l),
        gradient: LinearOp::Sparse(d),
        edge_weights: vec![h; n],
        potential: vec![0.0; n],
        free: vec![true; n],
        exact: Some(exact),
        hermite: None,
        grid,
    })
}

/// Discrete Fourier eigenbasis, ascending: constant, then `(cos, sin)` pairs
/// of frequency `k`, then the alternating mode when `n` is even.
fn circle_exact_eigs(n: usize, circumference: f64) -> ExactEigs {
    let h = circumference / n as f64;
    let tau = 2.0 * std::f64::consts::PI;
    let eig = |k: usize| {
        let s = (k as f64 * std::f64::consts::PI / n as f64).sin();
        4.0 / (h * h) * s * s
    };
    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    let c0 = 1.0 / circumference.sqrt();
    let c1 = (2.0 / circumference).sqrt();
    values.push(0.0);
    vectors.column_mut(0).fill(c0);
    let mut col = 1;
    for k in 1..=(n - 1) / 2 {
        let lam = eig(k);
        for i in 0..n {
            let phase = tau * (k * i % n) as f64 / n as f64;
            vectors[(i, col)] = c1 * phase.cos();
            vectors[(i, col + 1)] = c1 * phase.sin();
        }
        values.push(lam);
        values.push(lam);
        col += 2;
    }
    if n.is_multiple_of(2) {
        values.push(eig(n / 2));
        for i in 0..n {
            vectors[(i, col)] = if i % 2 == 0 { c0 } else { -c0 };
        }
    }
    ExactEigs {
        lambdas_sq: values,
        vectors: Some(vectors),
    }
}

/// `-u'' + W u` on `interval` with Dirichlet ends and `n` interior nodes.
pub fn dirichlet_interval_model(
    n: usize,
    interval: Interval,
    potential: impl Fn(f64) -> f64,
) -> Result<ModelOperator> {
    interval_model(ModelKind::Dirichlet, n, interval, &|_| 1.0, &potential)
}

/// `-(c u')'` on `interval` with Dirichlet ends; `c` is sampled at edge midpoints.
pub fn divergence_form_model(
    n: usize,
    interval: Interval,
    c: impl Fn(f64) -> f64,
) -> Result<ModelOperator> {
    interval_model(ModelKind::Divergence, n, interval, &c, &|_| 0.0)
}

fn interval_model(
    kind: ModelKind,
    n: usize,
    interval: Interval,
    c: &dyn Fn(f64) -> f64,
    potential: &dyn Fn(f64) -> f64,
) -> Result<ModelOperator> {
    precondition(n >= 2, || {
        format!("interval model needs n >= 2 interior nodes, got {n}")
    })?;
    let grid = Grid1D::dirichlet(n, interval)?;
    let h = grid.spacing();
    let x = grid.nodes().to_vec();
    let m = n + 2;

    let coef: Vec<f64> = (0..=n).map(|e| c(0.5 * (x[e] + x[e + 1]))).collect();
    if let Some(e) = coef.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(LabError::Precondition(format!(
            "coefficient not elliptic on edge {e} (midpoint {}): c = {}",
            0.5 * (x[e] + x[e + 1]),
            coef[e]
        )));
    }
    let pot: Vec<f64> = x.iter().map(|&xi| potential(xi)).collect();
    for i in 1..=n {
        if !(pot[i].is_finite() && pot[i] >= 0.0) {
            return Err(LabError::Precondition(format!(
                "potential must be finite and >= 0: W({}) = {} at node {i}",
                x[i], pot[i]
            )));
        }
    }
    let pot: Vec<f64> = pot
        .iter()
        .map(|v| if v.is_finite() { v.max(0.0) } else { 0.0 })
        .collect();

    let d = SparseMatrix::from_triplets(
        n + 1,
        m,
        (0..=n).flat_map(|e| {
            let s = coef[e].sqrt() / h;
            [(e, e, -s), (e, e + 1, s)]
        }),
    );
    let inv_h2 = 1.0 / (h * h);
    let l = SparseMatrix::from_triplets(
        m,
        m,
        (1..=n).flat_map(|i| {
            let mut t = vec![(i, i, (coef[i - 1] + coef[i]) * inv_h2 + pot[i])];
            if i > 1 {
                t.push((i, i - 1, -coef[i - 1] * inv_h2));
            }
            if i < n {
                t.push((i, i + 1, -coef[i] * inv_h2));
            }
            t
        }),
    );

    let mut free = vec![true; m];
    free[0] = false;
    free[m - 1] = false;

    let c_const = coef.iter().all(|&v| v == coef[0]);
    let w_const = pot[1..=n].iter().all(|&v| v == pot[1]);
    let exact = (c_const && w_const).then(|| {
        let lambdas_sq = (1..=n)
            .map(|k| {
                let s = (k as f64 * std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin();
                coef[0] * 4.0 * inv_h2 * s * s + pot[1]
            })
            .collect();
        ExactEigs {
            lambdas_sq,
            vectors: None,
        }
    });

    Ok(ModelOperator {
        kind,
        geometry: Geometry::Interval(interval),
        stiffness: LinearOp::Sparse(l),
        gradient: LinearOp::Sparse(d),
        edge_weights: vec![h; n + 1],
        potential: pot,
        free,
        exact,
        hermite: None,
        grid,
    })
}

/// Harmonic oscillator `-u'' + x^2 u` in the span of `h_0..h_{K-1}`,
/// tabulated on a whole-line grid.
pub fn harmonic_oscillator_model(k_modes: usize, grid: Grid1D) -> Result<ModelOperator> {
    precondition(k_modes >= 4, || {
        format!("oscillator needs K >= 4, got {k_modes}")
    })?;
    precondition(grid.boundary() == Boundary::WholeLine, || {
        "oscillator needs a whole-line grid".into()
    })?;
    let x_max = grid.x_max();
    let leak = hermite::tail_mass(k_modes, x_max);
    if leak > HERMITE_LEAK_TOLERANCE {
        return Err(LabError::TruncationLeak {
            mass: leak,
            tolerance: HERMITE_LEAK_TOLERANCE,
        });
    }
    let xs = grid.nodes().to_vec();
    let w = grid.weights().to_vec();
    let table = hermite::hermite_table(&xs, k_modes + 1);
    let dl = hermite::derivative_ladder(k_modes);
    let xl = hermite::position_ladder(k_modes);

    let basis = table.columns(0, k_modes).into_owned();
    // coefficient map u -> H^T diag(w) u
    let mut analysis = basis.transpose();
    for j in 0..analysis.ncols() {
        analysis.column_mut(j).scale_mut(w[j]);
    }
    let gradient = &table * &dl * &analysis;
    let spectrum: Vec<f64> = (0..k_modes).map(|k| 2.0 * k as f64 + 1.0).collect();
    let stiffness =
        &basis * DMatrix::from_diagonal(&DVector::from_vec(spectrum.clone())) * &analysis;

    let n = xs.len();
    Ok(ModelOperator {
        kind: ModelKind::Oscillator,
        geometry: Geometry::Line,
        stiffness: LinearOp::Dense(stiffness),
        gradient: LinearOp::Dense(gradient),
        edge_weights: w,
        potential: xs.iter().map(|x| x * x).collect(),
        free: vec![true; n],
        exact: Some(ExactEigs {
            lambdas_sq: spectrum,
            vectors: Some(basis),
        }),
        hermite: Some(HermiteData {
            modes: k_modes,
            table,
            derivative: dl,
            position: xl,
        }),
        grid,
    })
}

/// Default oscillator grid for `K` modes: `x_max = sqrt(2K+1) + 6`, spacing
/// at most `0.05`.
pub fn oscillator_grid(k_modes: usize) -> Result<Grid1D> {
    let x_max = (2.0 * k_modes as f64 + 1.0).sqrt() + 6.0;
    let m = (2.0 * x_max / 0.05).ceil() as usize + 1;
    Grid1D::whole_line(m, x_max)
}

/// Ascending eigenvalues and weighted-orthonormal eigenvectors of the model.
pub fn eigensystem(model: &ModelOperator) -> Result<EigenSystem> {
    let w = model.grid.weights().to_vec();
    match model.kind {
        ModelKind::Circle | ModelKind::Oscillator => {
            let exact = model.exact.as_ref().expect("closed-form eigendata");
            let vectors = exact.vectors.clone().expect("closed-form vectors");
            validate_residuals(model, &exact.lambdas_sq, &vectors)?;
            EigenSystem::new(exact.lambdas_sq.clone(), vectors, w)
        }
        ModelKind::Dirichlet | ModelKind::Divergence => {
            let n = model.n_nodes() - 2;
            let l = match &model.stiffness {
                LinearOp::Sparse(s) => s,
                LinearOp::Dense(_) => unreachable!("interval models are sparse"),
            };
            let diag: Vec<f64> = (1..=n).map(|i| l.get(i, i)).collect();
            let off: Vec<f64> = (1..n).map(|i| l.get(i, i + 1)).collect();
            let pairs = eig_sym_tridiag(&SymTridiag::new(diag, off)?)?;
            let h = model.grid.spacing();
            let scale = 1.0 / h.sqrt();
            let mut vectors = DMatrix::zeros(n + 2, n);
            for k in 0..n {
                // fix the sign so the first nonzero entry is positive
                let col = pairs.vectors.column(k);
                let sign = col
                    .iter()
                    .find(|v| v.abs() > 1e-8)
                    .map_or(1.0, |v| v.signum());
                for i in 0..n {
                    vectors[(i + 1, k)] = sign * scale * col[i];
                }
            }
            if let Some(exact) = &model.exact {
                for (k, (got, want)) in pairs.values.iter().zip(&exact.lambdas_sq).enumerate() {
                    if (got - want).abs() > EXACT_EIGS_TOLERANCE * want.abs().max(1.0) {
                        return Err(LabError::Validation(format!(
                            "eigenvalue {k}: computed {got} vs closed form {want}"
                        )));
                    }
                }
            }
            let values = pairs.values.iter().map(|&v| v.max(0.0)).collect();
            EigenSystem::new(values, vectors, w)
        }
    }
}

fn validate_residuals(model: &ModelOperator, values: &[f64], vectors: &DMatrix<f64>) -> Result<()> {
    let lv = model.stiffness.compose(vectors);
    for (k, &lam) in values.iter().enumerate() {
        let res = (lv.column(k) - vectors.column(k) * lam).amax();
        let scale = vectors.column(k).amax() * (1.0 + lam);
        if res > EXACT_EIGS_TOLERANCE * scale {
            return Err(LabError::Validation(format!(
                "closed-form eigenpair {k} has residual {res:e}"
            )));
        }
    }
    Ok(())
}
