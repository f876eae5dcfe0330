//! One library entry point per experiment type, plus the PASS/FLAG checks
//! reported for it.

use bernstein_lab::bernstein::{
    diverges, lp_lq_sweep, max_bernstein_ratio, max_reverse_ratio, psi_equivalence_audit,
    semiclassical_reverse_scan, semiclassical_scan, OptimizerConfig, RatioReport, ScanDirection,
    SpectralBand,
};
use bernstein_lab::calculus::{
    holomorphic_norm_scan, multiplier_uniformity, Combination, MultiplierSpec,
};
use bernstein_lab::kernels::{
    fit_on_diagonal, gaussian_fit_sweep, grigoryan_integral, grigoryan_mehler, heat_kernel_table,
    mehler_1d, mehler_series, mehler_table, regularity_closed_form, regularity_scan, KernelTable,
};
use bernstein_lab::models::{
    circle_model, dirichlet_interval_model, divergence_form_model, eigensystem,
    harmonic_oscillator_model, oscillator_grid, Interval, ModelOperator,
};
use bernstein_lab::numerics::EigenSystem;
use bernstein_lab::sweep::{dyadic, SweepTable};
use bernstein_lab::Result;
use sha2::{Digest, Sha256};

use crate::config::{
    Coefficient, Config, Direction, Dyadic, ExperimentConfig, Form, ModelConfig, Potential,
    ProfileConfig,
};

/// Terms of the Hermite series compared against the closed-form Mehler kernel.
pub const MEHLER_TERMS: usize = 201;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(usize),
    Num(f64),
    Text(String),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) => write!(f, "{v:e}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: String,
    pub pass: bool,
}

fn check(name: &str, measured: f64, threshold: &str, pass: bool) -> Check {
    Check {
        name: name.to_string(),
        measured,
        threshold: threshold.to_string(),
        pass,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub checks: Vec<Check>,
    pub chart: Chart,
}

pub fn spec_of(p: &ProfileConfig) -> Result<MultiplierSpec> {
    match *p {
        ProfileConfig::SmoothCutoff => MultiplierSpec::smooth_cutoff(),
        ProfileConfig::Bump { center, radius } => MultiplierSpec::bump(center, radius),
        ProfileConfig::TailStep { lo, hi } => MultiplierSpec::tail_step(lo, hi),
        ProfileConfig::PowerDecay { beta } => MultiplierSpec::power_decay(beta),
        ProfileConfig::Zero => Ok(MultiplierSpec::zero()),
    }
}

pub fn build_model(m: &ModelConfig) -> Result<ModelOperator> {
    match m {
        ModelConfig::Circle { n } => circle_model(*n),
        ModelConfig::Dirichlet {
            n,
            interval,
            potential,
        } => {
            let iv = Interval::new(interval[0], interval[1])?;
            match *potential {
                Potential::Zero => dirichlet_interval_model(*n, iv, |_| 0.0),
                Potential::Constant { value } => dirichlet_interval_model(*n, iv, move |_| value),
                Potential::Quadratic { scale } => {
                    dirichlet_interval_model(*n, iv, move |x| scale * x * x)
                }
            }
        }
        ModelConfig::Oscillator { modes } => {
            harmonic_oscillator_model(*modes, oscillator_grid(*modes)?)
        }
        ModelConfig::Divergence {
            n,
            interval,
            coefficient,
        } => {
            let iv = Interval::new(interval[0], interval[1])?;
            match coefficient {
                Coefficient::Unit => divergence_form_model(*n, iv, |_| 1.0),
                Coefficient::Quadratic { scale } => {
                    let s = *scale;
                    divergence_form_model(*n, iv, move |x| 1.0 + s * x * x)
                }
                Coefficient::Piecewise { values } => {
                    let (a, len, cells) = (iv.a, iv.length(), values.len());
                    divergence_form_model(*n, iv, |x| {
                        let i = (((x - a) / len) * cells as f64).floor().max(0.0) as usize;
                        values[i.min(cells - 1)]
                    })
                }
            }
        }
    }
}

fn combination(f: Form) -> Combination {
    match f {
        Form::Sum => Combination::Sum,
        Form::Stacked => Combination::Stacked,
    }
}

fn grid(r: Dyadic) -> Vec<f64> {
    dyadic(r.lo, r.hi)
}

/// First 16 hex digits of the SHA-256 of the little-endian coefficients.
pub fn alpha_hash(r: &RatioReport) -> String {
    let mut h = Sha256::new();
    for v in r.alpha.iter().chain(r.alpha_imag.iter().flatten()) {
        h.update(v.to_le_bytes());
    }
    h.finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn chart(title: String, x: &str, y: &str, series: Vec<Series>) -> Chart {
    Chart {
        title,
        x_label: x.to_string(),
        y_label: y.to_string(),
        series,
    }
}

fn bounds_series(rows: &[(f64, f64, f64)]) -> Vec<Series> {
    vec![
        Series {
            label: "lower".into(),
            points: rows.iter().map(|r| (r.0, r.1)).collect(),
        },
        Series {
            label: "upper".into(),
            points: rows.iter().map(|r| (r.0, r.2)).collect(),
        },
    ]
}

fn sweep_rows(t: &SweepTable) -> Vec<(f64, f64, f64)> {
    t.rows
        .iter()
        .map(|r| (r.param, r.bounds.lower, r.bounds.upper))
        .collect()
}

fn sweep_outcome(
    param: &'static str,
    table: &SweepTable,
    title: String,
    checks: Vec<Check>,
) -> Outcome {
    let data = sweep_rows(table);
    Outcome {
        columns: vec![param, "lower", "upper"],
        rows: data
            .iter()
            .map(|r| vec![Cell::Num(r.0), Cell::Num(r.1), Cell::Num(r.2)])
            .collect(),
        checks,
        chart: chart(title, param, "norm", bounds_series(&data)),
    }
}

fn finiteness(table: &SweepTable) -> Check {
    check("supremum finite", table.sup, "< inf", table.is_finite())
}

fn no_divergence(table: &SweepTable) -> Check {
    check(
        "last value below 2x sweep median",
        table.last() / table.median(),
        "< 2",
        !diverges(table),
    )
}

/// Band index of `N`: the degree on the circle, the eigenindex elsewhere.
fn band_index(c: &ModelConfig, n: usize) -> usize {
    if c.is_circle() {
        2 * n
    } else {
        n
    }
}

pub fn run(config: &Config, seed: u64) -> Result<Outcome> {
    let model = build_model(&config.model)?;
    let e = eigensystem(&model)?;
    let mut opt = OptimizerConfig {
        seed,
        ..OptimizerConfig::default()
    };
    if let Some(r) = config.run.restarts {
        opt.restarts = r;
    }
    if let Some(m) = config.run.max_iters {
        opt.max_iters = m;
    }
    let mc = &config.model;
    let label = format!("{} on {}", config.experiment.name(), mc.name());
    match &config.experiment {
        ExperimentConfig::Bernstein { p, n, form } => {
            let mut rows = Vec::new();
            let mut data = Vec::new();
            let mut values = Vec::new();
            for &deg in n {
                let r = max_bernstein_ratio(
                    &model,
                    &e,
                    band_index(mc, deg),
                    *p,
                    combination(*form),
                    &opt,
                )?;
                rows.push(vec![
                    Cell::Int(deg),
                    Cell::Num(r.lambda_n),
                    Cell::Num(r.ratio.lower),
                    Cell::Num(r.ratio.upper),
                    Cell::Text(alpha_hash(&r)),
                ]);
                data.push((deg as f64, r.ratio.lower, r.ratio.upper));
                values.push(r.ratio.lower);
            }
            let mut checks = vec![check(
                "ratios finite",
                values.iter().copied().fold(0.0, f64::max),
                "< inf",
                values.iter().all(|v| v.is_finite()),
            )];
            if mc.is_circle() && p.is_infinite() {
                let worst = values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
                checks.push(check(
                    "classical constant",
                    worst,
                    "ratio in [0.99, 1.02]",
                    values.iter().all(|v| (0.99..=1.02).contains(v)),
                ));
            }
            if *p == 2.0 && *form == Form::Stacked {
                let worst = values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
                checks.push(check(
                    "square-sum maximum is 1",
                    worst,
                    "|ratio - 1| <= 1e-12",
                    worst <= 1e-12,
                ));
            }
            Ok(Outcome {
                columns: vec![
                    "N",
                    "lambda_N",
                    "ratio_lower",
                    "ratio_upper",
                    "argmax_alpha_hash",
                ],
                rows,
                checks,
                chart: chart(label, "N", "ratio", bounds_series(&data)),
            })
        }
        ExperimentConfig::Reverse {
            q,
            n,
            k_factor,
            form,
            complex,
        } => {
            opt.complex = *complex;
            let mut rows = Vec::new();
            let mut data = Vec::new();
            let mut values = Vec::new();
            for &deg in n {
                let k = deg * k_factor;
                let band = if mc.is_circle() {
                    SpectralBand::circle_tail(deg, k, &e)?
                } else {
                    SpectralBand::tail(deg, k, &e)?
                };
                let r = max_reverse_ratio(&model, &e, band, *q, combination(*form), &opt)?;
                rows.push(vec![
                    Cell::Int(deg),
                    Cell::Int(k),
                    Cell::Num(r.lambda_n),
                    Cell::Num(r.ratio.lower),
                    Cell::Num(r.ratio.upper),
                    Cell::Text(alpha_hash(&r)),
                ]);
                data.push((deg as f64, r.ratio.lower, r.ratio.upper));
                values.push(r.ratio.lower);
            }
            let mut checks = vec![check(
                "variation across N",
                spread(&values),
                "< 2",
                spread(&values) < 2.0,
            )];
            if *q == 2.0 {
                let worst = values.iter().copied().fold(0.0, f64::max);
                checks.push(check(
                    "spectral bound",
                    worst,
                    "<= 1 + 1e-10",
                    worst <= 1.0 + 1e-10,
                ));
            }
            Ok(Outcome {
                columns: vec![
                    "N",
                    "K",
                    "lambda_N",
                    "ratio_lower",
                    "ratio_upper",
                    "argmax_alpha_hash",
                ],
                rows,
                checks,
                chart: chart(label, "N", "ratio", bounds_series(&data)),
            })
        }
        ExperimentConfig::Lplq { p, q, n, m_dim } => {
            let indices: Vec<usize> = n.iter().map(|&d| band_index(mc, d)).collect();
            let s = lp_lq_sweep(&model, &e, &indices, *p, *q, *m_dim, &opt)?;
            let mut rows = Vec::new();
            let mut points = Vec::new();
            for (deg, r) in n.iter().zip(&s.reports) {
                let rep = &r.report;
                rows.push(vec![
                    Cell::Int(*deg),
                    Cell::Num(rep.lambda_n),
                    Cell::Num(r.exponent),
                    Cell::Num(rep.ratio.lower),
                    Cell::Num(rep.ratio.upper),
                    Cell::Num(rep.unnormalized()),
                    Cell::Text(alpha_hash(rep)),
                ]);
                points.push((rep.lambda_n, rep.unnormalized()));
            }
            let inv = |v: f64| if v.is_infinite() { 0.0 } else { 1.0 / v };
            let expected = 1.0 + m_dim * (inv(*p) - inv(*q)).abs();
            let tol = if q.is_infinite() { 0.15 } else { 0.1 };
            let checks = vec![check(
                &format!("growth exponent {expected}"),
                s.slope,
                &format!("slope within {tol} of {expected}"),
                (s.slope - expected).abs() <= tol,
            )];
            Ok(Outcome {
                columns: vec![
                    "N",
                    "lambda_N",
                    "exponent",
                    "ratio_lower",
                    "ratio_upper",
                    "unnormalized",
                    "argmax_alpha_hash",
                ],
                rows,
                checks,
                chart: chart(
                    label,
                    "lambda_N",
                    "maximum",
                    vec![Series {
                        label: "maximum".into(),
                        points,
                    }],
                ),
            })
        }
        ExperimentConfig::Semiclassical {
            p,
            profile,
            h,
            form,
        } => {
            let spec = spec_of(profile)?;
            let t = semiclassical_scan(&model, &e, &spec, *p, &grid(*h), combination(*form))?;
            let checks = vec![finiteness(&t), no_divergence(&t)];
            Ok(sweep_outcome(
                "h",
                &t,
                format!("{label}, {}", spec.name()),
                checks,
            ))
        }
        ExperimentConfig::SemiclassicalReverse { q, profile, h } => {
            let spec = spec_of(profile)?;
            let s = semiclassical_reverse_scan(&model, &e, &spec, *q, &grid(*h), seed)?;
            let checks = vec![
                finiteness(&s.table),
                no_divergence(&s.table),
                check(
                    "direct samples below bound",
                    s.direct_max(),
                    "<= sup",
                    s.direct_max() <= s.table.sup * (1.0 + 1e-10),
                ),
            ];
            let data = sweep_rows(&s.table);
            let mut series = bounds_series(&data);
            series.push(Series {
                label: "direct".into(),
                points: data.iter().zip(&s.direct).map(|(r, d)| (r.0, *d)).collect(),
            });
            Ok(Outcome {
                columns: vec!["h", "lower", "upper", "direct"],
                rows: data
                    .iter()
                    .zip(&s.direct)
                    .map(|(r, d)| {
                        vec![
                            Cell::Num(r.0),
                            Cell::Num(r.1),
                            Cell::Num(r.2),
                            Cell::Num(*d),
                        ]
                    })
                    .collect(),
                checks,
                chart: chart(format!("{label}, {}", spec.name()), "h", "norm", series),
            })
        }
        ExperimentConfig::KernelAudit { t, c, c0 } => {
            kernel_audit(mc, &model, &e, &grid(*t), *c, *c0, label)
        }
        ExperimentConfig::Regularity { p, t, form } => {
            let ts = grid(*t);
            let table = regularity_scan(&model, &e, *p, &ts, combination(*form))?;
            let mut checks = vec![finiteness(&table)];
            if *p == 2.0 && (*form == Form::Stacked || !model.has_potential()) {
                let dev = table
                    .rows
                    .iter()
                    .map(|r| (r.bounds.upper - regularity_closed_form(&e, r.param).upper).abs())
                    .fold(0.0, f64::max);
                checks.push(check("closed form at p = 2", dev, "<= 1e-10", dev <= 1e-10));
                let cap = (2.0 * std::f64::consts::E).powf(-0.5);
                checks.push(check(
                    "below (2e)^(-1/2)",
                    table.sup,
                    "<= 0.4289",
                    table.sup <= cap + 1e-12,
                ));
            }
            Ok(sweep_outcome("t", &table, label, checks))
        }
        ExperimentConfig::MultiplierUniformity { q, profile, h } => {
            let spec = spec_of(profile)?;
            let hs = grid(*h);
            let table = multiplier_uniformity(&e, &spec, *q, &hs)?;
            let mut checks = vec![finiteness(&table)];
            if *q == 2.0 {
                let want = hs
                    .iter()
                    .flat_map(|h| e.lambdas_sq().iter().map(move |l| h * l))
                    .map(|x| spec.psi(x).abs())
                    .fold(0.0, f64::max);
                let dev = (table.sup - want).abs();
                checks.push(check(
                    "q = 2 equals max |psi|",
                    dev,
                    "<= 1e-12",
                    dev <= 1e-12,
                ));
            }
            Ok(sweep_outcome(
                "h",
                &table,
                format!("{label}, {}", spec.name()),
                checks,
            ))
        }
        ExperimentConfig::Holomorphic { q, theta, t } => {
            let s = holomorphic_norm_scan(&e, *theta, *q, &grid(*t))?;
            let mut checks = vec![check(
                "fitted constant finite",
                s.fitted_c,
                "< inf",
                s.fitted_c.is_finite(),
            )];
            if *q == 2.0 {
                let worst = s
                    .table
                    .rows
                    .iter()
                    .map(|r| r.bounds.upper)
                    .fold(0.0, f64::max);
                checks.push(check("contraction at q = 2", worst, "<= 1", worst <= 1.0));
            }
            Ok(sweep_outcome(
                "t",
                &s.table,
                format!("{label}, theta = {theta}"),
                checks,
            ))
        }
        ExperimentConfig::Equivalence {
            p,
            first,
            second,
            h,
            direction,
        } => {
            let (a, b) = (spec_of(first)?, spec_of(second)?);
            let dir = match direction {
                Direction::Forward => ScanDirection::Forward,
                Direction::Reverse => ScanDirection::Reverse,
            };
            let audit = psi_equivalence_audit(&model, &e, &a, &b, *p, &grid(*h), dir)?;
            let checks = vec![
                check(
                    "both scans finite",
                    audit.ratio,
                    "ratio in (0, inf)",
                    audit.both_finite,
                ),
                check(
                    "no scan diverges",
                    audit.diverging.iter().filter(|d| **d).count() as f64,
                    "0 diverging",
                    !audit.diverging.iter().any(|d| *d),
                ),
            ];
            let (fa, fb) = (sweep_rows(&audit.first), sweep_rows(&audit.second));
            let rows = fa
                .iter()
                .zip(&fb)
                .map(|(x, y)| {
                    vec![
                        Cell::Num(x.0),
                        Cell::Num(x.1),
                        Cell::Num(x.2),
                        Cell::Num(y.1),
                        Cell::Num(y.2),
                    ]
                })
                .collect();
            let series = vec![
                Series {
                    label: a.name(),
                    points: fa.iter().map(|r| (r.0, r.2)).collect(),
                },
                Series {
                    label: b.name(),
                    points: fb.iter().map(|r| (r.0, r.2)).collect(),
                },
            ];
            Ok(Outcome {
                columns: vec![
                    "h",
                    "first_lower",
                    "first_upper",
                    "second_lower",
                    "second_upper",
                ],
                rows,
                checks,
                chart: chart(label, "h", "norm", series),
            })
        }
    }
}

fn kernel_audit(
    mc: &ModelConfig,
    model: &ModelOperator,
    e: &EigenSystem,
    ts: &[f64],
    c: f64,
    c0: f64,
    label: String,
) -> Result<Outcome> {
    let oscillator = matches!(mc, ModelConfig::Oscillator { .. });
    let tables: Vec<KernelTable> = ts
        .iter()
        .map(|&t| {
            if oscillator {
                mehler_table(model.grid(), t)
            } else {
                heat_kernel_table(e, model.grid(), t)
            }
        })
        .collect::<Result<_>>()?;
    let g = gaussian_fit_sweep(&tables, model.geometry(), c)?;
    let y = model.n_nodes() / 2;
    let yx = model.grid().nodes()[y];
    let grig: Vec<f64> = ts
        .iter()
        .map(|&t| {
            if oscillator {
                grigoryan_mehler(model.grid(), t, c0, yx).map(|v| v.ratio)
            } else {
                grigoryan_integral(model, e, t, c0, y).map(|v| v.ratio)
            }
        })
        .collect::<Result<_>>()?;
    let diag: Vec<f64> = tables.iter().map(|tb| tb.diagonal_max()).collect();
    let on_diag = fit_on_diagonal(ts, &diag)?;
    let mehler_err: Vec<f64> = if oscillator {
        ts.iter()
            .map(|&t| mehler_series_error(t))
            .collect::<Result<_>>()?
    } else {
        vec![f64::NAN; ts.len()]
    };
    let mut checks = vec![
        check(
            "Gaussian constant uniform",
            g.spread,
            "max/min <= 2",
            g.uniform,
        ),
        check(
            "Grigor'yan ratio uniform",
            spread(&grig),
            "max/min <= 2",
            spread(&grig) <= 2.0,
        ),
        check(
            "on-diagonal exponent",
            on_diag.m,
            "m in [0.95, 1.05]",
            (on_diag.m - 1.0).abs() <= 0.05,
        ),
    ];
    if oscillator {
        let worst = mehler_err.iter().copied().fold(0.0, f64::max);
        checks.push(check(
            "Mehler series agreement",
            worst,
            "<= 1e-8",
            worst <= 1e-8,
        ));
    }
    let rows = ts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            vec![
                Cell::Num(t),
                Cell::Num(g.fits[i].constant),
                Cell::Num(grig[i]),
                Cell::Num(diag[i]),
                Cell::Num(mehler_err[i]),
            ]
        })
        .collect();
    let series = vec![
        Series {
            label: "gaussian constant".into(),
            points: ts
                .iter()
                .zip(&g.fits)
                .map(|(t, f)| (*t, f.constant))
                .collect(),
        },
        Series {
            label: "grigoryan ratio".into(),
            points: ts.iter().copied().zip(grig.iter().copied()).collect(),
        },
    ];
    Ok(Outcome {
        columns: vec![
            "t",
            "gaussian_constant",
            "grigoryan_ratio",
            "diagonal_max",
            "mehler_series_error",
        ],
        rows,
        checks,
        chart: chart(label, "t", "constant", series),
    })
}

/// Largest gap between the Hermite series and the closed-form Mehler kernel
/// on the 61 x 61 grid of `[-3, 3]^2`, relative to the kernel maximum. The
/// series keeps at least [`MEHLER_TERMS`] terms and enough for
/// `e^{-2kt} < e^{-40}`.
pub fn mehler_series_error(t: f64) -> Result<f64> {
    let terms = MEHLER_TERMS.max((20.0 / t).ceil() as usize);
    let xs: Vec<f64> = (0..61).map(|i| -3.0 + 0.1 * i as f64).collect();
    let (mut gap, mut peak): (f64, f64) = (0.0, 0.0);
    for &x in &xs {
        for &y in &xs {
            let exact = mehler_1d(t, x, y)?;
            let series = mehler_series(t, x, y, terms)?;
            gap = gap.max((series - exact).abs());
            peak = peak.max(exact);
        }
    }
    Ok(gap / peak)
}
