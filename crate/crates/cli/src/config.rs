//! Experiment configuration: TOML with `[model]`, `[experiment]` and an
//! optional `[run]` section. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Stem of the output files; defaults to the config file stem.
    pub name: Option<String>,
    pub restarts: Option<usize>,
    pub max_iters: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    Circle {
        n: usize,
    },
    Dirichlet {
        n: usize,
        #[serde(default = "default_interval")]
        interval: [f64; 2],
        #[serde(default)]
        potential: Potential,
    },
    Oscillator {
        modes: usize,
    },
    Divergence {
        n: usize,
        #[serde(default = "default_interval")]
        interval: [f64; 2],
        #[serde(default)]
        coefficient: Coefficient,
    },
}

fn default_interval() -> [f64; 2] {
    [-4.0, 4.0]
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Potential {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `scale * x^2`.
    Quadratic {
        scale: f64,
    },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Coefficient {
    #[default]
    Unit,
    /// `1 + scale * x^2`.
    Quadratic { scale: f64 },
    /// Constant on equal cells of the interval.
    Piecewise { values: Vec<f64> },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Form {
    #[default]
    Sum,
    Stacked,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    #[default]
    Forward,
    Reverse,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileConfig {
    SmoothCutoff,
    Bump { center: f64, radius: f64 },
    TailStep { lo: f64, hi: f64 },
    PowerDecay { beta: f64 },
    Zero,
}

/// `2^lo, ..., 2^hi`.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dyadic {
    pub lo: i32,
    pub hi: i32,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentConfig {
    Bernstein {
        p: f64,
        n: Vec<usize>,
        #[serde(default)]
        form: Form,
    },
    Reverse {
        q: f64,
        n: Vec<usize>,
        #[serde(default = "default_k_factor")]
        k_factor: usize,
        #[serde(default)]
        form: Form,
        #[serde(default)]
        complex: bool,
    },
    Lplq {
        p: f64,
        q: f64,
        n: Vec<usize>,
        #[serde(default = "default_m_dim")]
        m_dim: f64,
    },
    Semiclassical {
        p: f64,
        profile: ProfileConfig,
        h: Dyadic,
        #[serde(default)]
        form: Form,
    },
    SemiclassicalReverse {
        q: f64,
        profile: ProfileConfig,
        h: Dyadic,
    },
    KernelAudit {
        t: Dyadic,
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default = "default_c0")]
        c0: f64,
    },
    Regularity {
        p: f64,
        t: Dyadic,
        #[serde(default)]
        form: Form,
    },
    MultiplierUniformity {
        q: f64,
        profile: ProfileConfig,
        h: Dyadic,
    },
    Holomorphic {
        q: f64,
        theta: f64,
        t: Dyadic,
    },
    Equivalence {
        p: f64,
        first: ProfileConfig,
        second: ProfileConfig,
        h: Dyadic,
        #[serde(default)]
        direction: Direction,
    },
}

fn default_k_factor() -> usize {
    4
}

fn default_m_dim() -> f64 {
    1.0
}

fn default_c() -> f64 {
    0.125
}

fn default_c0() -> f64 {
    0.0625
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Bernstein { .. } => "bernstein",
            Self::Reverse { .. } => "reverse",
            Self::Lplq { .. } => "lplq",
            Self::Semiclassical { .. } => "semiclassical",
            Self::SemiclassicalReverse { .. } => "semiclassical-reverse",
            Self::KernelAudit { .. } => "kernel-audit",
            Self::Regularity { .. } => "regularity",
            Self::MultiplierUniformity { .. } => "multiplier-uniformity",
            Self::Holomorphic { .. } => "holomorphic",
            Self::Equivalence { .. } => "equivalence",
        }
    }
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Circle { .. } => "circle",
            Self::Dirichlet { .. } => "dirichlet",
            Self::Oscillator { .. } => "oscillator",
            Self::Divergence { .. } => "divergence",
        }
    }

    /// Number of eigenmodes the model carries.
    pub fn modes(&self) -> usize {
        match *self {
            Self::Circle { n } | Self::Dirichlet { n, .. } | Self::Divergence { n, .. } => n,
            Self::Oscillator { modes } => modes,
        }
    }

    pub fn is_circle(&self) -> bool {
        matches!(self, Self::Circle { .. })
    }
}

/// Invalid configuration, with the offending line when known.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config error at line {l}: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Config text with its parsed form.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: Config,
    pub text: String,
    pub path: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let config = parse(&text)?;
    Ok(Loaded {
        config,
        text,
        path: path.to_path_buf(),
    })
}

pub fn parse(text: &str) -> Result<Config, ConfigError> {
    let config: Config = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    validate(&config).map_err(|(section, key, message)| ConfigError {
        line: locate(text, section, key),
        message,
    })?;
    Ok(config)
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]`.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            continue;
        }
        if current != section {
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            if k.trim() == key {
                return Some(i + 1);
            }
        }
    }
    None
}

type Invalid = (&'static str, &'static str, String);

fn fail<T>(section: &'static str, key: &'static str, message: String) -> Result<T, Invalid> {
    Err((section, key, message))
}

fn exponent(key: &'static str, v: f64) -> Result<(), Invalid> {
    if v >= 1.0 {
        Ok(())
    } else {
        fail(
            "experiment",
            key,
            format!("{key} must be >= 1 (or inf), got {v}"),
        )
    }
}

fn corner(key: &'static str, v: f64) -> Result<(), Invalid> {
    if v == 1.0 || v == 2.0 || v.is_infinite() && v > 0.0 {
        Ok(())
    } else {
        fail(
            "experiment",
            key,
            format!("{key} must be 1, 2 or inf, got {v}"),
        )
    }
}

fn dyadic(key: &'static str, r: Dyadic) -> Result<(), Invalid> {
    if r.lo > r.hi {
        return fail(
            "experiment",
            key,
            format!("{key}: lo {} exceeds hi {}", r.lo, r.hi),
        );
    }
    if r.lo < -60 || r.hi > 60 {
        return fail(
            "experiment",
            key,
            format!("{key}: exponents must lie in [-60, 60]"),
        );
    }
    Ok(())
}

fn profile(key: &'static str, p: &ProfileConfig) -> Result<(), Invalid> {
    crate::experiments::spec_of(p)
        .map(|_| ())
        .map_err(|e| ("experiment", key, format!("{key}: {e}")))
}

/// Reverse scans divide by `sqrt(h lambda)`, so the profile must vanish at 0.
fn vanishing(key: &'static str, p: &ProfileConfig) -> Result<(), Invalid> {
    let spec =
        crate::experiments::spec_of(p).map_err(|e| ("experiment", key, format!("{key}: {e}")))?;
    let pf = spec.profile();
    if pf.vanishing_radius().is_none() && pf.order_at_zero() < 0.5 {
        return fail(
            "experiment",
            key,
            format!("{key}: reverse scans need a profile vanishing at 0"),
        );
    }
    Ok(())
}

fn degrees(model: &ModelConfig, n: &[usize], factor: usize) -> Result<(), Invalid> {
    if n.is_empty() {
        return fail("experiment", "n", "N list is empty".into());
    }
    if n.contains(&0) {
        return fail("experiment", "n", "N values must be >= 1".into());
    }
    let top = n.iter().max().copied().unwrap_or(0) * factor;
    let needed = if model.is_circle() { 2 * top } else { top };
    if needed >= model.modes() {
        return fail(
            "experiment",
            "n",
            format!(
                "largest band index {needed} exceeds the {} modes of the {} model",
                model.modes(),
                model.name()
            ),
        );
    }
    Ok(())
}

fn validate(c: &Config) -> Result<(), Invalid> {
    match &c.model {
        ModelConfig::Circle { n } if *n < 8 => {
            fail("model", "n", format!("circle needs n >= 8, got {n}"))?
        }
        ModelConfig::Dirichlet { n, interval, .. }
        | ModelConfig::Divergence { n, interval, .. } => {
            if *n < 2 {
                fail(
                    "model",
                    "n",
                    format!("interval models need n >= 2, got {n}"),
                )?;
            }
            if !(interval[0] < interval[1]) || !interval.iter().all(|v| v.is_finite()) {
                fail(
                    "model",
                    "interval",
                    format!("interval must satisfy a < b, got {interval:?}"),
                )?;
            }
        }
        ModelConfig::Oscillator { modes } if *modes < 4 => fail(
            "model",
            "modes",
            format!("oscillator needs modes >= 4, got {modes}"),
        )?,
        _ => {}
    }
    if let ModelConfig::Dirichlet { potential, .. } = &c.model {
        let bad = match potential {
            Potential::Zero => false,
            Potential::Constant { value } => !(*value >= 0.0),
            Potential::Quadratic { scale } => !(*scale >= 0.0),
        };
        if bad {
            fail(
                "model",
                "potential",
                "potential must be non-negative".into(),
            )?;
        }
    }
    if let ModelConfig::Divergence { coefficient, .. } = &c.model {
        let ok = match coefficient {
            Coefficient::Unit => true,
            Coefficient::Quadratic { scale } => *scale >= 0.0,
            Coefficient::Piecewise { values } => {
                !values.is_empty() && values.iter().all(|v| *v > 0.0 && v.is_finite())
            }
        };
        if !ok {
            fail(
                "model",
                "coefficient",
                "coefficient must be positive and finite".into(),
            )?;
        }
    }
    if let Some(r) = c.run.restarts {
        if r == 0 {
            fail("run", "restarts", "restarts must be >= 1".into())?;
        }
    }
    if let Some(m) = c.run.max_iters {
        if m == 0 {
            fail("run", "max_iters", "max_iters must be >= 1".into())?;
        }
    }
    if let Some(name) = &c.run.name {
        if name.is_empty() || name.contains(['/', '\\']) {
            fail(
                "run",
                "name",
                format!("name must be a plain file stem, got {name:?}"),
            )?;
        }
    }
    match &c.experiment {
        ExperimentConfig::Bernstein { p, n, form } => {
            exponent("p", *p)?;
            if *form == Form::Stacked && *p != 2.0 {
                fail("experiment", "form", "the stacked form needs p = 2".into())?;
            }
            degrees(&c.model, n, 1)?;
        }
        ExperimentConfig::Reverse {
            q,
            n,
            k_factor,
            form,
            complex,
        } => {
            exponent("q", *q)?;
            if *form == Form::Stacked && *q != 2.0 {
                fail("experiment", "form", "the stacked form needs q = 2".into())?;
            }
            if *k_factor < 1 {
                fail("experiment", "k_factor", "k_factor must be >= 1".into())?;
            }
            if *complex && !c.model.is_circle() {
                fail(
                    "experiment",
                    "complex",
                    "complex coefficients need the circle model".into(),
                )?;
            }
            degrees(&c.model, n, *k_factor)?;
        }
        ExperimentConfig::Lplq { p, q, n, m_dim } => {
            exponent("p", *p)?;
            exponent("q", *q)?;
            if !(*m_dim > 0.0) {
                fail(
                    "experiment",
                    "m_dim",
                    format!("m_dim must be positive, got {m_dim}"),
                )?;
            }
            if n.len() < 2 {
                fail(
                    "experiment",
                    "n",
                    "the slope fit needs at least two N values".into(),
                )?;
            }
            degrees(&c.model, n, 1)?;
        }
        ExperimentConfig::Semiclassical {
            p,
            profile: pr,
            h,
            form,
        } => {
            exponent("p", *p)?;
            if *form == Form::Stacked && *p != 2.0 {
                fail("experiment", "form", "the stacked form needs p = 2".into())?;
            }
            profile("profile", pr)?;
            dyadic("h", *h)?;
        }
        ExperimentConfig::SemiclassicalReverse { q, profile: pr, h } => {
            exponent("q", *q)?;
            profile("profile", pr)?;
            vanishing("profile", pr)?;
            dyadic("h", *h)?;
        }
        ExperimentConfig::KernelAudit { t, c: rate, c0 } => {
            dyadic("t", *t)?;
            if t.hi > 0 {
                fail(
                    "experiment",
                    "t",
                    "kernel audits need t <= 1 (hi <= 0)".into(),
                )?;
            }
            if t.hi - t.lo < 3 {
                fail(
                    "experiment",
                    "t",
                    "kernel audits need at least four times".into(),
                )?;
            }
            if !(*rate > 0.0) {
                fail("experiment", "c", format!("c must be positive, got {rate}"))?;
            }
            if !(*c0 > 0.0) {
                fail("experiment", "c0", format!("c0 must be positive, got {c0}"))?;
            }
        }
        ExperimentConfig::Regularity { p, t, form } => {
            exponent("p", *p)?;
            if *form == Form::Stacked && *p != 2.0 {
                fail("experiment", "form", "the stacked form needs p = 2".into())?;
            }
            dyadic("t", *t)?;
        }
        ExperimentConfig::MultiplierUniformity { q, profile: pr, h } => {
            exponent("q", *q)?;
            profile("profile", pr)?;
            dyadic("h", *h)?;
        }
        ExperimentConfig::Holomorphic { q, theta, t } => {
            corner("q", *q)?;
            if !(theta.abs() < std::f64::consts::FRAC_PI_2) {
                fail(
                    "experiment",
                    "theta",
                    format!("|theta| must be < pi/2, got {theta}"),
                )?;
            }
            dyadic("t", *t)?;
        }
        ExperimentConfig::Equivalence {
            p,
            first,
            second,
            h,
            direction,
        } => {
            exponent("p", *p)?;
            profile("first", first)?;
            profile("second", second)?;
            dyadic("h", *h)?;
            if *direction == Direction::Reverse {
                vanishing("first", first)?;
                vanishing("second", second)?;
            }
        }
    }
    Ok(())
}
