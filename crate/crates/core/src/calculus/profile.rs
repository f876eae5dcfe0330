//! Multiplier profiles `psi` and the tabulated Fourier transform of
//! `psi_e(x) = psi(x) e^{2x}`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{precondition, LabError, Result};

/// Spacing of the tabulated transform.
pub const TABLE_SPACING: f64 = 0.0125;
/// Default half-width of the tabulated frequency window.
pub const TABLE_XI_MAX: f64 = 200.0;
/// Oversampling of the spatial quadrature relative to the Nyquist rate.
pub const OVERSAMPLING: f64 = 16.0;
/// Exact phase recomputation period of the rotation recurrence.
const RESYNC: usize = 128;

/// `exp(-1/u)` for `u > 0`, else 0.
fn flat(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `y <= 0`, 1 for `y >= 1`.
pub fn smooth_step(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y >= 1.0 {
        1.0
    } else {
        let a = flat(y);
        a / (a + flat(1.0 - y))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    /// `exp(1 - 1/(1 - y^2))`, `y = (x - center)/radius`; peak value 1.
    Bump {
        center: f64,
        radius: f64,
    },
    /// 1 on `[0, 1]`, 0 on `[2, inf)`, extended evenly.
    SmoothCutoff,
    /// 0 on `[0, lo]`, 1 on `[hi, inf)`.
    TailStep {
        lo: f64,
        hi: f64,
    },
    /// `x^beta e^{-x}` on `[0, inf)`.
    PowerDecay {
        beta: f64,
    },
    Zero,
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Bump { center, radius } => {
                let y = (x - center) / radius;
                if y.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - y * y)).exp()
                } else {
                    0.0
                }
            }
            Profile::SmoothCutoff => smooth_step(2.0 - x.abs()),
            Profile::TailStep { lo, hi } => smooth_step((x - lo) / (hi - lo)),
            Profile::PowerDecay { beta } => {
                if x <= 0.0 {
                    if beta == 0.0 && x == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    x.powf(beta) * (-x).exp()
                }
            }
            Profile::Zero => 0.0,
        }
    }

    /// Closed support, when compact.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            Profile::Bump { center, radius } => Some((center - radius, center + radius)),
            Profile::SmoothCutoff => Some((-2.0, 2.0)),
            Profile::Zero => Some((0.0, 0.0)),
            _ => None,
        }
    }

    /// `sup_{x >= 0} |psi(x)|`.
    pub fn sup_abs(&self) -> f64 {
        match *self {
            Profile::Bump { center, .. } => {
                if center >= 0.0 {
                    1.0
                } else {
                    self.eval(0.0)
                }
            }
            Profile::SmoothCutoff | Profile::TailStep { .. } => 1.0,
            Profile::PowerDecay { beta } => {
                if beta == 0.0 {
                    1.0
                } else {
                    beta.powf(beta) * (-beta).exp()
                }
            }
            Profile::Zero => 0.0,
        }
    }

    /// Largest `x0 >= 0` with `psi = 0` on `[0, x0]`, if positive.
    pub fn vanishing_radius(&self) -> Option<f64> {
        let r = match *self {
            Profile::Bump { center, radius } => center - radius,
            Profile::TailStep { lo, .. } => lo,
            Profile::Zero => f64::INFINITY,
            _ => 0.0,
        };
        (r > 0.0).then_some(r)
    }

    /// Exponent `beta` in `psi(x) = O(x^beta)` at 0, when known.
    pub fn order_at_zero(&self) -> f64 {
        match *self {
            Profile::PowerDecay { beta } => beta,
            Profile::SmoothCutoff => 0.0,
            _ if self.vanishing_radius().is_some() => f64::INFINITY,
            _ => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Profile::Bump { center, radius } => {
                precondition(radius > 0.0 && center.is_finite(), || {
                    format!("bump needs radius > 0, got center={center}, radius={radius}")
                })
            }
            Profile::TailStep { lo, hi } => precondition(0.0 <= lo && lo < hi, || {
                format!("tail step needs 0 <= lo < hi, got lo={lo}, hi={hi}")
            }),
            Profile::PowerDecay { beta } => precondition(beta >= 0.0, || {
                format!("power decay needs beta >= 0, got {beta}")
            }),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Profile::Bump { center, radius } => format!("bump({center},{radius})"),
            Profile::SmoothCutoff => "smooth_cutoff".into(),
            Profile::TailStep { lo, hi } => format!("tail_step({lo},{hi})"),
            Profile::PowerDecay { beta } => format!("power_decay({beta})"),
            Profile::Zero => "zero".into(),
        }
    }
}

/// Samples of `\hat{psi_e}(xi) = (2 pi)^{-1/2} int psi_e(x) e^{-i x xi} dx` on
/// `xi = j * TABLE_SPACING`, `|xi| <= xi_max`.
#[derive(Clone, Debug)]
pub struct FourierTable {
    xi_max: f64,
    values: Vec<Complex64>,
    /// `C_m = max |\hat{psi_e}(xi)| (1 + |xi|)^m`, `m = 0..=8`.
    pub decay_constants: [f64; 9],
}

impl FourierTable {
    pub fn build(profile: &Profile, xi_max: f64) -> Result<Self> {
        let (lo, hi) = profile.support().ok_or_else(|| {
            LabError::Unsupported(format!("{} has no compact support", profile.name()))
        })?;
        precondition(xi_max > 0.0, || "xi_max must be positive".into())?;
        let half = (xi_max / TABLE_SPACING).round() as usize;
        let dx = PI / (OVERSAMPLING * xi_max);
        let m = (((hi - lo) / dx).ceil() as usize).max(1);
        let dx = (hi - lo) / m as f64;
        let samples: Vec<f64> = (0..=m)
            .map(|j| {
                let x = lo + j as f64 * dx;
                profile.eval(x) * (2.0 * x).exp()
            })
            .collect();
        let norm = dx / (2.0 * PI).sqrt();
        let positive: Vec<Complex64> = (0..=half)
            .into_par_iter()
            .map(|j| {
                let xi = j as f64 * TABLE_SPACING;
                let step = Complex64::from_polar(1.0, -dx * xi);
                let mut acc = Complex64::new(0.0, 0.0);
                let mut phase = Complex64::new(0.0, 0.0);
                for (i, &s) in samples.iter().enumerate() {
                    if i % RESYNC == 0 {
                        phase = Complex64::from_polar(1.0, -(lo + i as f64 * dx) * xi);
                    }
                    // endpoints vanish for compactly supported smooth profiles
                    acc += phase * s;
                    phase *= step;
                }
                acc * norm
            })
            .collect();
        let mut values = Vec::with_capacity(2 * half + 1);
        values.extend(positive[1..].iter().rev().map(|v| v.conj()));
        values.extend_from_slice(&positive);
        let mut decay_constants = [0.0; 9];
        for (j, v) in positive.iter().enumerate() {
            let xi = j as f64 * TABLE_SPACING;
            for (mexp, c) in decay_constants.iter_mut().enumerate() {
                *c = f64::max(*c, v.norm() * (1.0 + xi).powi(mexp as i32));
            }
        }
        if decay_constants.iter().any(|c| !c.is_finite()) {
            return Err(LabError::Validation(format!(
                "Fourier decay constants of {} are not finite",
                profile.name()
            )));
        }
        Ok(Self {
            xi_max: half as f64 * TABLE_SPACING,
            values,
            decay_constants,
        })
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    /// Value at `xi`, which must lie on the table lattice.
    pub fn at(&self, xi: f64) -> Result<Complex64> {
        let pos = xi / TABLE_SPACING;
        let j = pos.round();
        precondition((pos - j).abs() < 1e-6, || {
            format!("xi = {xi} is off the table lattice")
        })?;
        let half = (self.values.len() - 1) / 2;
        let idx = j as i64 + half as i64;
        if idx < 0 || idx as usize >= self.values.len() {
            return Err(LabError::Precondition(format!(
                "xi = {xi} outside the table window |xi| <= {}",
                self.xi_max
            )));
        }
        Ok(self.values[idx as usize])
    }
}

/// A profile together with its (optional) Fourier table.
#[derive(Clone, Debug)]
pub struct MultiplierSpec {
    profile: Profile,
    fourier: Option<Arc<FourierTable>>,
}

impl MultiplierSpec {
    /// Validates the profile and tabulates the transform when the support is compact.
    pub fn new(profile: Profile) -> Result<Self> {
        profile.validate()?;
        let fourier = match profile {
            Profile::Bump { .. } | Profile::SmoothCutoff => {
                Some(Arc::new(FourierTable::build(&profile, TABLE_XI_MAX)?))
            }
            _ => None,
        };
        Ok(Self { profile, fourier })
    }

    pub fn bump(center: f64, radius: f64) -> Result<Self> {
        Self::new(Profile::Bump { center, radius })
    }

    pub fn smooth_cutoff() -> Result<Self> {
        Self::new(Profile::SmoothCutoff)
    }

    pub fn tail_step(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Profile::TailStep { lo, hi })
    }

    pub fn power_decay(beta: f64) -> Result<Self> {
        Self::new(Profile::PowerDecay { beta })
    }

    pub fn zero() -> Self {
        Self {
            profile: Profile::Zero,
            fourier: None,
        }
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn psi(&self, x: f64) -> f64 {
        self.profile.eval(x)
    }

    pub fn psi_e(&self, x: f64) -> f64 {
        self.profile.eval(x) * (2.0 * x).exp()
    }

    pub fn fourier_table(&self) -> Option<&FourierTable> {
        self.fourier.as_deref()
    }

    pub fn name(&self) -> String {
        self.profile.name()
    }
}
