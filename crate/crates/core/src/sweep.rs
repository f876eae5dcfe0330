//! Parameter sweeps of operator-norm quantities.

use crate::numerics::NormBounds;

/// `2^lo, 2^(lo+1), ..., 2^hi`.
pub fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(k)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub bounds: NormBounds,
}

/// A sweep with its supremum (over upper bounds) and the argmax parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub sup: f64,
    pub argmax: f64,
}

impl SweepTable {
    pub fn from_rows(rows: Vec<SweepRow>) -> Self {
        let mut sup = f64::NEG_INFINITY;
        let mut argmax = f64::NAN;
        for r in &rows {
            if r.bounds.upper > sup {
                sup = r.bounds.upper;
                argmax = r.param;
            }
        }
        if rows.is_empty() {
            sup = 0.0;
        }
        Self { rows, sup, argmax }
    }

    pub fn sup_lower(&self) -> f64 {
        self.rows.iter().map(|r| r.bounds.lower).fold(0.0, f64::max)
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.bounds.upper).collect()
    }

    pub fn median(&self) -> f64 {
        median(&self.values())
    }

    /// Value at the last sweep parameter.
    pub fn last(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.bounds.upper)
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().all(|r| r.bounds.upper.is_finite())
    }
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// `|a - b| / max(|a|, |b|)`.
pub fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::NormMethod;

    #[test]
    fn sup_and_argmax() {
        let rows = [1.0, 3.0, 2.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| SweepRow {
                param: i as f64,
                bounds: NormBounds::exact(v, NormMethod::ClosedForm),
            })
            .collect();
        let t = SweepTable::from_rows(rows);
        assert_eq!(t.sup, 3.0);
        assert_eq!(t.argmax, 1.0);
        assert_eq!(t.median(), 2.0);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 * v - 2.0).collect();
        let (s, c) = linear_fit(&x, &y);
        assert!((s - 1.5).abs() < 1e-14 && (c + 2.0).abs() < 1e-14);
        assert_eq!(dyadic(-1, 1), vec![0.5, 1.0, 2.0]);
    }
}
