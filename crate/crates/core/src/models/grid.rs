use crate::error::{precondition, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Dirichlet,
    WholeLine,
}

/// Closed interval `[a, b]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        precondition(a.is_finite() && b.is_finite() && a < b, || {
            format!("invalid interval [{a}, {b}]")
        })?;
        Ok(Self { a, b })
    }

    /// `[-half, half]`.
    pub fn symmetric(half: f64) -> Result<Self> {
        Self::new(-half, half)
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }
}

/// Uniform 1D grid with quadrature weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid1D {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    boundary: Boundary,
    length: f64,
}

impl Grid1D {
    /// `n` equispaced nodes `x_i = i h` on a circle, all weights `h`.
    pub fn periodic(n: usize, circumference: f64) -> Result<Self> {
        precondition(n >= 1 && circumference > 0.0, || {
            "periodic grid needs n >= 1, C > 0".into()
        })?;
        let h = circumference / n as f64;
        Ok(Self {
            nodes: (0..n).map(|i| i as f64 * h).collect(),
            weights: vec![h; n],
            boundary: Boundary::Periodic,
            length: circumference,
        })
    }

    /// `n` interior nodes plus both endpoints; weights `h` inside and `h/2`
    /// at the pinned endpoints.
    pub fn dirichlet(n: usize, interval: Interval) -> Result<Self> {
        precondition(n >= 1, || {
            "dirichlet grid needs n >= 1 interior nodes".into()
        })?;
        let h = interval.length() / (n + 1) as f64;
        let mut nodes: Vec<f64> = (0..n + 2).map(|i| interval.a + i as f64 * h).collect();
        nodes[n + 1] = interval.b;
        let mut weights = vec![h; n + 2];
        weights[0] = 0.5 * h;
        weights[n + 1] = 0.5 * h;
        Ok(Self {
            nodes,
            weights,
            boundary: Boundary::Dirichlet,
            length: interval.length(),
        })
    }

    /// `m` nodes on `[-x_max, x_max]` with trapezoid weights; the measure is
    /// that of the truncation window.
    pub fn whole_line(m: usize, x_max: f64) -> Result<Self> {
        precondition(m >= 3 && x_max > 0.0, || {
            "whole-line grid needs m >= 3, x_max > 0".into()
        })?;
        let h = 2.0 * x_max / (m - 1) as f64;
        let mut nodes: Vec<f64> = (0..m).map(|i| -x_max + i as f64 * h).collect();
        nodes[m - 1] = x_max;
        let mut weights = vec![h; m];
        weights[0] = 0.5 * h;
        weights[m - 1] = 0.5 * h;
        Ok(Self {
            nodes,
            weights,
            boundary: Boundary::WholeLine,
            length: 2.0 * x_max,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node spacing.
    pub fn spacing(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.length / self.nodes.len() as f64,
            _ => self.nodes[1] - self.nodes[0],
        }
    }

    pub fn x_max(&self) -> f64 {
        *self.nodes.last().expect("non-empty grid")
    }
}

/// Metric and ball volumes of the model geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Geometry {
    Circle { circumference: f64 },
    Interval(Interval),
    Line,
}

impl Geometry {
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Geometry::Circle { circumference } => {
                let d = (x - y).abs().rem_euclid(circumference);
                d.min(circumference - d)
            }
            _ => (x - y).abs(),
        }
    }

    /// Measure of the ball `B(x, r)`.
    pub fn volume(&self, x: f64, r: f64) -> f64 {
        match *self {
            Geometry::Circle { circumference } => (2.0 * r).min(circumference),
            Geometry::Interval(iv) => ((x + r).min(iv.b) - (x - r).max(iv.a)).max(0.0),
            Geometry::Line => 2.0 * r,
        }
    }

    /// Largest sampled `V(x, 2r) / V(x, r)` over `xs` and dyadic radii.
    pub fn doubling_constant(&self, xs: &[f64], r_min: f64, r_max: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for &x in xs {
            let mut r = r_min;
            while r <= r_max {
                let v = self.volume(x, r);
                if v > 0.0 {
                    worst = worst.max(self.volume(x, 2.0 * r) / v);
                }
                r *= 2.0;
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_measure() {
        let g = Grid1D::dirichlet(37, Interval::new(-1.0, 2.5).unwrap()).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 3.5).abs() < 1e-12);
        let g = Grid1D::periodic(64, 2.0 * std::f64::consts::PI).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        let g = Grid1D::whole_line(101, 6.0).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn circle_distance_wraps() {
        let c = Geometry::Circle {
            circumference: 10.0,
        };
        assert!((c.distance(1.0, 9.0) - 2.0).abs() < 1e-15);
        assert_eq!(c.volume(0.0, 2.0), 4.0);
        assert_eq!(c.volume(0.0, 7.0), 10.0);
    }

    #[test]
    fn interval_volume_is_clipped() {
        let g = Geometry::Interval(Interval::new(0.0, 1.0).unwrap());
        assert_eq!(g.volume(0.0, 0.25), 0.25);
        assert_eq!(g.volume(0.5, 0.25), 0.5);
        assert_eq!(g.volume(0.5, 5.0), 1.0);
    }

    #[test]
    fn circle_doubling_is_exactly_two_below_quarter_circumference() {
        let c = Geometry::Circle { circumference: 8.0 };
        let xs = [0.0, 1.0, 3.5];
        assert_eq!(c.doubling_constant(&xs, 1.0 / 64.0, 2.0), 2.0);
    }
}
