//! Normalized Hermite functions and the ladder algebra of the oscillator.

use nalgebra::DMatrix;

/// Values `h_0(x), ..., h_{count-1}(x)` of the L^2-normalized Hermite
/// functions, by the three-term recurrence
/// `h_{k+1} = sqrt(2/(k+1)) x h_k - sqrt(k/(k+1)) h_{k-1}`.
///
/// The Gaussian factor is applied at the end with a running log-scale so
/// neither underflow nor overflow occurs for moderate `|x|` and `count`.
pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    if count == 0 {
        return out;
    }
    let mut log_scale = -0.5 * x * x;
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    let mut raw = vec![0.0; count];
    let mut logs = vec![0.0; count];
    raw[0] = cur;
    logs[0] = log_scale;
    for k in 0..count - 1 {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > 1e150 || (m < 1e-150 && m > 0.0) {
            prev /= m;
            cur /= m;
            log_scale += m.ln();
        }
        raw[k + 1] = cur;
        logs[k + 1] = log_scale;
    }
    for k in 0..count {
        out[k] = if raw[k] == 0.0 {
            0.0
        } else {
            raw[k] * logs[k].exp()
        };
    }
    out
}

/// Samples `h_0..h_{count-1}` at `xs`; column `k` holds `h_k`.
pub fn hermite_table(xs: &[f64], count: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(xs.len(), count);
    for (i, &x) in xs.iter().enumerate() {
        for (k, v) in hermite_functions(x, count).into_iter().enumerate() {
            m[(i, k)] = v;
        }
    }
    m
}

/// `d/dx` from span{h_0..h_{K-1}} into span{h_0..h_K}: a `(K+1) x K` matrix
/// with `h_k' = sqrt(k/2) h_{k-1} - sqrt((k+1)/2) h_{k+1}`.
pub fn derivative_ladder(k_modes: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(k_modes + 1, k_modes);
    for k in 0..k_modes {
        let kf = k as f64;
        if k > 0 {
            d[(k - 1, k)] = (kf / 2.0).sqrt();
        }
        d[(k + 1, k)] = -((kf + 1.0) / 2.0).sqrt();
    }
    d
}

/// Multiplication by `x`, same shape as [`derivative_ladder`].
pub fn position_ladder(k_modes: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(k_modes + 1, k_modes);
    for k in 0..k_modes {
        let kf = k as f64;
        if k > 0 {
            x[(k - 1, k)] = (kf / 2.0).sqrt();
        }
        x[(k + 1, k)] = ((kf + 1.0) / 2.0).sqrt();
    }
    x
}

/// `int_{|x| > x_max} h_k(x)^2 dx` by trapezoid quadrature of the tail.
pub fn tail_mass(k: usize, x_max: f64) -> f64 {
    let step = 1e-3;
    let span = 40.0;
    let m = (span / step) as usize;
    let mut sum = 0.0;
    for i in 0..=m {
        let x = x_max + i as f64 * step;
        let v = hermite_functions(x, k + 1)[k];
        let w = if i == 0 || i == m { 0.5 } else { 1.0 };
        sum += w * v * v;
    }
    2.0 * step * sum
}
