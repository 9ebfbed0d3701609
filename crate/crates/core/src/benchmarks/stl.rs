//! Seasonal-trend decomposition by LOESS with a periodic seasonal component.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PERIOD: usize = 12;
const ROBUST_PASSES: usize = 15;
const MAX_INNER: usize = 100;
const INNER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StlOptions {
    /// Odd LOESS span of the trend smoother.
    pub trend_window: usize,
    pub robust: bool,
}

impl Default for StlOptions {
    fn default() -> Self {
        Self {
            trend_window: 13,
            robust: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StlResult {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub remainder: Vec<f64>,
    /// Robustness weights from the last outer pass (all ones when not robust).
    pub weights: Vec<f64>,
}

impl StlResult {
    /// Trend plus seasonal.
    pub fn fitted(&self) -> Vec<f64> {
        self.trend.iter().zip(&self.seasonal).map(|(t, s)| t + s).collect()
    }

    /// Trend plus remainder.
    pub fn seasonally_adjusted(&self) -> Vec<f64> {
        self.trend.iter().zip(&self.remainder).map(|(t, r)| t + r).collect()
    }
}

/// Degree-1 LOESS estimate at position `xs` (1-based, may lie outside
/// `1..=n`) using the `span` nearest points with tricube weights times `rw`.
fn loess_at(y: &[f64], span: usize, xs: f64, rw: Option<&[f64]>) -> Option<f64> {
    let n = y.len();
    let q = span.max(2);
    let (nleft, nright) = if q >= n {
        (1usize, n)
    } else {
        let c = (xs.round() as i64).clamp(1, n as i64) as usize;
        let mut left = c.saturating_sub((q - 1) / 2).max(1);
        if left + q - 1 > n {
            left = n + 1 - q;
        }
        (left, left + q - 1)
    };
    let mut h = (xs - nleft as f64).max(nright as f64 - xs);
    if q > n {
        h += ((q - n) / 2) as f64;
    }
    let (h9, h1) = (0.999 * h, 0.001 * h);
    let mut w = vec![0.0; nright - nleft + 1];
    let mut total = 0.0;
    for (k, j) in (nleft..=nright).enumerate() {
        let r = (j as f64 - xs).abs();
        if r <= h9 {
            let mut wj = if r <= h1 { 1.0 } else { (1.0 - (r / h).powi(3)).powi(3) };
            if let Some(rw) = rw {
                wj *= rw[j - 1];
            }
            w[k] = wj;
            total += wj;
        }
    }
    if total <= 0.0 {
        return None;
    }
    for wk in w.iter_mut() {
        *wk /= total;
    }
    if h > 0.0 {
        let a: f64 = (nleft..=nright).zip(&w).map(|(j, wk)| wk * j as f64).sum();
        let c: f64 = (nleft..=nright).zip(&w).map(|(j, wk)| wk * (j as f64 - a).powi(2)).sum();
        if c.sqrt() > 0.001 * (n as f64 - 1.0) {
            let b = (xs - a) / c;
            for (j, wk) in (nleft..=nright).zip(w.iter_mut()) {
                *wk *= b * (j as f64 - a) + 1.0;
            }
        }
    }
    Some((nleft..=nright).zip(&w).map(|(j, wk)| wk * y[j - 1]).sum())
}

fn loess(y: &[f64], span: usize, rw: Option<&[f64]>) -> Vec<f64> {
    (1..=y.len())
        .map(|i| loess_at(y, span, i as f64, rw).unwrap_or(y[i - 1]))
        .collect()
}

fn moving_average(x: &[f64], len: usize) -> Vec<f64> {
    x.windows(len).map(|w| w.iter().sum::<f64>() / len as f64).collect()
}

/// Cleveland bisquare weights from `6·median|r|`.
fn robustness_weights(remainder: &[f64]) -> Vec<f64> {
    let mut abs: Vec<f64> = remainder.iter().map(|r| r.abs()).collect();
    abs.sort_by(|a, b| a.total_cmp(b));
    let n = abs.len();
    let med = 0.5 * (abs[(n - 1) / 2] + abs[n / 2]);
    let h = 6.0 * med;
    let (c9, c1) = (0.999 * h, 0.001 * h);
    remainder
        .iter()
        .map(|r| {
            let r = r.abs();
            if r <= c1 {
                1.0
            } else if r <= c9 {
                (1.0 - (r / h).powi(2)).powi(2)
            } else {
                0.0
            }
        })
        .collect()
}

/// Weighted month means of the detrended series, normalised by the
/// low-pass filter of their periodic extension.
fn periodic_seasonal(detrended: &[f64], rw: &[f64]) -> Vec<f64> {
    let n = detrended.len();
    let mut means = [0.0; PERIOD];
    for (m, mean) in means.iter_mut().enumerate() {
        let (mut s, mut w, mut plain, mut count) = (0.0, 0.0, 0.0, 0.0);
        for t in (m..n).step_by(PERIOD) {
            s += rw[t] * detrended[t];
            w += rw[t];
            plain += detrended[t];
            count += 1.0;
        }
        *mean = if w > 0.0 { s / w } else { plain / count };
    }
    // Cycle-subseries values on positions -PERIOD+1 ..= n+PERIOD.
    let cycle: Vec<f64> = (0..n + 2 * PERIOD)
        .map(|k| means[(k + PERIOD * (n + 1) - PERIOD) % PERIOD])
        .collect();
    let low = moving_average(&moving_average(&moving_average(&cycle, PERIOD), PERIOD), 3);
    let low = loess(&low, PERIOD + 1, None);
    (0..n).map(|t| cycle[t + PERIOD] - low[t]).collect()
}

pub fn stl_decompose(y: &[f64], opts: &StlOptions) -> Result<StlResult> {
    let n = y.len();
    if n < 2 * PERIOD {
        return Err(Error::InsufficientData {
            found: n,
            needed: 2 * PERIOD,
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite value in STL input".into()));
    }
    if opts.trend_window < 3 || opts.trend_window.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "trend window must be odd and >= 3, got {}",
            opts.trend_window
        )));
    }
    let outer = if opts.robust { ROBUST_PASSES } else { 0 };
    let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rw = vec![1.0; n];
    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    for pass in 0..=outer {
        // Inner loop runs until the components stop moving.
        for _ in 0..MAX_INNER {
            let detrended: Vec<f64> = y.iter().zip(&trend).map(|(v, t)| v - t).collect();
            let next_seasonal = periodic_seasonal(&detrended, &rw);
            let adjusted: Vec<f64> = y.iter().zip(&next_seasonal).map(|(v, s)| v - s).collect();
            let next_trend = loess(&adjusted, opts.trend_window, Some(&rw));
            let change = (0..n)
                .map(|t| (next_trend[t] - trend[t]).abs().max((next_seasonal[t] - seasonal[t]).abs()))
                .fold(0.0, f64::max);
            trend = next_trend;
            seasonal = next_seasonal;
            if change <= INNER_TOL * scale {
                break;
            }
        }
        if pass < outer {
            let r: Vec<f64> = (0..n).map(|t| y[t] - trend[t] - seasonal[t]).collect();
            rw = robustness_weights(&r);
        }
    }
    // Periodic mode: each month carries a single seasonal value.
    let mut month_mean = [0.0; PERIOD];
    let mut count = [0.0; PERIOD];
    for (t, s) in seasonal.iter().enumerate() {
        month_mean[t % PERIOD] += s;
        count[t % PERIOD] += 1.0;
    }
    for (m, c) in month_mean.iter_mut().zip(count) {
        *m /= c;
    }
    let seasonal: Vec<f64> = (0..n).map(|t| month_mean[t % PERIOD]).collect();
    let remainder: Vec<f64> = (0..n).map(|t| y[t] - trend[t] - seasonal[t]).collect();
    Ok(StlResult {
        trend,
        seasonal,
        remainder,
        weights: rw,
    })
}
