//! Seasonal ARIMA fitted by conditional sum of squares.
//!
//! With `w = Δ^d Δ₁₂^D y` the model is
//! `φ(B)Φ(B¹²)(w_t − μ) = θ(B)Θ(B¹²)ε_t`, MA polynomials written with plus
//! signs (`θ(B) = 1 + θ₁B + …`). `μ` is only estimated when drift is on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};

pub const SEASON: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SarimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub sp: usize,
    #[serde(rename = "D")]
    pub sd: usize,
    #[serde(rename = "Q")]
    pub sq: usize,
}

impl SarimaOrder {
    pub const fn new(p: usize, d: usize, q: usize, sp: usize, sd: usize, sq: usize) -> Self {
        Self { p, d, q, sp, sd, sq }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d > 2 || self.sd > 2 {
            return Err(Error::InvalidConfig(format!(
                "differencing orders must be in 0..=2, got d = {}, D = {}",
                self.d, self.sd
            )));
        }
        Ok(())
    }

    fn n_coefficients(&self) -> usize {
        self.p + self.q + self.sp + self.sq
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaSpec {
    pub order: SarimaOrder,
    pub drift: bool,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub seasonal_phi: Vec<f64>,
    pub seasonal_theta: Vec<f64>,
    pub mu: f64,
    pub css: f64,
    /// AR part has a root on or inside the unit circle.
    pub nonstationary: bool,
    /// MA part has a root on or inside the unit circle.
    pub noninvertible: bool,
}

/// Coefficients `c_k` of `Π (1 + Σ a_i B^{i·lag})` written as `1 + Σ c_k B^k`.
fn multiply(a: &[f64], lag_a: usize, b: &[f64], lag_b: usize) -> Vec<f64> {
    let len = a.len() * lag_a + b.len() * lag_b;
    let mut out = vec![0.0; len + 1];
    let mut pa = vec![0.0; a.len() * lag_a + 1];
    pa[0] = 1.0;
    for (i, v) in a.iter().enumerate() {
        pa[(i + 1) * lag_a] = *v;
    }
    let mut pb = vec![0.0; b.len() * lag_b + 1];
    pb[0] = 1.0;
    for (i, v) in b.iter().enumerate() {
        pb[(i + 1) * lag_b] = *v;
    }
    for (i, x) in pa.iter().enumerate() {
        for (j, y) in pb.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out.remove(0);
    out
}

/// Expanded AR coefficients `a_k` with `w_t = Σ a_k w_{t−k} + …`.
fn ar_expanded(phi: &[f64], sphi: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = phi.iter().map(|v| -v).collect();
    let sneg: Vec<f64> = sphi.iter().map(|v| -v).collect();
    multiply(&neg, 1, &sneg, SEASON).into_iter().map(|v| -v).collect()
}

fn ma_expanded(theta: &[f64], stheta: &[f64]) -> Vec<f64> {
    multiply(theta, 1, stheta, SEASON)
}

fn difference(y: &[f64], lag: usize) -> Vec<f64> {
    (lag..y.len()).map(|t| y[t] - y[t - lag]).collect()
}

/// Successive differences: ordinary first, then seasonal. Element 0 is the input.
fn difference_stack(y: &[f64], order: &SarimaOrder) -> Vec<(Vec<f64>, usize)> {
    let mut stack = vec![(y.to_vec(), 0)];
    let lags = std::iter::repeat_n(1, order.d).chain(std::iter::repeat_n(SEASON, order.sd));
    for lag in lags {
        let next = difference(&stack.last().expect("non-empty").0, lag);
        stack.push((next, lag));
    }
    stack
}

/// Conditional residuals, zero before the first full AR lag.
fn residuals(w: &[f64], ar: &[f64], ma: &[f64], mu: f64) -> Vec<f64> {
    let start = ar.len();
    let mut e = vec![0.0; w.len()];
    for t in start..w.len() {
        let mut v = w[t] - mu;
        for (k, a) in ar.iter().enumerate() {
            v -= a * (w[t - k - 1] - mu);
        }
        for (k, m) in ma.iter().enumerate() {
            if t > k {
                v -= m * e[t - k - 1];
            }
        }
        e[t] = v;
    }
    e
}

struct Unpacked {
    phi: Vec<f64>,
    theta: Vec<f64>,
    sphi: Vec<f64>,
    stheta: Vec<f64>,
    mu: f64,
}

fn unpack(x: &[f64], order: &SarimaOrder, drift: bool) -> Unpacked {
    let mut it = x.iter().copied();
    let mut take = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
    let phi = take(order.p);
    let theta = take(order.q);
    let sphi = take(order.sp);
    let stheta = take(order.sq);
    let mu = if drift { take(1)[0] } else { 0.0 };
    Unpacked {
        phi,
        theta,
        sphi,
        stheta,
        mu,
    }
}

/// True when every root of `1 − Σ c_k z^k` lies strictly outside the unit
/// circle (Schur–Cohn step-down: every reflection coefficient below 1).
fn roots_outside_unit_circle(c: &[f64]) -> bool {
    let mut a = c.to_vec();
    while let Some(&k) = a.last() {
        if k.abs() >= 1.0 {
            return false;
        }
        let p = a.len();
        a = (0..p - 1).map(|j| (a[j] + k * a[p - 2 - j]) / (1.0 - k * k)).collect();
    }
    true
}

pub fn sarima_fit(y: &[f64], order: SarimaOrder, drift: bool) -> Result<SarimaSpec> {
    order.validate()?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite value in SARIMA input".into()));
    }
    let diffs = order.d + SEASON * order.sd;
    let k = order.n_coefficients() + drift as usize;
    let needed = diffs + (3 * k).max(1);
    if y.len() < needed || y.len() <= diffs {
        return Err(Error::InsufficientData {
            found: y.len(),
            needed,
        });
    }
    let stack = difference_stack(y, &order);
    let w = &stack.last().expect("non-empty").0;
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let objective = |x: &[f64]| {
        let u = unpack(x, &order, drift);
        let ar = ar_expanded(&u.phi, &u.sphi);
        let ma = ma_expanded(&u.theta, &u.stheta);
        residuals(w, &ar, &ma, u.mu).iter().map(|e| e * e).sum::<f64>()
    };
    let mut x0 = vec![0.0; order.n_coefficients()];
    if drift {
        x0.push(mean);
    }
    let (x, css) = if x0.is_empty() {
        (x0, objective(&[]))
    } else {
        let scale = w.iter().map(|v| (v - mean).abs()).sum::<f64>() / w.len() as f64;
        let mut step = vec![0.1; order.n_coefficients()];
        if drift {
            step.push(0.1 * scale.max(1e-3));
        }
        let opts = NelderMeadOptions {
            max_evals: 2000 * x0.len(),
            f_tol: 1e-12,
            x_tol: 1e-9,
        };
        // Restart from the optimum once to escape a collapsed simplex.
        let m = nelder_mead(objective, &x0, &step, &opts);
        let m2 = nelder_mead(objective, &m.x, &step, &opts);
        if m2.value <= m.value {
            (m2.x, m2.value)
        } else {
            (m.x, m.value)
        }
    };
    let u = unpack(&x, &order, drift);
    let ar = ar_expanded(&u.phi, &u.sphi);
    let ma_neg: Vec<f64> = ma_expanded(&u.theta, &u.stheta).iter().map(|v| -v).collect();
    Ok(SarimaSpec {
        order,
        drift,
        nonstationary: !roots_outside_unit_circle(&ar),
        noninvertible: !roots_outside_unit_circle(&ma_neg),
        phi: u.phi,
        theta: u.theta,
        seasonal_phi: u.sphi,
        seasonal_theta: u.stheta,
        mu: u.mu,
        css,
    })
}

/// Recursive forecasts of the differenced series (future shocks zero),
/// integrated back to the original scale.
pub fn sarima_forecast(spec: &SarimaSpec, y: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let diffs = spec.order.d + SEASON * spec.order.sd;
    if y.len() <= diffs {
        return Err(Error::InsufficientData {
            found: y.len(),
            needed: diffs + 1,
        });
    }
    let stack = difference_stack(y, &spec.order);
    let ar = ar_expanded(&spec.phi, &spec.seasonal_phi);
    let ma = ma_expanded(&spec.theta, &spec.seasonal_theta);
    let mut w = stack.last().expect("non-empty").0.clone();
    let mut e = residuals(&w, &ar, &ma, spec.mu);
    let n = w.len();
    for t in n..n + horizon {
        let mut v = spec.mu;
        for (k, a) in ar.iter().enumerate() {
            v += a * (w.get(t.wrapping_sub(k + 1)).copied().unwrap_or(spec.mu) - spec.mu);
        }
        for (k, m) in ma.iter().enumerate() {
            if t > k {
                v += m * e[t - k - 1];
            }
        }
        w.push(v);
        e.push(0.0);
    }
    let mut future: Vec<f64> = w[n..].to_vec();
    for level in (1..stack.len()).rev() {
        let lag = stack[level].1;
        let mut base = stack[level - 1].0.clone();
        let m = base.len();
        for (h, f) in future.iter().enumerate() {
            let v = f + base[m + h - lag];
            base.push(v);
        }
        future = base[m..].to_vec();
    }
    Ok(future)
}
