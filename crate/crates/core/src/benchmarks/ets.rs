//! Additive Holt–Winters, ETS(A,A,A), in error-correction form:
//!
//! ```text
//! ŷ_t = L + B + S_{t−12}        e_t = y_t − ŷ_t
//! L ← L + B + α·e_t             B ← B + α·β·e_t        S_t = S_{t−12} + γ·e_t
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};

pub const PERIOD: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtsParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Level and trend before the first observation.
    pub level: f64,
    pub trend: f64,
    /// `seasonal[j]` is the seasonal state used by observations `t ≡ j (mod 12)`
    /// during the first cycle; sums to zero after fitting.
    pub seasonal: [f64; PERIOD],
}

impl EtsParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} = {v} outside [0, 1]")));
            }
        }
        let states = [self.level, self.trend].into_iter().chain(self.seasonal);
        if states.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite ETS state".into()));
        }
        Ok(())
    }
}

/// States after filtering a series.
#[derive(Debug, Clone, PartialEq)]
pub struct EtsState {
    pub level: f64,
    pub trend: f64,
    pub seasonal: [f64; PERIOD],
    /// Number of observations consumed.
    pub t: usize,
}

/// Runs the recursions, returning one-step errors and final states.
fn filter(
    y: &[f64],
    (alpha, beta, gamma): (f64, f64, f64),
    level: f64,
    trend: f64,
    seasonal: [f64; PERIOD],
    errors: &mut Vec<f64>,
) -> EtsState {
    errors.clear();
    let (mut l, mut b, mut s) = (level, trend, seasonal);
    for (t, &v) in y.iter().enumerate() {
        let j = t % PERIOD;
        let e = v - (l + b + s[j]);
        l = l + b + alpha * e;
        b += alpha * beta * e;
        s[j] += gamma * e;
        errors.push(e);
    }
    EtsState {
        level: l,
        trend: b,
        seasonal: s,
        t: y.len(),
    }
}

/// One-step-ahead errors and final states for given parameters.
pub fn ets_filter(params: &EtsParams, y: &[f64]) -> (Vec<f64>, EtsState) {
    let mut e = Vec::with_capacity(y.len());
    let st = filter(
        y,
        (params.alpha, params.beta, params.gamma),
        params.level,
        params.trend,
        params.seasonal,
        &mut e,
    );
    (e, st)
}

const N_STATES: usize = 2 + PERIOD - 1;

fn unit_state(k: usize) -> (f64, f64, [f64; PERIOD]) {
    let mut s = [0.0; PERIOD];
    match k {
        0 => (1.0, 0.0, s),
        1 => (0.0, 1.0, s),
        _ => {
            s[k - 2] = 1.0;
            s[PERIOD - 1] = -1.0;
            (0.0, 0.0, s)
        }
    }
}

/// For fixed smoothing constants the errors are affine in the initial
/// states, so the SSE-optimal states (seasonals summing to zero) solve a
/// linear least-squares problem.
fn optimal_states(y: &[f64], smooth: (f64, f64, f64)) -> (f64, EtsParams) {
    let n = y.len();
    let mut e0 = Vec::with_capacity(n);
    filter(y, smooth, 0.0, 0.0, [0.0; PERIOD], &mut e0);
    let zeros = vec![0.0; n];
    let mut design = DMatrix::zeros(n, N_STATES);
    let mut ek = Vec::with_capacity(n);
    for k in 0..N_STATES {
        let (l, b, s) = unit_state(k);
        filter(&zeros, smooth, l, b, s, &mut ek);
        design.column_mut(k).copy_from_slice(&ek);
    }
    let rhs = -DVector::from_vec(e0);
    let x = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(N_STATES));
    let mut seasonal = [0.0; PERIOD];
    seasonal[..PERIOD - 1].copy_from_slice(&x.as_slice()[2..]);
    seasonal[PERIOD - 1] = -x.as_slice()[2..].iter().sum::<f64>();
    let params = EtsParams {
        alpha: smooth.0,
        beta: smooth.1,
        gamma: smooth.2,
        level: x[0],
        trend: x[1],
        seasonal,
    };
    let (e, _) = ets_filter(&params, y);
    (e.iter().map(|v| v * v).sum(), params)
}

/// Fits smoothing constants in `[0, 1]³` and initial states by minimizing
/// the one-step squared-error sum. `fixed` is returned unchanged.
pub fn ets_fit(y: &[f64], fixed: Option<EtsParams>) -> Result<EtsParams> {
    if let Some(p) = fixed {
        p.validate()?;
        return Ok(p);
    }
    if y.len() < 2 * PERIOD {
        return Err(Error::InsufficientData {
            found: y.len(),
            needed: 2 * PERIOD,
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite value in ETS input".into()));
    }
    let objective = |x: &[f64]| {
        let c: Vec<f64> = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let outside: f64 = x.iter().zip(&c).map(|(a, b)| (a - b).abs()).sum();
        let (sse, _) = optimal_states(y, (c[0], c[1], c[2]));
        sse + outside * (1.0 + sse)
    };
    let opts = NelderMeadOptions {
        max_evals: 600,
        f_tol: 1e-10,
        x_tol: 1e-7,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in [[0.3, 0.1, 0.1], [0.05, 0.05, 0.5]] {
        let m = nelder_mead(objective, &start, &[0.15, 0.1, 0.15], &opts);
        if best.as_ref().is_none_or(|(v, _)| m.value < *v) {
            best = Some((m.value, m.x));
        }
    }
    let (_, x) = best.expect("at least one start");
    let c: Vec<f64> = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(optimal_states(y, (c[0], c[1], c[2])).1)
}

/// `L_T + h·B_T + S_{T+h−12k}` for `h = 1..=horizon`.
pub fn ets_forecast(params: &EtsParams, y: &[f64], horizon: usize) -> Vec<f64> {
    let (_, st) = ets_filter(params, y);
    (1..=horizon)
        .map(|h| st.level + h as f64 * st.trend + st.seasonal[(st.t + h - 1) % PERIOD])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    const PATTERN: [f64; 12] = [30.0, 25.0, 12.0, 0.0, -14.0, -22.0, -27.0, -25.0, -18.0, -4.0, 14.0, 29.0];

    #[test]
    fn generator_states_give_zero_errors() {
        let (a, b) = (80.0, 0.7);
        let y: Vec<f64> = (1..=96).map(|t| a + b * t as f64 + PATTERN[(t - 1) % 12]).collect();
        let p = EtsParams {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            level: a,
            trend: b,
            seasonal: PATTERN,
        };
        let (e, _) = ets_filter(&p, &y);
        assert!(e.iter().all(|v| v.abs() <= 1e-8));
        let f = ets_forecast(&p, &y, 13);
        for (h, v) in f.iter().enumerate() {
            let t = 96 + h + 1;
            assert!((v - (a + b * t as f64 + PATTERN[(t - 1) % 12])).abs() < 1e-8);
        }
    }

    #[test]
    fn simple_exponential_smoothing_limit() {
        let y = [3.0, 8.0, 1.0, 6.5];
        let p = EtsParams {
            alpha: 1.0,
            beta: 0.0,
            gamma: 0.0,
            level: 0.0,
            trend: 0.0,
            seasonal: [0.0; 12],
        };
        assert_eq!(ets_forecast(&p, &y, 5), vec![6.5; 5]);
    }

    #[test]
    fn fit_recovers_noise_free_generator() {
        let y: Vec<f64> = (1..=72).map(|t| 50.0 + 1.5 * t as f64 + PATTERN[(t - 1) % 12]).collect();
        let p = ets_fit(&y, None).unwrap();
        let (e, _) = ets_filter(&p, &y);
        assert!(e.iter().all(|v| v.abs() < 1e-6));
        assert!(p.seasonal.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn fit_beats_seasonal_naive_in_sample() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 3.0).unwrap();
        let y: Vec<f64> = (0..108)
            .map(|t| 60.0 + 0.4 * t as f64 + PATTERN[t % 12] + noise.sample(&mut rng))
            .collect();
        let p = ets_fit(&y, None).unwrap();
        assert!((0.0..=1.0).contains(&p.alpha) && (0.0..=1.0).contains(&p.beta) && (0.0..=1.0).contains(&p.gamma));
        let (e, _) = ets_filter(&p, &y);
        let ets_rmse = (e[12..].iter().map(|v| v * v).sum::<f64>() / 96.0).sqrt();
        let naive_rmse = ((12..108).map(|t| (y[t] - y[t - 12]).powi(2)).sum::<f64>() / 96.0).sqrt();
        assert!(ets_rmse <= naive_rmse, "{ets_rmse} vs {naive_rmse}");
        assert_eq!(ets_fit(&y, None).unwrap(), p);
    }

    #[test]
    fn fixed_params_bypass_and_validation() {
        let mut p = EtsParams {
            alpha: 0.5,
            beta: 0.1,
            gamma: 0.2,
            level: 1.0,
            trend: 0.0,
            seasonal: [0.0; 12],
        };
        assert_eq!(ets_fit(&[1.0; 3], Some(p.clone())).unwrap(), p);
        p.gamma = 1.5;
        assert!(ets_fit(&[1.0; 30], Some(p)).is_err());
        assert!(matches!(ets_fit(&[1.0; 23], None), Err(Error::InsufficientData { .. })));
    }
}
