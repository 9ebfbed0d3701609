//! Exponential reweighting of forecast streams.
//!
//! Weights start uniform. After each revealed actual,
//! `w_i ← w_i·exp(−e_i² / (2ν))` and renormalise, where `ν` is the running
//! mean of squared errors over all members and all steps so far (floored at
//! 1e-12).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NU_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinerState {
    pub weights: Vec<f64>,
    /// Cumulative squared error per member.
    pub squared_errors: Vec<f64>,
    pub nu: f64,
    pub steps: usize,
    log_weights: Vec<f64>,
}

impl CombinerState {
    pub fn new(members: usize) -> Self {
        Self {
            weights: vec![1.0 / members as f64; members],
            squared_errors: vec![0.0; members],
            nu: NU_FLOOR,
            steps: 0,
            log_weights: vec![0.0; members],
        }
    }

    pub fn combine(&self, forecasts: &[f64]) -> f64 {
        let v: f64 = self.weights.iter().zip(forecasts).map(|(w, f)| w * f).sum();
        // Guard against rounding just outside the members' range.
        let lo = forecasts.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = forecasts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        v.clamp(lo, hi)
    }

    pub fn update(&mut self, forecasts: &[f64], actual: f64) {
        let m = self.weights.len();
        let errs: Vec<f64> = forecasts.iter().map(|f| (actual - f).powi(2)).collect();
        for (s, e) in self.squared_errors.iter_mut().zip(&errs) {
            *s += e;
        }
        self.steps += 1;
        let total: f64 = self.squared_errors.iter().sum();
        self.nu = (total / (m * self.steps) as f64).max(NU_FLOOR);
        for (lw, e) in self.log_weights.iter_mut().zip(&errs) {
            *lw -= e / (2.0 * self.nu);
        }
        let top = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = self.log_weights.iter().map(|l| (l - top).exp()).collect();
        let sum: f64 = raw.iter().sum();
        self.weights = raw.iter().map(|r| r / sum).collect();
        // Keep log-weights bounded.
        for lw in self.log_weights.iter_mut() {
            *lw -= top;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfterOutput {
    /// One combined value per stream position.
    pub combined: Vec<f64>,
    /// Weights used for each combined value.
    pub weight_trace: Vec<Vec<f64>>,
    pub state: CombinerState,
}

/// Combines `streams[member][t]`. The first `actuals.len()` positions are
/// revealed one at a time after being forecast; later positions use the
/// final weights.
pub fn after_combine(streams: &[Vec<f64>], actuals: &[f64]) -> Result<AfterOutput> {
    if streams.len() < 2 {
        return Err(Error::InvalidConfig("AFTER needs at least two members".into()));
    }
    let len = streams[0].len();
    if let Some(bad) = streams.iter().position(|s| s.len() != len) {
        return Err(Error::Misaligned(format!(
            "member {bad} has {} forecasts, member 0 has {len}",
            streams[bad].len()
        )));
    }
    if actuals.len() > len {
        return Err(Error::Misaligned(format!(
            "{} actuals for {len} forecasts",
            actuals.len()
        )));
    }
    if streams.iter().flatten().chain(actuals).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite forecast or actual".into()));
    }
    let mut state = CombinerState::new(streams.len());
    let mut combined = Vec::with_capacity(len);
    let mut weight_trace = Vec::with_capacity(len);
    for t in 0..len {
        let f: Vec<f64> = streams.iter().map(|s| s[t]).collect();
        combined.push(state.combine(&f));
        weight_trace.push(state.weights.clone());
        if let Some(&a) = actuals.get(t) {
            state.update(&f, a);
        }
    }
    Ok(AfterOutput {
        combined,
        weight_trace,
        state,
    })
}
