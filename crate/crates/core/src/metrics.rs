//! Forecast accuracy measures and residual diagnostics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::timegrid::MonthlySeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// msm³
    pub rmse: f64,
    /// msm³
    pub mae: f64,
    /// percent
    pub mape: f64,
    pub n: usize,
    /// Signed percent error of the annual total, when a full year is covered.
    pub yearly_pe: Option<f64>,
}

fn check_lengths(actuals: &[f64], predictions: &[f64]) -> Result<()> {
    if actuals.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: actuals.len(),
            right: predictions.len(),
        });
    }
    if actuals.is_empty() {
        return Err(Error::InsufficientData { found: 0, needed: 1 });
    }
    Ok(())
}

pub fn mae(actuals: &[f64], predictions: &[f64]) -> Result<f64> {
    check_lengths(actuals, predictions)?;
    let s: f64 = actuals.iter().zip(predictions).map(|(y, p)| (y - p).abs()).sum();
    Ok(s / actuals.len() as f64)
}

pub fn rmse(actuals: &[f64], predictions: &[f64]) -> Result<f64> {
    check_lengths(actuals, predictions)?;
    let s: f64 = actuals.iter().zip(predictions).map(|(y, p)| (y - p).powi(2)).sum();
    Ok((s / actuals.len() as f64).sqrt())
}

/// Mean absolute percentage error. A zero actual is an error, never skipped.
pub fn mape(actuals: &[f64], predictions: &[f64]) -> Result<f64> {
    check_lengths(actuals, predictions)?;
    let mut s = 0.0;
    for (i, (y, p)) in actuals.iter().zip(predictions).enumerate() {
        if *y == 0.0 {
            return Err(Error::DivisionByZero { index: i });
        }
        s += ((y - p) / y).abs();
    }
    Ok(100.0 * s / actuals.len() as f64)
}

pub fn evaluate(actuals: &[f64], predictions: &[f64]) -> Result<EvalReport> {
    Ok(EvalReport {
        rmse: rmse(actuals, predictions)?,
        mae: mae(actuals, predictions)?,
        mape: mape(actuals, predictions)?,
        n: actuals.len(),
        yearly_pe: None,
    })
}

/// Signed percent error of a predicted annual total.
pub fn yearly_pe(actual_total: f64, predicted_total: f64) -> Result<f64> {
    if actual_total == 0.0 {
        return Err(Error::DivisionByZero { index: 0 });
    }
    Ok(100.0 * (predicted_total - actual_total) / actual_total)
}

/// Annual-total comparison for one calendar year of an evaluation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearlyTotal {
    pub year: u32,
    /// Months of the year inside the window.
    pub months: usize,
    pub actual_total: f64,
    pub predicted_total: f64,
    pub pe: f64,
}

impl YearlyTotal {
    pub fn is_full_year(&self) -> bool {
        self.months == 12
    }
}

fn check_aligned(actual: &MonthlySeries, predicted: &MonthlySeries) -> Result<()> {
    if actual.start != predicted.start {
        return Err(Error::Misaligned(format!(
            "actuals start {} but predictions start {}",
            actual.start, predicted.start
        )));
    }
    check_lengths(&actual.values, &predicted.values)
}

/// Totals and percent error per calendar year touched by the series.
pub fn yearly_totals(actual: &MonthlySeries, predicted: &MonthlySeries) -> Result<Vec<YearlyTotal>> {
    check_aligned(actual, predicted)?;
    let mut out: Vec<YearlyTotal> = Vec::new();
    for (k, (a, p)) in actual.values.iter().zip(&predicted.values).enumerate() {
        let year = actual.ym_at(k).year;
        match out.last_mut() {
            Some(t) if t.year == year => {
                t.months += 1;
                t.actual_total += a;
                t.predicted_total += p;
            }
            _ => out.push(YearlyTotal {
                year,
                months: 1,
                actual_total: *a,
                predicted_total: *p,
                pe: 0.0,
            }),
        }
    }
    for t in out.iter_mut() {
        t.pe = yearly_pe(t.actual_total, t.predicted_total)?;
    }
    Ok(out)
}

/// [`evaluate`] on aligned series; `yearly_pe` is filled from the first
/// complete calendar year in the window.
pub fn evaluate_series(actual: &MonthlySeries, predicted: &MonthlySeries) -> Result<EvalReport> {
    check_aligned(actual, predicted)?;
    let mut report = evaluate(&actual.values, &predicted.values)?;
    report.yearly_pe = yearly_totals(actual, predicted)?
        .into_iter()
        .find(YearlyTotal::is_full_year)
        .map(|t| t.pe);
    Ok(report)
}

/// Sample autocorrelation at lags 1..=max_lag.
pub fn autocorrelations(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n <= max_lag {
        return Err(Error::InsufficientData {
            found: n,
            needed: max_lag + 1,
        });
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if denom <= 1e-24 * n as f64 * (1.0 + mean * mean) {
        return Err(Error::DegenerateInput("residuals have zero variance".into()));
    }
    Ok((1..=max_lag)
        .map(|k| {
            (k..n).map(|t| (x[t] - mean) * (x[t - k] - mean)).sum::<f64>() / denom
        })
        .collect())
}

/// Ljung–Box portmanteau statistic `Q = n(n+2)·Σ ρ̂_k²/(n−k)`.
pub fn ljung_box(residuals: &[f64], lag: usize) -> Result<f64> {
    if lag == 0 {
        return Err(Error::InvalidConfig("Ljung-Box lag must be >= 1".into()));
    }
    let rho = autocorrelations(residuals, lag)?;
    let n = residuals.len() as f64;
    let sum: f64 = rho
        .iter()
        .enumerate()
        .map(|(i, r)| r * r / (n - (i + 1) as f64))
        .sum();
    Ok(n * (n + 2.0) * sum)
}

/// Upper-tail χ² p-value of a Ljung–Box statistic with `dof` degrees of freedom.
pub fn ljung_box_p_value(q: f64, dof: usize) -> f64 {
    match ChiSquared::new(dof as f64) {
        Ok(chi) => 1.0 - chi.cdf(q),
        Err(_) => f64::NAN,
    }
}
