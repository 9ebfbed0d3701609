use crate::error::{Error, Result};

/// `ŷ_{T+h} = y_{T+h−12·⌈h/12⌉}`.
pub fn seasonal_naive(y: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let n = y.len();
    if n < 12 {
        return Err(Error::InsufficientData { found: n, needed: 12 });
    }
    Ok((1..=horizon).map(|h| y[n + h - 12 * h.div_ceil(12) - 1]).collect())
}
