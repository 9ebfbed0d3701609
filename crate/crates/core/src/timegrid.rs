//! Linear observation indices and (year, month) grid coordinates.
//!
//! Index `n` (1-based) is the n-th observation of a series; year and month
//! are ordinals relative to the first observation, so index 1 is (1, 1) and
//! index 13 is (2, 1). December of one year and January of the next are one
//! index apart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A (year, month) grid coordinate. `year` is an ordinal (or a calendar
/// year, when carried by a [`MonthlySeries`] start), `month` is 1..=12.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: u32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: u32, month: u32) -> Result<Self> {
        if year < 1 || !(1..=12).contains(&month) {
            return Err(Error::InvalidYearMonth {
                year: year as i64,
                month: month as i64,
            });
        }
        Ok(Self { year, month })
    }

    /// The coordinate `months` months later.
    pub fn add_months(self, months: u32) -> Self {
        let zero_based = (self.year as u64) * 12 + (self.month as u64 - 1) + months as u64;
        Self {
            year: (zero_based / 12) as u32,
            month: (zero_based % 12) as u32 + 1,
        }
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: YearMonth) -> i64 {
        (other.year as i64 - self.year as i64) * 12 + (other.month as i64 - self.month as i64)
    }
}

impl std::fmt::Display for YearMonth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// Maps a 1-based linear index to its ordinal (year, month).
pub fn index_to_ym(n: i64) -> Result<YearMonth> {
    if n < 1 {
        return Err(Error::InvalidIndex(n));
    }
    let year = (n + 11) / 12;
    let month = (n - 1) % 12 + 1;
    Ok(YearMonth {
        year: year as u32,
        month: month as u32,
    })
}

/// Inverse of [`index_to_ym`].
pub fn ym_to_index(ym: YearMonth) -> i64 {
    (ym.year as i64 - 1) * 12 + ym.month as i64
}

/// Index of the observation `years_back` years and `months_back` months
/// before `q`.
pub fn lag_index(q: i64, years_back: u32, months_back: u32) -> Result<i64> {
    let n = q - 12 * years_back as i64 - months_back as i64;
    if n < 1 {
        return Err(Error::OutOfHistory(n));
    }
    Ok(n)
}

/// Contiguous monthly observations (msm³) anchored at `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    pub start: YearMonth,
    pub values: Vec<f64>,
}

impl MonthlySeries {
    pub fn new(start: YearMonth, values: Vec<f64>) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "value {} of series starting {start} is not finite",
                k + 1
            )));
        }
        Ok(Self { start, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Calendar coordinate of the observation at 0-based position `k`.
    pub fn ym_at(&self, k: usize) -> YearMonth {
        self.start.add_months(k as u32)
    }

    /// Calendar month (1..=12) of the observation with 1-based index `n`.
    pub fn month_of_index(&self, n: usize) -> u32 {
        self.ym_at(n - 1).month
    }

    /// Coordinate one month past the last observation.
    pub fn next_ym(&self) -> YearMonth {
        self.ym_at(self.values.len())
    }

    /// The first `len` observations.
    pub fn head(&self, len: usize) -> MonthlySeries {
        MonthlySeries {
            start: self.start,
            values: self.values[..len.min(self.values.len())].to_vec(),
        }
    }

    /// Observations from 0-based position `from` to the end.
    pub fn tail_from(&self, from: usize) -> MonthlySeries {
        MonthlySeries {
            start: self.ym_at(from),
            values: self.values[from.min(self.values.len())..].to_vec(),
        }
    }
}
