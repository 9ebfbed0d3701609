//! Seeded synthetic monthly demand with the delayed-summer-reading defect.
//!
//! Truth is `level + slope·year + seasonal[month] + noise` with AR(1) noise
//! across consecutive months. The observed series moves a fraction of each
//! early summer month's consumption into the September reading for the
//! leading corrupted years, so summer totals are unchanged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timegrid::{MonthlySeries, YearMonth};

/// Last month of the corrupted summer block (September).
pub const LAST_SUMMER_MONTH: u32 = 9;

/// Heating-dominated shape: winter ≈ 120 msm³, summer ≈ 12–15 msm³ around a level of 55.
pub const DEFAULT_SEASONAL: [f64; 12] = [
    65.0, 55.0, 35.0, 5.0, -25.0, -38.0, -42.0, -43.0, -40.0, -25.0, 10.0, 43.0,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralBreak {
    /// First ordinal year (1-based) using the post-break parameters.
    pub year: usize,
    pub level: f64,
    pub slope: f64,
    pub seasonal: [f64; 12],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    /// First delayed month; months `m0..=8` leak into September.
    pub m0: u32,
    pub n_corrupt_years: usize,
    /// Fraction of each month `m0..=8` read late, in month order.
    pub delay_fractions: Vec<f64>,
}

impl Default for Corruption {
    fn default() -> Self {
        Self {
            m0: 7,
            n_corrupt_years: 6,
            delay_fractions: vec![0.5, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_years: usize,
    /// Months generated past the last full year.
    pub extra_months: usize,
    pub start_year: u32,
    /// msm³
    pub level: f64,
    /// msm³ per year
    pub slope: f64,
    /// Additive monthly offsets (msm³), summing to zero.
    pub seasonal: [f64; 12],
    /// Marginal standard deviation of the noise (msm³).
    pub noise_std: f64,
    /// Lag-1 autocorrelation of the monthly noise.
    pub noise_ar: f64,
    pub structural_break: Option<StructuralBreak>,
    pub corruption: Option<Corruption>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_years: 9,
            extra_months: 19,
            start_year: 2014,
            level: 55.0,
            slope: 1.5,
            seasonal: DEFAULT_SEASONAL,
            noise_std: 2.5,
            noise_ar: 0.5,
            structural_break: None,
            corruption: Some(Corruption::default()),
            seed: 42,
        }
    }
}

fn check_seasonal(seasonal: &[f64; 12]) -> Result<()> {
    let sum: f64 = seasonal.iter().sum();
    let scale: f64 = seasonal.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if sum.abs() > 1e-9 * scale || seasonal.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "seasonal offsets must be finite and sum to 0 (sum = {sum})"
        )));
    }
    Ok(())
}

impl SynthConfig {
    pub fn total_months(&self) -> usize {
        12 * self.n_years + self.extra_months
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_years == 0 {
            return Err(Error::InvalidConfig("n_years must be >= 1".into()));
        }
        if self.start_year < 1 {
            return Err(Error::InvalidConfig("start_year must be >= 1".into()));
        }
        check_seasonal(&self.seasonal)?;
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::InvalidConfig("noise_std must be >= 0".into()));
        }
        if !(self.noise_ar.is_finite() && self.noise_ar.abs() < 1.0) {
            return Err(Error::InvalidConfig("noise_ar must lie in (-1, 1)".into()));
        }
        if let Some(b) = &self.structural_break {
            check_seasonal(&b.seasonal)?;
            if b.year < 1 {
                return Err(Error::InvalidConfig("break year must be >= 1".into()));
            }
        }
        if let Some(c) = &self.corruption {
            if !(1..=LAST_SUMMER_MONTH).contains(&c.m0) {
                return Err(Error::InvalidConfig(format!("m0 = {} outside 1..=9", c.m0)));
            }
            let expected = (LAST_SUMMER_MONTH - c.m0) as usize;
            if c.delay_fractions.len() != expected {
                return Err(Error::InvalidConfig(format!(
                    "expected {expected} delay fractions for m0 = {}, got {}",
                    c.m0,
                    c.delay_fractions.len()
                )));
            }
            if c.delay_fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return Err(Error::InvalidConfig("delay fractions must lie in [0, 1]".into()));
            }
            if c.n_corrupt_years > self.n_years {
                return Err(Error::InvalidConfig(
                    "more corrupted years than generated years".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub truth: MonthlySeries,
    pub observed: MonthlySeries,
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let n = config.total_months();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let innovation_sd = config.noise_std * (1.0 - config.noise_ar * config.noise_ar).sqrt();
    let mut noise = 0.0;
    let mut truth = Vec::with_capacity(n);
    for t in 0..n {
        let year = t / 12 + 1;
        let month = t % 12;
        let z: f64 = StandardNormal.sample(&mut rng);
        noise = if t == 0 {
            config.noise_std * z
        } else {
            config.noise_ar * noise + innovation_sd * z
        };
        let (level, slope, seasonal) = match &config.structural_break {
            Some(b) if year >= b.year => (b.level, b.slope, &b.seasonal),
            _ => (config.level, config.slope, &config.seasonal),
        };
        let v = level + slope * year as f64 + seasonal[month] + noise;
        truth.push(v.max(0.0));
    }

    let mut observed = truth.clone();
    if let Some(c) = &config.corruption {
        for y in 0..c.n_corrupt_years {
            let sept = y * 12 + (LAST_SUMMER_MONTH as usize - 1);
            if sept >= n {
                break;
            }
            for (k, f) in c.delay_fractions.iter().enumerate() {
                let idx = y * 12 + (c.m0 as usize - 1) + k;
                let shift = f * truth[idx];
                observed[idx] -= shift;
                observed[sept] += shift;
            }
        }
    }
    let start = YearMonth::new(config.start_year, 1)?;
    Ok(SynthOutput {
        truth: MonthlySeries::new(start, truth)?,
        observed: MonthlySeries::new(start, observed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_fractions_leave_truth_untouched() {
        let cfg = SynthConfig {
            corruption: Some(Corruption {
                delay_fractions: vec![0.0, 0.0],
                ..Corruption::default()
            }),
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        assert_eq!(out.truth, out.observed);
    }

    #[test]
    fn summer_totals_conserved() {
        for seed in 0..10 {
            let cfg = SynthConfig {
                seed,
                corruption: Some(Corruption {
                    m0: 6,
                    n_corrupt_years: 6,
                    delay_fractions: vec![0.3, 0.6, 0.45],
                }),
                ..SynthConfig::default()
            };
            let out = generate(&cfg).unwrap();
            for y in 0..cfg.n_years {
                let range = y * 12 + 5..y * 12 + 9;
                let a: f64 = out.truth.values[range.clone()].iter().sum();
                let b: f64 = out.observed.values[range].iter().sum();
                assert!((a - b).abs() <= 1e-9, "year {y}: {a} vs {b}");
                let ta: f64 = out.truth.values[y * 12..y * 12 + 12].iter().sum();
                let tb: f64 = out.observed.values[y * 12..y * 12 + 12].iter().sum();
                assert!((ta - tb).abs() <= 1e-9);
            }
            assert!(out.observed.values.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn corruption_moves_demand_into_september() {
        let out = generate(&SynthConfig::default()).unwrap();
        for y in 0..6 {
            assert!(out.observed.values[y * 12 + 6] < out.truth.values[y * 12 + 6]);
            assert!(out.observed.values[y * 12 + 8] > out.truth.values[y * 12 + 8]);
        }
        for t in 6 * 12..out.truth.len() {
            assert_eq!(out.truth.values[t], out.observed.values[t]);
        }
    }

    #[test]
    fn seed_determinism() {
        let a = generate(&SynthConfig::default()).unwrap();
        let b = generate(&SynthConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig {
            seed: 43,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_ne!(a.truth, c.truth);
    }

    #[test]
    fn noise_free_mean() {
        let cfg = SynthConfig {
            n_years: 10,
            extra_months: 0,
            noise_std: 0.0,
            corruption: None,
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        let mean = out.truth.values.iter().sum::<f64>() / out.truth.len() as f64;
        let expect = cfg.level + cfg.slope * 5.5;
        assert!((mean - expect).abs() <= 1e-9);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = SynthConfig::default();
        cfg.seasonal[0] += 1.0;
        assert!(generate(&cfg).is_err());
        let cfg = SynthConfig {
            corruption: Some(Corruption {
                m0: 7,
                n_corrupt_years: 6,
                delay_fractions: vec![1.2, 0.0],
            }),
            ..SynthConfig::default()
        };
        assert!(generate(&cfg).is_err());
        let cfg = SynthConfig {
            corruption: Some(Corruption {
                m0: 7,
                n_corrupt_years: 6,
                delay_fractions: vec![0.5],
            }),
            ..SynthConfig::default()
        };
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn structural_break_switches_parameters() {
        let cfg = SynthConfig {
            noise_std: 0.0,
            corruption: None,
            structural_break: Some(StructuralBreak {
                year: 7,
                level: 10.0,
                slope: 0.0,
                seasonal: [0.0; 12],
            }),
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        assert!(out.truth.values[6 * 12..].iter().all(|v| *v == 10.0));
        assert!(out.truth.values[0] > 100.0);
    }
}
