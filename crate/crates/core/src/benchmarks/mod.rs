//! Reference forecasting models.

pub mod after;
pub mod ets;
pub mod naive;
pub mod sarima;
pub mod stl;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::timegrid::MonthlySeries;

use self::after::{after_combine, CombinerState};
use self::sarima::SarimaOrder;
use self::stl::{stl_decompose, StlOptions};

/// Holt's linear method fitted by SSE over `α, β ∈ [0, 1]`, started from
/// `L = y₀`, `B = y₁ − y₀`. Returns `L_T + h·B_T` for `h = 1..=horizon`.
pub fn holt_forecast(y: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if y.len() < 3 {
        return Err(Error::InsufficientData {
            found: y.len(),
            needed: 3,
        });
    }
    let run = |alpha: f64, beta: f64| {
        let (mut l, mut b) = (y[0], y[1] - y[0]);
        let mut sse = 0.0;
        for &v in &y[1..] {
            let e = v - (l + b);
            sse += e * e;
            l = l + b + alpha * e;
            b += alpha * beta * e;
        }
        (sse, l, b)
    };
    let objective = |x: &[f64]| {
        let (a, b) = (x[0].clamp(0.0, 1.0), x[1].clamp(0.0, 1.0));
        let outside = (x[0] - a).abs() + (x[1] - b).abs();
        let sse = run(a, b).0;
        sse + outside * (1.0 + sse)
    };
    let opts = NelderMeadOptions {
        max_evals: 400,
        f_tol: 1e-10,
        x_tol: 1e-7,
    };
    let m = nelder_mead(objective, &[0.5, 0.1], &[0.2, 0.1], &opts);
    let (_, l, b) = run(m.x[0].clamp(0.0, 1.0), m.x[1].clamp(0.0, 1.0));
    Ok((1..=horizon).map(|h| l + h as f64 * b).collect())
}

/// Holt forecast of the seasonally adjusted series plus the last seasonal cycle.
pub fn stl_forecast(y: &[f64], horizon: usize, opts: &StlOptions) -> Result<Vec<f64>> {
    let d = stl_decompose(y, opts)?;
    let adjusted = holt_forecast(&d.seasonally_adjusted(), horizon)?;
    let n = y.len();
    Ok(adjusted
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let h = k + 1;
            a + d.seasonal[n + h - 12 * h.div_ceil(12) - 1]
        })
        .collect())
}

/// Replaces points whose STL remainder deviates from the median remainder
/// by more than 3·MAD with trend + seasonal. Returns the cleaned values and
/// the replaced 0-based positions.
pub fn smooth_outliers(y: &[f64], opts: &StlOptions) -> Result<(Vec<f64>, Vec<usize>)> {
    let d = stl_decompose(y, opts)?;
    let median = |v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.total_cmp(b));
        let n = v.len();
        0.5 * (v[(n - 1) / 2] + v[n / 2])
    };
    let med = median(&mut d.remainder.clone());
    let mad = median(&mut d.remainder.iter().map(|r| (r - med).abs()).collect());
    let fitted = d.fitted();
    let mut out = y.to_vec();
    let mut replaced = Vec::new();
    for (t, r) in d.remainder.iter().enumerate() {
        if (r - med).abs() > 3.0 * mad && mad > 0.0 {
            out[t] = fitted[t];
            replaced.push(t);
        }
    }
    Ok((out, replaced))
}

pub fn log_transform(y: &[f64]) -> Result<Vec<f64>> {
    y.iter()
        .enumerate()
        .map(|(i, v)| {
            if *v > 0.0 {
                Ok(v.ln())
            } else {
                Err(Error::DegenerateInput(format!(
                    "log transform needs positive values; value {v} at position {}",
                    i + 1
                )))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    Stl,
    Ets,
    Sarima,
    SeasonalNaive,
}

impl BenchmarkKind {
    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Stl => "stl",
            BenchmarkKind::Ets => "ets",
            BenchmarkKind::Sarima => "sarima",
            BenchmarkKind::SeasonalNaive => "seasonal_naive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub models: Vec<BenchmarkKind>,
    pub stl: StlOptions,
    pub sarima_order: SarimaOrder,
    pub sarima_drift: bool,
    /// Fit on ln(demand) and exponentiate the forecasts.
    pub log_transform: bool,
    pub smooth_outliers: bool,
    /// Observations used before the first one-step forecast that trains the
    /// combiner weights.
    pub after_warmup: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            models: vec![
                BenchmarkKind::Stl,
                BenchmarkKind::Ets,
                BenchmarkKind::Sarima,
                BenchmarkKind::SeasonalNaive,
            ],
            stl: StlOptions::default(),
            sarima_order: SarimaOrder::new(1, 0, 0, 2, 1, 0),
            sarima_drift: false,
            log_transform: false,
            smooth_outliers: false,
            after_warmup: 35,
        }
    }
}

/// Forecast from one model, with the optional log transform applied around it.
/// Returns the forecasts and any fit warnings.
pub fn forecast_model(
    kind: BenchmarkKind,
    y: &[f64],
    horizon: usize,
    cfg: &BenchmarkConfig,
) -> Result<(Vec<f64>, Vec<String>)> {
    let work = if cfg.log_transform {
        log_transform(y)?
    } else {
        y.to_vec()
    };
    let mut warnings = Vec::new();
    let f = match kind {
        BenchmarkKind::Stl => stl_forecast(&work, horizon, &cfg.stl)?,
        BenchmarkKind::Ets => {
            let p = ets::ets_fit(&work, None)?;
            ets::ets_forecast(&p, &work, horizon)
        }
        BenchmarkKind::Sarima => {
            let spec = sarima::sarima_fit(&work, cfg.sarima_order, cfg.sarima_drift)?;
            if spec.nonstationary {
                warnings.push("sarima: fitted AR polynomial has a root inside the unit circle".into());
            }
            if spec.noninvertible {
                warnings.push("sarima: fitted MA polynomial has a root inside the unit circle".into());
            }
            sarima::sarima_forecast(&spec, &work, horizon)?
        }
        BenchmarkKind::SeasonalNaive => naive::seasonal_naive(&work, horizon)?,
    };
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput(format!("{} produced a non-finite forecast", kind.name())));
    }
    let f = if cfg.log_transform {
        f.into_iter().map(f64::exp).collect()
    } else {
        f
    };
    Ok((f, warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelForecast {
    pub kind: BenchmarkKind,
    pub forecast: MonthlySeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfterRun {
    pub members: Vec<BenchmarkKind>,
    /// One-step forecasts from the warm-up onward, per member.
    pub one_step: Vec<Vec<f64>>,
    pub one_step_combined: Vec<f64>,
    pub state: CombinerState,
    pub forecast: MonthlySeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub models: Vec<ModelForecast>,
    pub after: Option<AfterRun>,
    pub outliers_replaced: Vec<usize>,
    pub warnings: Vec<String>,
}

impl BenchmarkRun {
    /// Forecasts keyed by model name, the combination last (as `after`).
    pub fn named(&self) -> Vec<(&'static str, &MonthlySeries)> {
        let mut v: Vec<(&'static str, &MonthlySeries)> =
            self.models.iter().map(|m| (m.kind.name(), &m.forecast)).collect();
        if let Some(a) = &self.after {
            v.push(("after", &a.forecast));
        }
        v
    }
}

/// Fits every configured model on `history` and forecasts `horizon` months.
/// With two or more models the combiner is trained on rolling one-step
/// forecasts after the warm-up and applied with its final weights.
pub fn run_benchmarks(history: &MonthlySeries, horizon: usize, cfg: &BenchmarkConfig) -> Result<BenchmarkRun> {
    if horizon < 1 {
        return Err(Error::InvalidConfig("horizon must be >= 1".into()));
    }
    if cfg.models.is_empty() {
        return Err(Error::InvalidConfig("no benchmark models selected".into()));
    }
    cfg.sarima_order.validate()?;
    let (y, outliers_replaced) = if cfg.smooth_outliers {
        smooth_outliers(&history.values, &cfg.stl)?
    } else {
        (history.values.clone(), Vec::new())
    };
    let start = history.next_ym();
    let mut warnings = Vec::new();
    let mut models = Vec::new();
    for &kind in &cfg.models {
        let (f, w) = forecast_model(kind, &y, horizon, cfg)?;
        warnings.extend(w);
        models.push(ModelForecast {
            kind,
            forecast: MonthlySeries { start, values: f },
        });
    }
    let after = if cfg.models.len() >= 2 {
        let n = y.len();
        if cfg.after_warmup >= n {
            return Err(Error::InsufficientHistory {
                found: n,
                needed: cfg.after_warmup + 1,
            });
        }
        let mut one_step = Vec::new();
        for &kind in &cfg.models {
            let stream = (cfg.after_warmup..n)
                .map(|k| forecast_model(kind, &y[..k], 1, cfg).map(|(f, _)| f[0]))
                .collect::<Result<Vec<f64>>>()?;
            one_step.push(stream);
        }
        let trained = after_combine(&one_step, &y[cfg.after_warmup..])?;
        let streams: Vec<Vec<f64>> = models.iter().map(|m| m.forecast.values.clone()).collect();
        let values = (0..horizon)
            .map(|h| {
                let f: Vec<f64> = streams.iter().map(|s| s[h]).collect();
                trained.state.combine(&f)
            })
            .collect();
        Some(AfterRun {
            members: cfg.models.clone(),
            one_step,
            one_step_combined: trained.combined,
            state: trained.state,
            forecast: MonthlySeries { start, values },
        })
    } else {
        None
    };
    Ok(BenchmarkRun {
        models,
        after,
        outliers_replaced,
        warnings,
    })
}
