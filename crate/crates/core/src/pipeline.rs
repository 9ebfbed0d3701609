//! correct → tune → forecast → benchmark → evaluate on one train/test split.

use serde::{Deserialize, Serialize};

use crate::benchmarks::{run_benchmarks, BenchmarkConfig, BenchmarkRun};
use crate::correction::{correct_summer, CorrectionOptions, CorrectionProblem, CorrectionResult};
use crate::error::{Error, Result};
use crate::gpr::FitOptions;
use crate::jitl::{forecast_horizon, tune, TuneConfig, TuneReport};
use crate::metrics::{evaluate_series, yearly_totals, EvalReport, YearlyTotal};
use crate::timegrid::MonthlySeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrectionSettings {
    pub m0: u32,
    pub n_corrupt_years: usize,
    pub options: CorrectionOptions,
}

impl Default for CorrectionSettings {
    fn default() -> Self {
        Self {
            m0: 7,
            n_corrupt_years: 6,
            options: CorrectionOptions::default(),
        }
    }
}

impl CorrectionSettings {
    pub fn run(&self, series: &MonthlySeries) -> Result<(MonthlySeries, CorrectionResult)> {
        let problem = CorrectionProblem::from_series(series, self.m0, self.n_corrupt_years)?;
        let result = correct_summer(&problem, &self.options)?;
        Ok((result.apply_to(series), result))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Applied to the training series first; `None` skips correction.
    pub correction: Option<CorrectionSettings>,
    pub tuning: TuneConfig,
    pub gp: FitOptions,
    /// `None` skips the benchmark models.
    pub benchmarks: Option<BenchmarkConfig>,
    pub horizon: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            correction: Some(CorrectionSettings::default()),
            tuning: TuneConfig::default(),
            gp: FitOptions::default(),
            benchmarks: Some(BenchmarkConfig::default()),
            horizon: 19,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub model: String,
    pub report: EvalReport,
    pub yearly: Vec<YearlyTotal>,
}

impl ModelEvaluation {
    pub fn new(model: &str, actual: &MonthlySeries, predicted: &MonthlySeries) -> Result<Self> {
        Ok(Self {
            model: model.to_string(),
            report: evaluate_series(actual, predicted)?,
            yearly: yearly_totals(actual, predicted)?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub training: MonthlySeries,
    pub correction: Option<CorrectionResult>,
    pub tune: TuneReport,
    pub jitl_forecast: MonthlySeries,
    pub benchmarks: Option<BenchmarkRun>,
    /// JITL-GPR first, then the benchmarks in configured order.
    pub evaluation: Option<Vec<ModelEvaluation>>,
}

impl PipelineOutput {
    /// Every forecast, JITL-GPR first.
    pub fn forecasts(&self) -> Vec<(&str, &MonthlySeries)> {
        let mut v = vec![("jitl_gpr", &self.jitl_forecast)];
        if let Some(b) = &self.benchmarks {
            v.extend(b.named());
        }
        v
    }
}

pub fn run_pipeline(train: &MonthlySeries, test: Option<&MonthlySeries>, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    if cfg.horizon < 1 {
        return Err(Error::InvalidConfig("horizon must be >= 1".into()));
    }
    if let Some(t) = test {
        if t.start != train.next_ym() {
            return Err(Error::Misaligned(format!(
                "test starts {} but training ends before {}",
                t.start,
                train.next_ym()
            )));
        }
    }
    let (training, correction) = match &cfg.correction {
        Some(c) => {
            let (s, r) = c.run(train)?;
            (s, Some(r))
        }
        None => (train.clone(), None),
    };
    let tune = tune(&training, &cfg.tuning, &cfg.gp)?;
    let jitl_forecast = forecast_horizon(&training, cfg.horizon, &tune.grouping(), &cfg.gp)?;
    let benchmarks = match &cfg.benchmarks {
        Some(b) => Some(run_benchmarks(&training, cfg.horizon, b)?),
        None => None,
    };
    let mut out = PipelineOutput {
        training,
        correction,
        tune,
        jitl_forecast,
        benchmarks,
        evaluation: None,
    };
    if let Some(test) = test {
        let n = test.len().min(cfg.horizon);
        let actual = test.head(n);
        let evaluation = out
            .forecasts()
            .into_iter()
            .map(|(name, f)| ModelEvaluation::new(name, &actual, &f.head(n)))
            .collect::<Result<Vec<_>>>()?;
        out.evaluation = Some(evaluation);
    }
    Ok(out)
}
