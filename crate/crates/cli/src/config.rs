//! Run configuration: one JSON document, every key optional.

use std::path::{Path, PathBuf};

use gasjitl::benchmarks::BenchmarkConfig;
use gasjitl::gpr::FitOptions;
use gasjitl::jitl::{TuneConfig, WindowPair};
use gasjitl::pipeline::{CorrectionSettings, PipelineConfig};
use gasjitl::synth::SynthConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::read_to_string;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `date,demand` CSV used by every command that reads a series.
    pub input: Option<PathBuf>,
    /// Held-out actuals for the `pipeline` command.
    pub test_input: Option<PathBuf>,
    /// Calendar year of ordinal year 1. Sets the first synthetic year and is
    /// checked against the first row of ingested series.
    pub anchor_year: Option<u32>,
    pub horizon: usize,
    pub output_dir: PathBuf,
    /// Overrides `synth.seed` and `correction.options.seed`.
    pub seed: Option<u64>,
    pub synth: SynthConfig,
    /// `null` disables correction in the `pipeline` command.
    pub correction: Option<CorrectionSettings>,
    pub tuning: TuneConfig,
    pub gp: FitOptions,
    pub benchmarks: BenchmarkConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            test_input: None,
            anchor_year: None,
            horizon: 19,
            output_dir: PathBuf::from("out"),
            seed: None,
            synth: SynthConfig::default(),
            correction: Some(CorrectionSettings::default()),
            tuning: TuneConfig::default(),
            gp: FitOptions::default(),
            benchmarks: BenchmarkConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_to_string(path).map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Applies the seed override and checks cross-field invariants.
    pub fn finalize(mut self) -> CliResult<Self> {
        if let Some(seed) = self.seed {
            self.synth.seed = seed;
            if let Some(c) = self.correction.as_mut() {
                c.options.seed = seed;
            }
        }
        if let Some(year) = self.anchor_year {
            self.synth.start_year = year;
        }
        if self.horizon < 1 {
            return Err(CliError::Config("horizon must be >= 1".into()));
        }
        if self.tuning.years.is_empty() || self.tuning.months.is_empty() {
            return Err(CliError::Config("tuning grid must be nonempty".into()));
        }
        for &y in &self.tuning.years {
            for &m in &self.tuning.months {
                WindowPair::new(y, m).map_err(|e| CliError::Config(format!("tuning grid: {e}")))?;
            }
        }
        if self.tuning.buffer < 1 {
            return Err(CliError::Config("tuning buffer must be >= 1".into()));
        }
        self.synth.validate()?;
        Ok(self)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            correction: self.correction,
            tuning: self.tuning.clone(),
            gp: self.gp,
            benchmarks: Some(self.benchmarks.clone()),
            horizon: self.horizon,
        }
    }

    pub fn require_input(&self) -> CliResult<&Path> {
        let p = self
            .input
            .as_deref()
            .ok_or_else(|| CliError::Config("no input file given (use --input or the `input` key)".into()))?;
        if !p.exists() {
            return Err(CliError::Data(format!("input file {} does not exist", p.display())));
        }
        Ok(p)
    }
}
