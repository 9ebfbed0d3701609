use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use gasjitl::benchmarks::stl::stl_decompose;
use gasjitl::benchmarks::{run_benchmarks, BenchmarkKind, BenchmarkRun};
use gasjitl::jitl::{forecast_horizon, tune, GroupingMode, TuneReport};
use gasjitl::pipeline::{run_pipeline, ModelEvaluation};
use gasjitl::{synth, MonthlySeries};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{
    ingest_csv, json_bytes, read_forecast_csv, read_to_string, rows_csv, series_csv, write_atomic,
};
use crate::report::{evaluation_table, plot_rows, residuals, tune_table};

#[derive(Debug, Parser)]
#[command(name = "gasjitl", version, about = "Monthly natural-gas demand forecasting with JITL-GPR")]
pub struct Cli {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving the artifacts.
    #[arg(long, short = 'o', global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GroupingArg {
    Fixed,
    Auto,
}

#[derive(Debug, clap::Args)]
pub struct TuneArgs {
    /// Leading observations never predicted during tuning.
    #[arg(long)]
    pub buffer: Option<usize>,
    #[arg(long, value_enum)]
    pub grouping: Option<GroupingArg>,
    /// Correlation threshold for automatic grouping.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic truth/observed pair and its train/test split.
    Synth {
        #[arg(long)]
        years: Option<usize>,
        /// Months generated after the last full year (the test span).
        #[arg(long)]
        extra_months: Option<usize>,
    },
    /// Correct delayed summer readings.
    Correct {
        #[arg(long, short)]
        input: Option<PathBuf>,
        #[arg(long)]
        m0: Option<u32>,
        #[arg(long)]
        corrupt_years: Option<usize>,
    },
    /// Grid-search the local windows and write the RMSE surfaces.
    Tune {
        #[arg(long, short)]
        input: Option<PathBuf>,
        #[command(flatten)]
        tuning: TuneArgs,
    },
    /// Tune, then forecast with JITL-GPR.
    Forecast {
        #[arg(long, short)]
        input: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Reuse the windows of an earlier `tune` run instead of tuning.
        #[arg(long)]
        tune_report: Option<PathBuf>,
        #[command(flatten)]
        tuning: TuneArgs,
    },
    /// Forecast with the benchmark models and their combination.
    Benchmark {
        #[arg(long, short)]
        input: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Comma-separated subset of stl, ets, sarima, seasonal_naive.
        #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
        models: Option<Vec<BenchmarkKind>>,
        #[arg(long)]
        log_transform: bool,
        #[arg(long)]
        smooth_outliers: bool,
    },
    /// Score forecasts against actuals.
    Evaluate {
        #[arg(long)]
        actual: PathBuf,
        /// `NAME=PATH` or `PATH` (named after the file stem); repeatable.
        #[arg(long, required = true)]
        forecast: Vec<String>,
    },
    /// Write long-format plot data: series, STL components, forecasts, residuals.
    Report {
        #[arg(long, short)]
        input: Option<PathBuf>,
        #[arg(long)]
        actual: Option<PathBuf>,
        #[arg(long)]
        forecast: Vec<String>,
    },
    /// correct → tune → forecast → benchmark → evaluate → report.
    Pipeline {
        #[arg(long, short)]
        input: Option<PathBuf>,
        /// Actuals for the forecast horizon.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
    },
}

fn parse_kind(s: &str) -> Result<BenchmarkKind, String> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
        .map_err(|_| format!("unknown model `{s}` (expected stl, ets, sarima, seasonal_naive)"))
}

fn apply_tune_args(cfg: &mut RunConfig, a: &TuneArgs) {
    if let Some(b) = a.buffer {
        cfg.tuning.buffer = b;
    }
    match (a.grouping, a.threshold) {
        (Some(GroupingArg::Fixed), _) => cfg.tuning.grouping = GroupingMode::default(),
        (Some(GroupingArg::Auto), t) => {
            cfg.tuning.grouping = GroupingMode::Auto {
                threshold: t.unwrap_or(0.8),
            }
        }
        (None, Some(t)) => {
            if let GroupingMode::Auto { threshold } = &mut cfg.tuning.grouping {
                *threshold = t;
            }
        }
        (None, None) => {}
    }
}

/// Builds the effective configuration: file, then flags.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &cli.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    match &cli.command {
        Command::Synth { years, extra_months } => {
            if let Some(y) = years {
                cfg.synth.n_years = *y;
            }
            if let Some(m) = extra_months {
                cfg.synth.extra_months = *m;
            }
        }
        Command::Correct {
            input,
            m0,
            corrupt_years,
        } => {
            set_input(&mut cfg, input);
            let c = cfg.correction.get_or_insert_with(Default::default);
            if let Some(m) = m0 {
                c.m0 = *m;
            }
            if let Some(n) = corrupt_years {
                c.n_corrupt_years = *n;
            }
        }
        Command::Tune { input, tuning } => {
            set_input(&mut cfg, input);
            apply_tune_args(&mut cfg, tuning);
        }
        Command::Forecast {
            input,
            horizon,
            tuning,
            ..
        } => {
            set_input(&mut cfg, input);
            set_horizon(&mut cfg, horizon);
            apply_tune_args(&mut cfg, tuning);
        }
        Command::Benchmark {
            input,
            horizon,
            models,
            log_transform,
            smooth_outliers,
        } => {
            set_input(&mut cfg, input);
            set_horizon(&mut cfg, horizon);
            if let Some(m) = models {
                cfg.benchmarks.models = m.clone();
            }
            cfg.benchmarks.log_transform |= *log_transform;
            cfg.benchmarks.smooth_outliers |= *smooth_outliers;
        }
        Command::Evaluate { .. } => {}
        Command::Report { input, .. } => set_input(&mut cfg, input),
        Command::Pipeline {
            input,
            test,
            horizon,
        } => {
            set_input(&mut cfg, input);
            if test.is_some() {
                cfg.test_input = test.clone();
            }
            set_horizon(&mut cfg, horizon);
        }
    }
    cfg.finalize()
}

fn set_input(cfg: &mut RunConfig, input: &Option<PathBuf>) {
    if input.is_some() {
        cfg.input = input.clone();
    }
}

fn set_horizon(cfg: &mut RunConfig, horizon: &Option<usize>) {
    if let Some(h) = horizon {
        cfg.horizon = *h;
    }
}

/// Artifacts are staged in memory and written only after every computation
/// has succeeded.
struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        self.add(name, json_bytes(value)?);
        Ok(())
    }

    fn series(&mut self, name: impl Into<String>, s: &MonthlySeries, column: &str) -> CliResult<()> {
        self.add(name, series_csv(s, column)?);
        Ok(())
    }

    fn write(self) -> CliResult<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (name, bytes) in self.files {
            let path = self.dir.join(name);
            write_atomic(&path, &bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn load_input(cfg: &RunConfig) -> CliResult<MonthlySeries> {
    let series = ingest_csv(cfg.require_input()?)?;
    if let Some(year) = cfg.anchor_year {
        if series.start.year != year {
            return Err(CliError::Config(format!(
                "input starts in {} but anchor_year is {year}",
                series.start.year
            )));
        }
    }
    Ok(series)
}

fn named_forecast(spec: &str) -> CliResult<(String, MonthlySeries)> {
    let (name, path) = match spec.split_once('=') {
        Some((n, p)) => (n.to_string(), PathBuf::from(p)),
        None => {
            let p = PathBuf::from(spec);
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.to_string());
            (stem, p)
        }
    };
    if !path.exists() {
        return Err(CliError::Config(format!("forecast file {} does not exist", path.display())));
    }
    Ok((name, read_forecast_csv(&path)?))
}

fn evaluation_artifacts(out: &mut Artifacts, evals: &[ModelEvaluation]) -> CliResult<String> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    out.add(
        "evaluation.csv",
        rows_csv(
            &["model", "n", "mae", "rmse", "mape", "yearly_pe"],
            evals.iter().map(|e| {
                vec![
                    e.model.clone(),
                    e.report.n.to_string(),
                    e.report.mae.to_string(),
                    e.report.rmse.to_string(),
                    e.report.mape.to_string(),
                    opt(e.report.yearly_pe),
                ]
            }),
        )?,
    );
    out.add(
        "evaluation_yearly.csv",
        rows_csv(
            &["model", "year", "months", "actual_total", "predicted_total", "pe"],
            evals.iter().flat_map(|e| {
                e.yearly.iter().map(move |t| {
                    vec![
                        e.model.clone(),
                        t.year.to_string(),
                        t.months.to_string(),
                        t.actual_total.to_string(),
                        t.predicted_total.to_string(),
                        t.pe.to_string(),
                    ]
                })
            }),
        )?,
    );
    out.json("evaluation.json", &evals)?;
    let table = evaluation_table(evals);
    out.add("evaluation.txt", table.clone().into_bytes());
    Ok(table)
}

fn benchmark_artifacts(out: &mut Artifacts, run: &BenchmarkRun) -> CliResult<()> {
    for (name, f) in run.named() {
        out.series(format!("forecast_{name}.csv"), f, "forecast")?;
    }
    out.json("benchmark.json", run)
}

fn tune_artifacts(out: &mut Artifacts, report: &TuneReport) -> CliResult<()> {
    out.json("tune.json", report)?;
    out.add("tune.txt", tune_table(report).into_bytes());
    Ok(())
}

fn plot_data(
    observed: &MonthlySeries,
    extra: &[(&str, &MonthlySeries)],
    forecasts: &[(String, MonthlySeries)],
    actual: Option<&MonthlySeries>,
) -> CliResult<Vec<u8>> {
    let mut rows = plot_rows("observed", observed);
    for (name, s) in extra {
        rows.extend(plot_rows(name, s));
    }
    if let Ok(d) = stl_decompose(&observed.values, &Default::default()) {
        for (name, v) in [("stl_trend", d.trend), ("stl_seasonal", d.seasonal), ("stl_remainder", d.remainder)] {
            rows.extend(plot_rows(name, &MonthlySeries { start: observed.start, values: v }));
        }
    }
    if let Some(a) = actual {
        rows.extend(plot_rows("actual", a));
    }
    for (name, f) in forecasts {
        rows.extend(plot_rows(&format!("forecast:{name}"), f));
        if let Some(r) = actual.and_then(|a| residuals(a, f)) {
            rows.extend(plot_rows(&format!("residual:{name}"), &r));
        }
    }
    rows_csv(&["series", "date", "value"], rows.into_iter().map(Vec::from))
}

/// Runs one command; returns the written paths.
pub fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let cfg = resolve_config(cli)?;
    let mut out = Artifacts::new(&cfg.output_dir);
    match &cli.command {
        Command::Synth { .. } => {
            let g = synth::generate(&cfg.synth)?;
            let split = 12 * cfg.synth.n_years;
            out.series("truth.csv", &g.truth, "demand")?;
            out.series("observed.csv", &g.observed, "demand")?;
            out.series("train.csv", &g.observed.head(split), "demand")?;
            if cfg.synth.extra_months > 0 {
                out.series("test.csv", &g.observed.tail_from(split), "demand")?;
            }
        }
        Command::Correct { .. } => {
            let series = load_input(&cfg)?;
            let settings = cfg.correction.unwrap_or_default();
            let (corrected, result) = settings.run(&series)?;
            out.series("corrected.csv", &corrected, "demand")?;
            out.json("correction.json", &result)?;
            println!(
                "corrected {} cells: objective {:.6} (raw {:.6}), converged = {}",
                settings.n_corrupt_years * (10 - settings.m0 as usize),
                result.objective_value,
                result.raw_objective,
                result.converged
            );
        }
        Command::Tune { .. } => {
            let series = load_input(&cfg)?;
            let report = tune(&series, &cfg.tuning, &cfg.gp)?;
            print!("{}", tune_table(&report));
            tune_artifacts(&mut out, &report)?;
        }
        Command::Forecast { tune_report, .. } => {
            let series = load_input(&cfg)?;
            let report: TuneReport = match tune_report {
                Some(p) => serde_json::from_str(&read_to_string(p).map_err(|e| CliError::Config(e.to_string()))?)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
                None => {
                    let r = tune(&series, &cfg.tuning, &cfg.gp)?;
                    tune_artifacts(&mut out, &r)?;
                    r
                }
            };
            let grouping = gasjitl::jitl::MonthGrouping::new(report.grouping().groups)?;
            let f = forecast_horizon(&series, cfg.horizon, &grouping, &cfg.gp)?;
            out.series("forecast.csv", &f, "forecast")?;
        }
        Command::Benchmark { .. } => {
            let series = load_input(&cfg)?;
            let run = run_benchmarks(&series, cfg.horizon, &cfg.benchmarks)?;
            for w in &run.warnings {
                eprintln!("warning: {w}");
            }
            benchmark_artifacts(&mut out, &run)?;
        }
        Command::Evaluate { actual, forecast } => {
            if !actual.exists() {
                return Err(CliError::Config(format!("actual file {} does not exist", actual.display())));
            }
            let actual = ingest_csv(actual)?;
            let evals = forecast
                .iter()
                .map(|spec| {
                    let (name, f) = named_forecast(spec)?;
                    let offset = actual.start.months_until(f.start);
                    if offset < 0 || offset as usize + f.len() > actual.len() {
                        return Err(CliError::Data(format!(
                            "forecast `{name}` ({} .. {} months) is not covered by the actuals",
                            f.start,
                            f.len()
                        )));
                    }
                    let a = actual.tail_from(offset as usize).head(f.len());
                    Ok(ModelEvaluation::new(&name, &a, &f)?)
                })
                .collect::<CliResult<Vec<_>>>()?;
            print!("{}", evaluation_artifacts(&mut out, &evals)?);
        }
        Command::Report { actual, forecast, .. } => {
            let series = load_input(&cfg)?;
            let forecasts = forecast.iter().map(|s| named_forecast(s)).collect::<CliResult<Vec<_>>>()?;
            let actual = actual.as_deref().map(ingest_csv).transpose()?;
            out.add("plot_data.csv", plot_data(&series, &[], &forecasts, actual.as_ref())?);
        }
        Command::Pipeline { .. } => {
            let train = load_input(&cfg)?;
            let test = match &cfg.test_input {
                Some(p) if !p.exists() => {
                    return Err(CliError::Config(format!("test file {} does not exist", p.display())))
                }
                Some(p) => Some(ingest_csv(p)?),
                None => None,
            };
            let result = run_pipeline(&train, test.as_ref(), &cfg.pipeline())?;
            if let Some(c) = &result.correction {
                out.series("corrected.csv", &result.training, "demand")?;
                out.json("correction.json", c)?;
            }
            tune_artifacts(&mut out, &result.tune)?;
            out.series("forecast.csv", &result.jitl_forecast, "forecast")?;
            if let Some(b) = &result.benchmarks {
                for w in &b.warnings {
                    eprintln!("warning: {w}");
                }
                benchmark_artifacts(&mut out, b)?;
            }
            if let Some(evals) = &result.evaluation {
                print!("{}", evaluation_artifacts(&mut out, evals)?);
            }
            let one_step = MonthlySeries {
                start: result.training.ym_at(result.tune.first_index - 1),
                values: result.tune.one_step_predictions.clone(),
            };
            let mut extra: Vec<(&str, &MonthlySeries)> = Vec::new();
            if result.correction.is_some() {
                extra.push(("corrected", &result.training));
            }
            extra.push(("jitl_one_step", &one_step));
            let one_step_resid = residuals(&result.training, &one_step);
            if let Some(r) = &one_step_resid {
                extra.push(("residual:jitl_one_step", r));
            }
            let forecasts: Vec<(String, MonthlySeries)> = result
                .forecasts()
                .into_iter()
                .map(|(n, f)| (n.to_string(), f.clone()))
                .collect();
            out.add("plot_data.csv", plot_data(&train, &extra, &forecasts, test.as_ref())?);
        }
    }
    out.write()
}
