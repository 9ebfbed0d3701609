//! Just-in-time-learning GP forecasting on the year × month grid.
//!
//! For a query index `q` the local training set holds the `W_m − 1` months
//! just before `q` and, for each of the `W_y − 1` previous years, the run of
//! `W_m` months ending at the query's calendar month. Every entry is encoded
//! by its (year, month) offset from the query, so the query itself sits at
//! `(0, 0)`; features and response are z-scored within the local set and a
//! fresh GP is fitted per query.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpr::{self, Feature, FitOptions};
use crate::timegrid::MonthlySeries;

/// Smallest local set a GP is fitted on.
pub const MIN_LOCAL: usize = 3;

/// Local window: `years` (W_y) and `months` (W_m).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowPair {
    pub years: usize,
    pub months: usize,
}

impl WindowPair {
    pub fn new(years: usize, months: usize) -> Result<Self> {
        if years < 1 || !(1..=12).contains(&months) || years * months < MIN_LOCAL + 1 {
            return Err(Error::InvalidConfig(format!(
                "window ({years}, {months}) must have W_y >= 1, 1 <= W_m <= 12 and W_y*W_m - 1 >= {MIN_LOCAL}"
            )));
        }
        Ok(Self { years, months })
    }

    /// Local-set size when the full history is available.
    pub fn capacity(&self) -> usize {
        self.years * self.months - 1
    }
}

/// 1-based indices of the local training set for query `q`, ascending.
/// Indices below 1 or above `available` are dropped.
pub fn select_local(available: usize, q: usize, w: WindowPair) -> Result<Vec<usize>> {
    if q < 2 {
        return Err(Error::InsufficientHistory {
            found: 0,
            needed: MIN_LOCAL,
        });
    }
    let q = q as i64;
    let mut out = Vec::with_capacity(w.capacity());
    for i in 1..w.months as i64 {
        out.push(q - i);
    }
    for j in 1..w.years as i64 {
        for i in 0..w.months as i64 {
            out.push(q - 12 * j - i);
        }
    }
    let mut out: Vec<usize> = out
        .into_iter()
        .filter(|&n| n >= 1 && n <= available as i64 && n < q)
        .map(|n| n as usize)
        .collect();
    out.sort_unstable();
    out.dedup();
    if out.len() < MIN_LOCAL {
        return Err(Error::InsufficientHistory {
            found: out.len(),
            needed: MIN_LOCAL,
        });
    }
    Ok(out)
}

/// `(year_offset, month_offset)` of index `n` relative to query `q`.
pub fn offsets(q: usize, n: usize) -> (i64, i64) {
    let d = q as i64 - n as i64;
    (-(d.div_euclid(12)), -(d.rem_euclid(12)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalEntry {
    pub year_offset: i64,
    pub month_offset: i64,
    /// msm³
    pub demand: f64,
}

/// Location and scale used for z-scoring one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub mean: f64,
    pub std: f64,
}

impl ZScore {
    /// Sample mean and standard deviation; a std below 1e-12 is replaced by 1.
    pub fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = if n > 1.0 {
            values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std = var.sqrt();
        Self {
            mean,
            std: if std < 1e-12 { 1.0 } else { std },
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTrainingSet {
    pub entries: Vec<LocalEntry>,
    pub year_scale: ZScore,
    pub month_scale: ZScore,
    /// Demand of the first entry; the demand scale is fitted to
    /// `demand - demand_anchor` so that shifting all demands leaves the
    /// scaled responses unchanged bit for bit whenever the shift is exact.
    pub demand_anchor: f64,
    pub demand_scale: ZScore,
}

impl LocalTrainingSet {
    pub fn features(&self) -> Vec<Feature> {
        self.entries
            .iter()
            .map(|e| {
                [
                    self.year_scale.apply(e.year_offset as f64),
                    self.month_scale.apply(e.month_offset as f64),
                ]
            })
            .collect()
    }

    pub fn responses(&self) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| self.demand_scale.apply(e.demand - self.demand_anchor))
            .collect()
    }

    /// Maps a scaled prediction back to msm³.
    pub fn unscale(&self, z: f64) -> f64 {
        self.demand_scale.invert(z) + self.demand_anchor
    }

    /// The query's `(0, 0)` offsets in scaled coordinates.
    pub fn query_features(&self) -> Feature {
        [self.year_scale.apply(0.0), self.month_scale.apply(0.0)]
    }
}

/// Encodes `indices` (1-based into `values`) relative to query `q`.
pub fn encode(indices: &[usize], values: &[f64], q: usize) -> Result<LocalTrainingSet> {
    if indices.len() < MIN_LOCAL {
        return Err(Error::InsufficientHistory {
            found: indices.len(),
            needed: MIN_LOCAL,
        });
    }
    let entries: Vec<LocalEntry> = indices
        .iter()
        .map(|&n| {
            let (year_offset, month_offset) = offsets(q, n);
            LocalEntry {
                year_offset,
                month_offset,
                demand: values[n - 1],
            }
        })
        .collect();
    let anchor = entries[0].demand;
    Ok(LocalTrainingSet {
        year_scale: ZScore::of(entries.iter().map(|e| e.year_offset as f64)),
        month_scale: ZScore::of(entries.iter().map(|e| e.month_offset as f64)),
        demand_anchor: anchor,
        demand_scale: ZScore::of(entries.iter().map(|e| e.demand - anchor)),
        entries,
    })
}

/// Predicts index `q` from `values[..q-1]` with a GP fitted on the local set.
/// The result is clamped at zero.
pub fn forecast_one(values: &[f64], q: usize, w: WindowPair, fit: &FitOptions) -> Result<f64> {
    let available = values.len().min(q.saturating_sub(1));
    let indices = select_local(available, q, w)?;
    let local = encode(&indices, values, q)?;
    let model = gpr::fit(&local.features(), &local.responses(), fit)?;
    let (mean, _) = model.predict(&local.query_features());
    Ok(local.unscale(mean).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthGroup {
    /// Calendar months (1..=12) in cyclic order.
    pub months: Vec<u32>,
    pub window: WindowPair,
}

/// Partition of the calendar months into contiguous (cyclic) runs, each
/// sharing one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthGrouping {
    pub groups: Vec<MonthGroup>,
}

/// Jan–May, Jun–Sep, Oct–Dec.
pub fn default_month_groups() -> Vec<Vec<u32>> {
    vec![vec![1, 2, 3, 4, 5], vec![6, 7, 8, 9], vec![10, 11, 12]]
}

pub fn validate_partition(groups: &[Vec<u32>]) -> Result<()> {
    let mut seen = [false; 12];
    for g in groups {
        if g.is_empty() {
            return Err(Error::InvalidConfig("empty month group".into()));
        }
        for (k, &m) in g.iter().enumerate() {
            if !(1..=12).contains(&m) {
                return Err(Error::InvalidConfig(format!("month {m} outside 1..=12")));
            }
            if seen[m as usize - 1] {
                return Err(Error::InvalidConfig(format!("month {m} appears twice")));
            }
            seen[m as usize - 1] = true;
            if k > 0 && m != g[k - 1] % 12 + 1 {
                return Err(Error::InvalidConfig(format!(
                    "group {g:?} is not a contiguous run of months"
                )));
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidConfig("month groups must cover all 12 months".into()));
    }
    Ok(())
}

impl MonthGrouping {
    pub fn new(groups: Vec<MonthGroup>) -> Result<Self> {
        let months: Vec<Vec<u32>> = groups.iter().map(|g| g.months.clone()).collect();
        validate_partition(&months)?;
        Ok(Self { groups })
    }

    /// One window for every month.
    pub fn uniform(w: WindowPair) -> Self {
        Self {
            groups: vec![MonthGroup {
                months: (1..=12).collect(),
                window: w,
            }],
        }
    }

    pub fn group_of(&self, month: u32) -> usize {
        self.groups
            .iter()
            .position(|g| g.months.contains(&month))
            .expect("validated grouping covers every month")
    }

    pub fn window_for(&self, month: u32) -> WindowPair {
        self.groups[self.group_of(month)].window
    }
}

/// Iterated multi-step forecast: each prediction joins the history used by
/// the next step.
pub fn forecast_horizon(
    history: &MonthlySeries,
    horizon: usize,
    grouping: &MonthGrouping,
    fit: &FitOptions,
) -> Result<MonthlySeries> {
    if horizon < 1 {
        return Err(Error::InvalidConfig("horizon must be >= 1".into()));
    }
    let mut values = history.values.clone();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let q = values.len() + 1;
        let month = history.ym_at(q - 1).month;
        let pred = forecast_one(&values, q, grouping.window_for(month), fit)?;
        values.push(pred);
        out.push(pred);
    }
    Ok(MonthlySeries {
        start: history.next_ym(),
        values: out,
    })
}

/// Rolling-origin one-step predictions for indices `from..=to` of `series`,
/// revealing the actual value after each prediction.
pub fn one_step_with_actuals(
    series: &MonthlySeries,
    from: usize,
    to: usize,
    grouping: &MonthGrouping,
    fit: &FitOptions,
) -> Result<Vec<f64>> {
    if from < 2 || to > series.len() || from > to {
        return Err(Error::InvalidConfig(format!(
            "one-step range {from}..={to} outside 2..={}",
            series.len()
        )));
    }
    (from..=to)
        .map(|q| {
            let month = series.month_of_index(q);
            forecast_one(&series.values[..q - 1], q, grouping.window_for(month), fit)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum GroupingMode {
    Fixed { groups: Vec<Vec<u32>> },
    Auto { threshold: f64 },
}

impl Default for GroupingMode {
    fn default() -> Self {
        GroupingMode::Fixed {
            groups: default_month_groups(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneConfig {
    pub years: Vec<usize>,
    pub months: Vec<usize>,
    /// Leading observations never predicted during tuning.
    pub buffer: usize,
    pub grouping: GroupingMode,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            years: (2..=8).collect(),
            months: (2..=6).collect(),
            buffer: 48,
            grouping: GroupingMode::default(),
        }
    }
}

/// Grid-search outcome. Surfaces are indexed `[year_idx][month_idx]` over
/// `grid_years × grid_months` and hold one-step RMSE in msm³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub grid_years: Vec<usize>,
    pub grid_months: Vec<usize>,
    pub buffer_len: usize,
    pub n_predictions: usize,
    /// Single window applied to every month.
    pub overall_rmse: Vec<Vec<f64>>,
    pub overall_optimum: WindowPair,
    /// Per calendar month (January first).
    pub month_rmse: Vec<Vec<Vec<f64>>>,
    pub groups: Vec<Vec<u32>>,
    pub rmse_surface: Vec<Vec<Vec<f64>>>,
    pub optima: Vec<WindowPair>,
    /// RMSE over all tuning points with each point using its group optimum.
    pub grouped_rmse: f64,
    /// First predicted index (1-based) and the grouped one-step predictions.
    pub first_index: usize,
    pub one_step_predictions: Vec<f64>,
}

impl TuneReport {
    pub fn grouping(&self) -> MonthGrouping {
        MonthGrouping {
            groups: self
                .groups
                .iter()
                .zip(&self.optima)
                .map(|(months, w)| MonthGroup {
                    months: months.clone(),
                    window: *w,
                })
                .collect(),
        }
    }
}

fn argmin_surface(surface: &[Vec<f64>], years: &[usize], months: &[usize]) -> (WindowPair, f64) {
    let mut best = (0, 0, f64::INFINITY);
    // Ascending scan with strict improvement: ties go to smaller W_y, then W_m.
    for (i, row) in surface.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if *v < best.2 {
                best = (i, j, *v);
            }
        }
    }
    (
        WindowPair {
            years: years[best.0],
            months: months[best.1],
        },
        best.2,
    )
}

/// Pearson correlation of two flattened surfaces; two constant surfaces
/// count as identical, one constant surface as uncorrelated.
fn surface_corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let va: f64 = a.iter().map(|v| (v - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|v| (v - mb).powi(2)).sum();
    let tiny = |v: f64, m: f64| v <= 1e-24 * (1.0 + m * m) * n;
    match (tiny(va, ma), tiny(vb, mb)) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => {
            let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
            cov / (va.sqrt() * vb.sqrt())
        }
    }
}

/// Greedy Jan→Dec merge of adjacent months whose flattened RMSE surfaces
/// correlate at or above `threshold`, closing the cycle December→January.
pub fn group_months(surfaces: &[Vec<f64>], threshold: f64) -> Result<Vec<Vec<u32>>> {
    if surfaces.len() != 12 {
        return Err(Error::InvalidConfig(format!(
            "expected 12 month surfaces, got {}",
            surfaces.len()
        )));
    }
    if surfaces.iter().any(|s| s.len() != surfaces[0].len() || s.is_empty()) {
        return Err(Error::Misaligned("month surfaces differ in shape".into()));
    }
    let mut groups: Vec<Vec<u32>> = vec![vec![1]];
    for m in 2..=12u32 {
        let c = surface_corr(&surfaces[m as usize - 2], &surfaces[m as usize - 1]);
        if c >= threshold {
            groups.last_mut().expect("non-empty").push(m);
        } else {
            groups.push(vec![m]);
        }
    }
    if groups.len() > 1 && surface_corr(&surfaces[11], &surfaces[0]) >= threshold {
        let mut tail = groups.pop().expect("more than one group");
        tail.extend(groups[0].iter().copied());
        groups[0] = tail;
    }
    Ok(groups)
}

/// Rolling-origin grid search over window pairs, with actual values revealed
/// after each one-step prediction.
pub fn tune(history: &MonthlySeries, config: &TuneConfig, fit: &FitOptions) -> Result<TuneReport> {
    let n = history.len();
    if n < config.buffer + 12 + 1 {
        return Err(Error::InsufficientHistory {
            found: n,
            needed: config.buffer + 13,
        });
    }
    if config.years.is_empty() || config.months.is_empty() {
        return Err(Error::InvalidConfig("tuning grid is empty".into()));
    }
    let cells: Vec<WindowPair> = config
        .years
        .iter()
        .flat_map(|&wy| config.months.iter().map(move |&wm| (wy, wm)))
        .map(|(wy, wm)| WindowPair::new(wy, wm))
        .collect::<Result<_>>()?;
    let first = config.buffer + 1;
    let queries: Vec<usize> = (first..=n).collect();

    let predictions: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|&w| {
            let grouping = MonthGrouping::uniform(w);
            one_step_with_actuals(history, first, n, &grouping, fit)
        })
        .collect::<Result<_>>()?;

    let (ny, nm) = (config.years.len(), config.months.len());
    let cell = |i: usize, j: usize| &predictions[i * nm + j];
    let month_of: Vec<u32> = queries.iter().map(|&q| history.month_of_index(q)).collect();
    let sse_over = |preds: &[f64], months: &[u32]| -> (f64, usize) {
        queries
            .iter()
            .zip(preds)
            .zip(&month_of)
            .filter(|(_, m)| months.contains(m))
            .fold((0.0, 0), |(s, c), ((&q, p), _)| {
                (s + (history.values[q - 1] - p).powi(2), c + 1)
            })
    };
    let surface_for = |months: &[u32]| -> Vec<Vec<f64>> {
        (0..ny)
            .map(|i| {
                (0..nm)
                    .map(|j| {
                        let (s, c) = sse_over(cell(i, j), months);
                        if c == 0 {
                            f64::NAN
                        } else {
                            (s / c as f64).sqrt()
                        }
                    })
                    .collect()
            })
            .collect()
    };

    let all: Vec<u32> = (1..=12).collect();
    let overall_rmse = surface_for(&all);
    let (overall_optimum, _) = argmin_surface(&overall_rmse, &config.years, &config.months);
    let month_rmse: Vec<Vec<Vec<f64>>> = (1..=12u32).map(|m| surface_for(&[m])).collect();

    let groups = match &config.grouping {
        GroupingMode::Fixed { groups } => {
            validate_partition(groups)?;
            groups.clone()
        }
        GroupingMode::Auto { threshold } => {
            let flat: Vec<Vec<f64>> = month_rmse
                .iter()
                .map(|s| s.iter().flatten().map(|v| if v.is_nan() { 0.0 } else { *v }).collect())
                .collect();
            group_months(&flat, *threshold)?
        }
    };
    let rmse_surface: Vec<Vec<Vec<f64>>> = groups.iter().map(|g| surface_for(g)).collect();
    let optima: Vec<WindowPair> = rmse_surface
        .iter()
        .map(|s| argmin_surface(s, &config.years, &config.months).0)
        .collect();

    let cell_index = |w: WindowPair| {
        let i = config.years.iter().position(|&y| y == w.years).expect("optimum on grid");
        let j = config.months.iter().position(|&m| m == w.months).expect("optimum on grid");
        i * nm + j
    };
    let one_step_predictions: Vec<f64> = queries
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let g = groups
                .iter()
                .position(|g| g.contains(&month_of[k]))
                .expect("partition covers every month");
            predictions[cell_index(optima[g])][k]
        })
        .collect();
    let grouped_sse: f64 = queries
        .iter()
        .zip(&one_step_predictions)
        .map(|(&q, p)| (history.values[q - 1] - p).powi(2))
        .sum();

    Ok(TuneReport {
        grid_years: config.years.clone(),
        grid_months: config.months.clone(),
        buffer_len: config.buffer,
        n_predictions: queries.len(),
        overall_rmse,
        overall_optimum,
        month_rmse,
        groups,
        rmse_surface,
        optima,
        grouped_rmse: (grouped_sse / queries.len() as f64).sqrt(),
        first_index: first,
        one_step_predictions,
    })
}
