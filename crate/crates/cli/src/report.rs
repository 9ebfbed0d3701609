//! Human-readable tables and plot-data rows.

use gasjitl::jitl::TuneReport;
use gasjitl::pipeline::ModelEvaluation;
use gasjitl::MonthlySeries;

/// Model rows with MAE, RMSE, MAPE and the percent error of each calendar
/// year's total.
pub fn evaluation_table(evals: &[ModelEvaluation]) -> String {
    let mut years: Vec<(u32, usize)> = Vec::new();
    for e in evals {
        for y in &e.yearly {
            if !years.iter().any(|(yr, _)| *yr == y.year) {
                years.push((y.year, y.months));
            }
        }
    }
    let mut header = vec![
        "Model".to_string(),
        "MAE".into(),
        "RMSE".into(),
        "MAPE (%)".into(),
    ];
    for (y, months) in &years {
        header.push(if *months == 12 {
            format!("PE {y} (%)")
        } else {
            format!("PE {y} [{months} mo] (%)")
        });
    }
    let mut rows = vec![header];
    for e in evals {
        let mut r = vec![
            e.model.clone(),
            format!("{:.2}", e.report.mae),
            format!("{:.2}", e.report.rmse),
            format!("{:.2}", e.report.mape),
        ];
        for (y, _) in &years {
            r.push(
                e.yearly
                    .iter()
                    .find(|t| t.year == *y)
                    .map_or("-".to_string(), |t| format!("{:+.2}", t.pe)),
            );
        }
        rows.push(r);
    }
    align(&rows)
}

/// One RMSE surface per month group, W_y down and W_m across.
pub fn tune_table(report: &TuneReport) -> String {
    let mut out = String::new();
    let overall = std::iter::once((
        "all months".to_string(),
        &report.overall_rmse,
        report.overall_optimum,
    ));
    let groups = report
        .groups
        .iter()
        .zip(&report.rmse_surface)
        .zip(&report.optima)
        .map(|((g, s), w)| (format!("months {g:?}"), s, *w));
    for (title, surface, w) in overall.chain(groups) {
        out.push_str(&format!(
            "{title}: optimum W_y = {}, W_m = {}\n",
            w.years, w.months
        ));
        let mut rows = vec![std::iter::once("W_y \\ W_m".to_string())
            .chain(report.grid_months.iter().map(|m| m.to_string()))
            .collect::<Vec<_>>()];
        for (wy, row) in report.grid_years.iter().zip(surface) {
            rows.push(
                std::iter::once(wy.to_string())
                    .chain(row.iter().map(|v| format!("{v:.3}")))
                    .collect(),
            );
        }
        out.push_str(&align(&rows));
        out.push('\n');
    }
    out.push_str(&format!(
        "grouped one-step RMSE over {} predictions: {:.4}\n",
        report.n_predictions, report.grouped_rmse
    ));
    out
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Long-format `(series, date, value)` rows.
pub fn plot_rows(name: &str, series: &MonthlySeries) -> Vec<[String; 3]> {
    series
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| [name.to_string(), series.ym_at(k).to_string(), v.to_string()])
        .collect()
}

/// `actual − predicted` over the months both series cover.
pub fn residuals(actual: &MonthlySeries, predicted: &MonthlySeries) -> Option<MonthlySeries> {
    let offset = actual.start.months_until(predicted.start);
    if offset < 0 {
        return None;
    }
    let offset = offset as usize;
    let n = predicted.len().min(actual.len().saturating_sub(offset));
    if n == 0 {
        return None;
    }
    let values = (0..n)
        .map(|k| actual.values[offset + k] - predicted.values[k])
        .collect();
    Some(MonthlySeries {
        start: predicted.start,
        values,
    })
}
