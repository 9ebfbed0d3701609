//! CSV ingestion and atomic artifact writing.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use gasjitl::{MonthlySeries, YearMonth};
use serde::Serialize;

use crate::error::{CliError, CliResult};

fn parse_ym(s: &str) -> Option<YearMonth> {
    let (y, m) = s.split_once('-')?;
    if y.len() != 4 || m.len() != 2 || !y.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    YearMonth::new(y.parse().ok()?, m.parse().ok()?).ok()
}

/// Parses `date,<value_column>` CSV text into a series of consecutive months.
/// Errors name the 1-based line of the file.
pub fn parse_series(text: &str, value_column: &str) -> CliResult<MonthlySeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("line 1: {e}")))?
        .clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != ["date", value_column] {
        return Err(CliError::Data(format!(
            "line 1: expected header `date,{value_column}`, found `{}`",
            names.join(",")
        )));
    }
    let mut start: Option<YearMonth> = None;
    let mut prev: Option<YearMonth> = None;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Data(format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(CliError::Data(format!(
                "line {line}: expected 2 fields, found {}",
                record.len()
            )));
        }
        let date = record[0].trim();
        let ym = parse_ym(date)
            .ok_or_else(|| CliError::Data(format!("line {line}: invalid date `{date}`, expected YYYY-MM")))?;
        if let Some(p) = prev {
            let expected = p.add_months(1);
            if ym != expected {
                let kind = if ym.months_until(expected) >= 0 {
                    "duplicate or out-of-order month"
                } else {
                    "gap: missing month"
                };
                return Err(CliError::Data(format!(
                    "line {line}: {kind} (expected {expected}, found {ym})"
                )));
            }
        }
        let raw = record[1].trim();
        let v: f64 = raw
            .parse()
            .map_err(|_| CliError::Data(format!("line {line}: invalid {value_column} `{raw}`")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(CliError::Data(format!(
                "line {line}: {value_column} must be finite and >= 0, found `{raw}`"
            )));
        }
        start.get_or_insert(ym);
        prev = Some(ym);
        values.push(v);
    }
    let start = start.ok_or_else(|| CliError::Data("no data rows".into()))?;
    Ok(MonthlySeries::new(start, values)?)
}

pub fn read_to_string(path: &Path) -> CliResult<String> {
    let mut s = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(s)
}

/// Reads a `date,demand` file.
pub fn ingest_csv(path: &Path) -> CliResult<MonthlySeries> {
    parse_series(&read_to_string(path)?, "demand")
        .map_err(|e| prefix(e, path))
}

/// Reads a `date,forecast` file.
pub fn read_forecast_csv(path: &Path) -> CliResult<MonthlySeries> {
    parse_series(&read_to_string(path)?, "forecast")
        .map_err(|e| prefix(e, path))
}

fn prefix(e: CliError, path: &Path) -> CliError {
    match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    }
}

pub fn series_csv(series: &MonthlySeries, value_column: &str) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["date", value_column]).map_err(csv_err)?;
    for (k, v) in series.values.iter().enumerate() {
        w.write_record([series.ym_at(k).to_string(), v.to_string()])
            .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

pub fn rows_csv<I, R>(header: &[&str], rows: I) -> CliResult<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(e.to_string())
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Config(format!("invalid output path {}", path.display())))?;
    let tmp: PathBuf = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| CliError::Data(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::Data(format!("{}: {e}", path.display()))
    })
}

pub fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(dates: &[&str]) -> String {
        let mut s = String::from("date,demand\n");
        for (i, d) in dates.iter().enumerate() {
            s.push_str(&format!("{d},{}\n", 10 + i));
        }
        s
    }

    #[test]
    fn full_nine_year_span() {
        let mut text = String::from("date,demand\r\n");
        for y in 2014..=2022 {
            for m in 1..=12 {
                text.push_str(&format!("{y}-{m:02},{}.5\r\n", y - 2000 + m));
            }
        }
        let s = parse_series(&text, "demand").unwrap();
        assert_eq!(s.len(), 108);
        assert_eq!(s.start, YearMonth::new(2014, 1).unwrap());
        assert_eq!(s.values[0], 15.5);
    }

    #[test]
    fn gap_is_named() {
        let e = parse_series(&rows(&["2017-04", "2017-05", "2017-07"]), "demand").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 4") && msg.contains("2017-06") && msg.contains("gap"), "{msg}");
    }

    #[test]
    fn duplicate_is_named() {
        let e = parse_series(&rows(&["2017-04", "2017-05", "2017-05"]), "demand").unwrap_err();
        assert!(e.to_string().contains("line 4") && e.to_string().contains("duplicate"));
    }

    #[test]
    fn bad_values_are_named() {
        for bad in ["-1", "NaN", "abc", "inf"] {
            let text = format!("date,demand\n2020-01,3\n2020-02,{bad}\n");
            let e = parse_series(&text, "demand").unwrap_err();
            assert!(matches!(e, CliError::Data(_)));
            assert!(e.to_string().contains("line 3"), "{e}");
        }
    }

    #[test]
    fn header_and_dates_checked() {
        assert!(parse_series("month,demand\n2020-01,1\n", "demand").is_err());
        assert!(parse_series("date,demand\n2020-1,1\n", "demand").is_err());
        assert!(parse_series("date,demand\n2020-13,1\n", "demand").is_err());
        assert!(parse_series("date,demand\n", "demand").is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let s = MonthlySeries::new(
            YearMonth::new(2019, 11).unwrap(),
            vec![0.1 + 0.2, 1e-17, 123456.789, 2.0f64.sqrt()],
        )
        .unwrap();
        let bytes = series_csv(&s, "forecast").unwrap();
        let back = parse_series(std::str::from_utf8(&bytes).unwrap(), "forecast").unwrap();
        assert_eq!(back, s);
    }
}
