//! Daily compartment series in CSV form.
//!
//! Header `date,S,V,I,R` for fractions or `date,S_count,V_count,I_count,R_count`
//! for head counts, which are divided by a population constant. Dates are
//! ISO `YYYY-MM-DD` or plain integers (day numbers); a file must use one
//! kind throughout. Error messages cite the 1-based line of the file.

use std::collections::HashMap;
use std::io::Read;

use chrono::{Datelike, NaiveDate};

use crate::calibration::ObservedSeries;
use crate::error::{Result, SvirError};

const FRACTIONS: [&str; 4] = ["S", "V", "I", "R"];
const COUNTS: [&str; 4] = ["S_count", "V_count", "I_count", "R_count"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DateKind {
    Iso,
    Ordinal,
}

fn line_err(line: usize, msg: impl Into<String>) -> SvirError {
    SvirError::validation(format!("data line {line}"), msg)
}

fn parse_date(raw: &str, line: usize) -> Result<(i64, DateKind)> {
    if let Ok(n) = raw.parse::<i64>() {
        return Ok((n, DateKind::Ordinal));
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map(|d| (i64::from(d.num_days_from_ce()), DateKind::Iso))
        .map_err(|_| line_err(line, format!("date {raw:?} is neither YYYY-MM-DD nor an integer")))
}

/// Reads a series. `population` is required for count columns and
/// rejected for fraction columns.
pub fn read_series<R: Read>(reader: R, population: Option<f64>) -> Result<ObservedSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| line_err(1, format!("unreadable header: {e}")))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let find = |name: &str| names.iter().position(|h| *h == name);
    let date_col = find("date").ok_or_else(|| line_err(1, "missing column \"date\""))?;

    let (cols, scale) = if FRACTIONS.iter().all(|c| find(c).is_some()) {
        if population.is_some() {
            return Err(SvirError::validation(
                "population",
                "only applies to *_count columns; the file holds fractions",
            ));
        }
        (FRACTIONS.map(|c| find(c).unwrap_or(0)), 1.0)
    } else if COUNTS.iter().all(|c| find(c).is_some()) {
        let pop =
            population.ok_or_else(|| SvirError::validation("population", "required to normalise *_count columns"))?;
        if !(pop.is_finite() && pop > 0.0) {
            return Err(SvirError::validation("population", format!("must be > 0, got {pop}")));
        }
        (COUNTS.map(|c| find(c).unwrap_or(0)), pop)
    } else {
        return Err(line_err(
            1,
            "expected columns date,S,V,I,R or date,S_count,V_count,I_count,R_count",
        ));
    };
    if names.len() != 5 {
        return Err(line_err(1, format!("expected 5 columns, found {}", names.len())));
    }
    let mut seen = HashMap::new();
    for (k, n) in names.iter().enumerate() {
        if let Some(prev) = seen.insert(*n, k) {
            return Err(line_err(
                1,
                format!("column {n:?} appears at positions {} and {}", prev + 1, k + 1),
            ));
        }
    }

    let mut dates = Vec::new();
    let mut labels = Vec::new();
    let mut values: [Vec<f64>; 4] = Default::default();
    let mut kind = None;
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| line_err(line, e.to_string()))?;
        if rec.len() != 5 {
            return Err(line_err(line, format!("expected 5 fields, found {}", rec.len())));
        }
        let raw_date = &rec[date_col];
        let (day, k) = parse_date(raw_date, line)?;
        match kind {
            None => kind = Some(k),
            Some(prev) if prev != k => return Err(line_err(line, "mixes ISO dates and day numbers")),
            _ => {}
        }
        if let Some(&last) = dates.last() {
            if day <= last {
                return Err(line_err(
                    line,
                    format!("date {raw_date} does not follow the previous row"),
                ));
            }
        }
        for (c, &col) in cols.iter().enumerate() {
            let raw = &rec[col];
            let x: f64 = raw
                .parse()
                .map_err(|_| line_err(line, format!("{} = {raw:?} is not a number", names[col])))?;
            let frac = x / scale;
            if !frac.is_finite() || !(0.0..=1.0).contains(&frac) {
                return Err(line_err(
                    line,
                    format!("{} = {raw} is not a fraction of the population", names[col]),
                ));
            }
            values[c].push(frac);
        }
        let total: f64 = (0..4).map(|c| values[c][values[c].len() - 1]).sum();
        if (total - 1.0).abs() > crate::calibration::SUM_TOLERANCE {
            return Err(line_err(
                line,
                format!("compartments sum to {total}, outside 1 +/- 0.05"),
            ));
        }
        dates.push(day);
        labels.push(raw_date.to_string());
    }
    if dates.len() < 2 {
        return Err(SvirError::validation(
            "data",
            format!("needs at least 2 rows, found {}", dates.len()),
        ));
    }
    ObservedSeries::new(
        dates,
        labels,
        values,
        (scale != 1.0 || population.is_some()).then_some(scale),
    )
}

pub fn read_series_file(path: &std::path::Path, population: Option<f64>) -> Result<ObservedSeries> {
    let text = super::read_file(path)?;
    read_series(text.as_bytes(), population)
}

/// Writes fractions with the header `date,S,V,I,R`.
pub fn write_series(series: &ObservedSeries) -> String {
    let mut out = String::from("date,S,V,I,R\n");
    for k in 0..series.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            series.labels[k],
            super::fmt_num(series.s[k]),
            super::fmt_num(series.v[k]),
            super::fmt_num(series.i[k]),
            super::fmt_num(series.r[k]),
        ));
    }
    out
}

/// `date,label` rows mapping date labels to phase names.
pub fn read_annotations<R: Read>(reader: R) -> Result<HashMap<String, String>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| SvirError::validation("annotations line 1", e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["date", "label"] {
        return Err(SvirError::validation(
            "annotations line 1",
            "expected header date,label",
        ));
    }
    let mut map = HashMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| SvirError::validation(format!("annotations line {line}"), e.to_string()))?;
        if rec.len() != 2 {
            return Err(SvirError::validation(
                format!("annotations line {line}"),
                "expected 2 fields",
            ));
        }
        if map.insert(rec[0].to_string(), rec[1].to_string()).is_some() {
            return Err(SvirError::validation(
                format!("annotations line {line}"),
                format!("duplicate date {}", &rec[0]),
            ));
        }
    }
    Ok(map)
}
