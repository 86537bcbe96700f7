//! CSV ingestion: a `return` column is used as-is; otherwise a `price`
//! column is converted to log returns. Malformed or non-finite cells are
//! rejected with their 1-based line number.

use crate::error::{CliError, Result};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Ingested {
    pub returns: Vec<f64>,
    /// Name of the column the series came from (`return` or `price`).
    pub source_column: String,
}

pub fn ingest(path: &Path) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Io(format!("cannot read header of {}: {e}", path.display())))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let (col, is_price, col_name) = if let Some(i) = find("return") {
        (i, false, "return")
    } else if let Some(i) = find("price") {
        (i, true, "price")
    } else {
        return Err(CliError::Config(format!(
            "{}: need a 'return' or 'price' column, found {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>()
        )));
    };
    let date_col = find("date");

    let mut values = Vec::new();
    let mut prev_date: Option<String> = None;
    let mut warned_dates = false;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = record.get(col).unwrap_or("").trim();
        let value: f64 = cell.parse().map_err(|_| {
            CliError::Config(format!(
                "{}: line {line}: malformed value '{cell}' in column '{col_name}'",
                path.display()
            ))
        })?;
        if !value.is_finite() {
            return Err(CliError::Config(format!(
                "{}: line {line}: non-finite value '{cell}' in column '{col_name}'",
                path.display()
            )));
        }
        if let Some(dc) = date_col {
            let date = record.get(dc).unwrap_or("").trim().to_string();
            if let Some(prev) = &prev_date {
                if !warned_dates && date.as_str() < prev.as_str() {
                    eprintln!(
                        "warning: {}: line {line}: dates are not monotone ('{date}' after '{prev}')",
                        path.display()
                    );
                    warned_dates = true;
                }
            }
            prev_date = Some(date);
        }
        if is_price && value <= 0.0 {
            return Err(CliError::Config(format!(
                "{}: line {line}: non-positive price '{cell}'",
                path.display()
            )));
        }
        values.push(value);
    }

    let returns = if is_price {
        if values.len() < 2 {
            return Err(CliError::Config(format!(
                "{}: need at least 2 prices to form returns",
                path.display()
            )));
        }
        values.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
    } else {
        values
    };
    if returns.is_empty() {
        return Err(CliError::Config(format!("{}: no data rows", path.display())));
    }
    Ok(Ingested { returns, source_column: col_name.to_string() })
}
