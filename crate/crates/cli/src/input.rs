//! CSV ingestion of price and return series.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sdr_core::{log_returns, ReturnSeries, RiskError};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SeriesKind {
    Prices,
    Returns,
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeriesKind::Prices => "prices",
            SeriesKind::Returns => "returns",
        })
    }
}

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: malformed CSV: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: no data rows")]
    Empty { path: PathBuf },
    #[error("{path}: row {row}: expected 1 or 2 columns consistently, found {found}")]
    Columns {
        path: PathBuf,
        row: u64,
        found: usize,
    },
    #[error("{path}: row {row}: non-numeric value {value:?}")]
    NonNumeric {
        path: PathBuf,
        row: u64,
        value: String,
    },
    #[error("{path}: row {row}: {source}")]
    Value {
        path: PathBuf,
        row: u64,
        source: RiskError,
    },
    #[error("{path}: {source}")]
    Series { path: PathBuf, source: RiskError },
}

/// A parsed input file: the series used for computation plus the labels of
/// a leading date column, aligned with the series.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSeries {
    pub series: ReturnSeries,
    pub labels: Option<Vec<String>>,
}

/// Reads one value per row from the last column; a first column, if
/// present, is kept as a row label. The first row is a header when its
/// value cell does not parse as a number. Lines starting with `#` are
/// comments. Row numbers in errors are file line numbers.
pub fn read_series(path: &Path, kind: SeriesKind) -> Result<InputSeries, InputError> {
    let file = std::fs::File::open(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut first = true;
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|source| InputError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let row = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() > 2 || width.is_some_and(|w| w != record.len()) {
            return Err(InputError::Columns {
                path: path.to_path_buf(),
                row,
                found: record.len(),
            });
        }
        let cell = &record[record.len() - 1];
        let value = match f64::from_str(cell) {
            Ok(v) => v,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err(_) => {
                return Err(InputError::NonNumeric {
                    path: path.to_path_buf(),
                    row,
                    value: cell.to_string(),
                })
            }
        };
        first = false;
        width = Some(record.len());
        if !value.is_finite() {
            return Err(InputError::NonNumeric {
                path: path.to_path_buf(),
                row,
                value: cell.to_string(),
            });
        }
        if kind == SeriesKind::Prices && value <= 0.0 {
            return Err(InputError::Value {
                path: path.to_path_buf(),
                row,
                source: RiskError::NonPositivePrice {
                    index: values.len(),
                    value,
                },
            });
        }
        if record.len() == 2 {
            labels.push(record[0].to_string());
        }
        values.push(value);
    }

    if values.is_empty() {
        return Err(InputError::Empty {
            path: path.to_path_buf(),
        });
    }
    let series_error = |source| InputError::Series {
        path: path.to_path_buf(),
        source,
    };
    let (series, labels) = match kind {
        SeriesKind::Returns => (ReturnSeries::new(values).map_err(series_error)?, labels),
        SeriesKind::Prices => {
            let series = log_returns(&values).map_err(series_error)?;
            // a return is labelled by the date it is realized on
            let labels = labels.into_iter().skip(1).collect();
            (series, labels)
        }
    };
    let labels = if labels.is_empty() {
        None
    } else {
        Some(labels)
    };
    Ok(InputSeries { series, labels })
}
