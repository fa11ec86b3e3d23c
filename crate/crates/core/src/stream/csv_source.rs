use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{StreamError, StreamEvent};

/// Where event timestamps come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimestampColumn {
    /// Zero-based data row index.
    RowIndex,
    Column(String),
}

/// Column map for a CSV stream.
///
/// With `has_header = false`, column references are zero-based indices
/// written as strings (`"0"`, `"3"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub has_header: bool,
    pub timestamp: TimestampColumn,
    pub values: Vec<String>,
    pub label: Option<String>,
    pub classes: Option<usize>,
}

impl CsvSchema {
    fn resolve(&self, headers: Option<&csv::StringRecord>, name: &str) -> Result<usize, StreamError> {
        match headers {
            Some(h) => h
                .iter()
                .position(|col| col.trim() == name)
                .ok_or_else(|| StreamError::Schema(format!("column '{name}' not in header"))),
            None => name
                .parse::<usize>()
                .map_err(|_| StreamError::Schema(format!("headerless schema needs numeric column index, got '{name}'"))),
        }
    }
}

/// Reads a whole CSV stream into memory, in file order.
pub fn load_csv_stream(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Vec<StreamEvent>, StreamError> {
    let path = path.as_ref();
    if schema.values.is_empty() {
        return Err(StreamError::Schema("schema names no value columns".into()));
    }
    let file = File::open(path).map_err(|source| StreamError::Open {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = if schema.has_header {
        Some(reader.headers()?.clone())
    } else {
        None
    };
    let value_cols = schema
        .values
        .iter()
        .map(|name| schema.resolve(headers.as_ref(), name))
        .collect::<Result<Vec<_>, _>>()?;
    let ts_col = match &schema.timestamp {
        TimestampColumn::RowIndex => None,
        TimestampColumn::Column(name) => Some(schema.resolve(headers.as_ref(), name)?),
    };
    let label_col = schema
        .label
        .as_deref()
        .map(|name| schema.resolve(headers.as_ref(), name))
        .transpose()?;

    let dims = value_cols.len();
    let mut events = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(index + 1);
        let cell = |col: usize| {
            record.get(col).ok_or_else(|| StreamError::MalformedRow {
                row,
                reason: format!("missing column {col} (row has {} fields)", record.len()),
            })
        };

        let mut values = Vec::with_capacity(dims);
        for &col in &value_cols {
            let raw = cell(col)?;
            let v: f64 = raw.parse().map_err(|_| StreamError::MalformedRow {
                row,
                reason: format!("non-numeric value '{raw}' in column {col}"),
            })?;
            if !v.is_finite() {
                return Err(StreamError::MalformedRow {
                    row,
                    reason: format!("non-finite value '{raw}' in column {col}"),
                });
            }
            values.push(v);
        }
        let timestamp = match ts_col {
            None => index as i64,
            Some(col) => {
                let raw = cell(col)?;
                raw.parse::<i64>().map_err(|_| StreamError::MalformedRow {
                    row,
                    reason: format!("timestamp '{raw}' is not an integer tick"),
                })?
            }
        };
        let label = match label_col {
            None => None,
            Some(col) => {
                let raw = cell(col)?;
                if raw.is_empty() {
                    None
                } else {
                    Some(raw.parse::<usize>().map_err(|_| StreamError::MalformedRow {
                        row,
                        reason: format!("label '{raw}' is not a class index"),
                    })?)
                }
            }
        };
        let event = StreamEvent::new(timestamp, values, label);
        event
            .validate(dims, schema.classes)
            .map_err(|e| StreamError::MalformedRow {
                row,
                reason: e.to_string(),
            })?;
        events.push(event);
    }
    Ok(events)
}

/// Writes events in the layout `load_csv_stream` reads back with
/// [`CsvSchema`] columns `timestamp, v0..v{d-1}, label`.
pub fn write_csv_stream<W: Write>(out: W, events: &[StreamEvent]) -> Result<(), StreamError> {
    let dims = events.first().map(|e| e.dims()).unwrap_or(0);
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["timestamp".to_string()];
    header.extend((0..dims).map(|j| format!("v{j}")));
    header.push("label".into());
    writer.write_record(&header)?;
    for event in events {
        if event.dims() != dims {
            return Err(StreamError::DimensionMismatch {
                expected: dims,
                found: event.dims(),
            });
        }
        let mut row = Vec::with_capacity(dims + 2);
        row.push(event.timestamp.to_string());
        // `{:?}` prints the shortest representation that parses back exactly.
        row.extend(event.values.iter().map(|v| format!("{v:?}")));
        row.push(event.label.map(|l| l.to_string()).unwrap_or_default());
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

impl CsvSchema {
    /// Schema matching the output of [`write_csv_stream`].
    pub fn exported(dims: usize, classes: Option<usize>) -> Self {
        Self {
            has_header: true,
            timestamp: TimestampColumn::Column("timestamp".into()),
            values: (0..dims).map(|j| format!("v{j}")).collect(),
            label: Some("label".into()),
            classes,
        }
    }
}
