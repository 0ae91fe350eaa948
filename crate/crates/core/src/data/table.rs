//! Numeric CSV tables and label files.
//!
//! Values are written with 17 significant digits, so a save/load round trip
//! reproduces every `f64` exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Which column, if any, holds ground-truth labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    /// Header name; requires a header row.
    Name(String),
    /// Zero-based column index.
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadOptions {
    pub header: bool,
    pub label_column: Option<LabelColumn>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            header: true,
            label_column: None,
        }
    }
}

pub fn load_csv(path: &Path, options: &LoadOptions) -> Result<Dataset> {
    read_csv(File::open(path)?, options)
}

/// Parses a numeric table. Row and column numbers in errors are 1-based and
/// count data rows only.
pub fn read_csv<R: Read>(input: R, options: &LoadOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.header)
        .flexible(true)
        .from_reader(input);
    let label_idx = match &options.label_column {
        None => None,
        Some(LabelColumn::Index(i)) => Some(*i),
        Some(LabelColumn::Name(name)) => {
            if !options.header {
                return Err(Error::Invalid(
                    "a label column name needs a header row".into(),
                ));
            }
            let headers = reader.headers()?;
            Some(
                headers
                    .iter()
                    .position(|h| h.trim() == name)
                    .ok_or_else(|| Error::Invalid(format!("no column named {name:?}")))?,
            )
        }
    };

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Csv {
                    row,
                    col: rec.len().min(w) + 1,
                    msg: format!("expected {w} fields, found {}", rec.len()),
                })
            }
            _ => {}
        }
        for (c, field) in rec.iter().enumerate() {
            let col = c + 1;
            let field = field.trim();
            if Some(c) == label_idx {
                let label: usize = field.parse().map_err(|_| Error::Csv {
                    row,
                    col,
                    msg: format!("label {field:?} is not a non-negative integer"),
                })?;
                labels.push(label);
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Csv {
                row,
                col,
                msg: format!("{field:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    row,
                    col,
                    msg: format!("non-finite value {field:?}"),
                });
            }
            values.push(v);
        }
    }
    let width = width.ok_or_else(|| Error::Invalid("empty table".into()))?;
    if let Some(i) = label_idx {
        if i >= width {
            return Err(Error::Invalid(format!(
                "label column {} out of range",
                i + 1
            )));
        }
    }
    let d = width - label_idx.map_or(0, |_| 1);
    if d == 0 {
        return Err(Error::Invalid("table has no numeric columns".into()));
    }
    let n = values.len() / d;
    let y = DMatrix::from_row_slice(n, d, &values);
    Dataset::new(y, label_idx.map(|_| labels))
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `y1..yd` columns, plus `label` when the dataset has labels.
pub fn save_csv<W: Write>(out: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("y{j}")).collect();
    if data.labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.y.row(i).iter().map(|&v| fmt17(v)).collect();
        if let Some(l) = &data.labels {
            rec.push(l[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `row,label` with 1-based row numbers.
pub fn write_labels<W: Write>(out: W, labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "label"])?;
    for (i, l) in labels.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a labels file. Accepts the `row,label` layout written by
/// [`write_labels`] or a single column of labels, with or without header.
pub fn read_labels<R: Read>(input: R) -> Result<Vec<usize>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    let mut out = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = rec.get(rec.len().saturating_sub(1)).unwrap_or("").trim();
        match field.parse::<usize>() {
            Ok(v) => out.push(v),
            Err(_) if r == 0 => continue,
            Err(_) => {
                return Err(Error::Csv {
                    row: r + 1,
                    col: rec.len(),
                    msg: format!("label {field:?} is not a non-negative integer"),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Invalid("no labels found".into()));
    }
    Ok(out)
}
