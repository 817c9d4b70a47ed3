//! CSV ingestion: a mandatory header, numeric feature columns and an optional
//! label column.

use std::collections::BTreeSet;
use std::path::Path;

use robust_qda::{DataMatrix, LabeledDataset};

use crate::error::{CliError, CliResult};

/// Raw table as read from disk.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::invalid(format!(
            "{}: missing header row",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table { header, rows })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if let csv::ErrorKind::Io(_) = e.kind() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            _ => unreachable!(),
        }
    } else {
        CliError::invalid(format!("{}: {e}", path.display()))
    }
}

impl Table {
    pub fn column_index(&self, name: &str) -> CliResult<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::invalid(format!("no column named '{name}'")))
    }

    /// Numeric matrix of the named columns; row numbers in messages are
    /// 1-based data rows (the header is row 0).
    pub fn features(&self, columns: &[usize]) -> CliResult<DataMatrix> {
        if self.rows.is_empty() {
            return Err(CliError::invalid("data file has no rows"));
        }
        let mut values = Vec::with_capacity(self.rows.len() * columns.len());
        for (i, row) in self.rows.iter().enumerate() {
            for &j in columns {
                let cell = &row[j];
                let v: f64 = cell.parse().map_err(|_| {
                    CliError::invalid(format!(
                        "row {}, column '{}': '{cell}' is not a number",
                        i + 1,
                        self.header[j]
                    ))
                })?;
                if !v.is_finite() {
                    return Err(CliError::invalid(format!(
                        "row {}, column '{}': non-finite value '{cell}'",
                        i + 1,
                        self.header[j]
                    )));
                }
                values.push(v);
            }
        }
        Ok(DataMatrix::from_row_major(
            self.rows.len(),
            columns.len(),
            values,
        )?)
    }

    /// Every column except `exclude`.
    pub fn feature_columns(&self, exclude: Option<usize>) -> Vec<usize> {
        (0..self.header.len())
            .filter(|&j| Some(j) != exclude)
            .collect()
    }

    pub fn column_values(&self, j: usize) -> Vec<&str> {
        self.rows.iter().map(|r| r[j].as_str()).collect()
    }
}

/// Ordered class names; class g (1-based) is `names[g - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub names: Vec<String>,
}

impl LabelMap {
    /// Integer labels must be exactly 1..G; any non-integer value switches
    /// to name mode, where sorted distinct names become 1..G.
    pub fn infer(values: &[&str]) -> CliResult<Self> {
        if values.iter().any(|v| v.is_empty()) {
            return Err(CliError::invalid("empty label cell"));
        }
        let ints: Option<BTreeSet<u64>> = values.iter().map(|v| v.parse::<u64>().ok()).collect();
        let names: Vec<String> = match ints {
            Some(set) => {
                let g = set.len() as u64;
                if set.iter().copied().ne(1..=g) {
                    return Err(CliError::invalid("labels must be 1..G contiguous"));
                }
                (1..=g).map(|k| k.to_string()).collect()
            }
            None => values
                .iter()
                .map(|v| v.to_string())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        if names.len() < 2 {
            return Err(CliError::invalid(format!(
                "need at least 2 classes, found {}",
                names.len()
            )));
        }
        Ok(LabelMap { names })
    }

    pub fn code(&self, name: &str) -> Option<u32> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| k as u32 + 1)
    }

    /// Name of class `g`, "0" for the outlier class.
    pub fn name(&self, g: u32) -> &str {
        if g == 0 {
            "0"
        } else {
            &self.names[g as usize - 1]
        }
    }

    pub fn encode(&self, values: &[&str]) -> CliResult<Vec<u32>> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                self.code(v)
                    .ok_or_else(|| CliError::invalid(format!("row {}: unknown label '{v}'", i + 1)))
            })
            .collect()
    }
}

/// Features and labels of a training table.
pub fn labeled(
    table: &Table,
    label_col: &str,
) -> CliResult<(LabeledDataset, LabelMap, Vec<String>)> {
    let lj = table.column_index(label_col)?;
    let cols = table.feature_columns(Some(lj));
    if cols.is_empty() {
        return Err(CliError::invalid(
            "no feature columns besides the label column",
        ));
    }
    let x = table.features(&cols)?;
    let values = table.column_values(lj);
    let map = LabelMap::infer(&values)?;
    let labels = map.encode(&values)?;
    let names = cols.iter().map(|&j| table.header[j].clone()).collect();
    Ok((LabeledDataset::new(x, labels)?, map, names))
}
