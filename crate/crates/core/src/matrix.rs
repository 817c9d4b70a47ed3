use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Dense n×p block of observations, stored row-major (one observation per row).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    /// Builds a matrix from row-major values. Every entry must be finite.
    pub fn from_row_major(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidData(format!(
                "data matrix must be at least 1x1, got {n_rows}x{n_cols}"
            )));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos / n_cols,
                pos % n_cols
            )));
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_row_major(rows.len(), n_cols, values)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_cols)
    }

    /// Values of variable `j` in row order.
    pub fn column(&self, j: usize) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.values[j..].iter().step_by(self.n_cols).copied()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// New matrix made of the listed rows, in the listed order.
    pub fn select_rows(&self, indices: &[usize]) -> DataMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        DataMatrix {
            n_rows: indices.len(),
            n_cols: self.n_cols,
            values,
        }
    }

    /// Applies `f` to every entry. The result must stay finite.
    pub(crate) fn map_entries(&self, mut f: impl FnMut(usize, f64) -> f64) -> DataMatrix {
        let p = self.n_cols;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f(k % p, v))
            .collect();
        DataMatrix {
            n_rows: self.n_rows,
            n_cols: p,
            values,
        }
    }
}

/// Row indices sorted lexicographically by row content (ties by index).
///
/// Accumulating sums in this order makes every estimator bit-identical under
/// any permutation of the input rows.
pub fn canonical_order(x: &DataMatrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b))
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Labeled observations. Labels run over `1..=G`; 0 is reserved for the outlier class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    pub labels: Vec<u32>,
}

impl LabeledDataset {
    pub fn new(data: DataMatrix, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != data.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: data.n_rows(),
                found: labels.len(),
            });
        }
        if labels.contains(&0) {
            return Err(Error::InvalidData(
                "label 0 is reserved for the outlier class".into(),
            ));
        }
        Ok(Self { data, labels })
    }

    /// Largest label present, i.e. G.
    pub fn n_classes(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    pub fn indices_of(&self, label: u32) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == label).then_some(i))
            .collect()
    }

    pub fn class_data(&self, label: u32) -> DataMatrix {
        self.data.select_rows(&self.indices_of(label))
    }
}
