//! Coordinate-wise median/MAD standardization and its inverse on estimates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, LocationScatter};
use crate::matrix::DataMatrix;

/// Gaussian consistency constant for the MAD.
pub const MAD_CONSISTENCY: f64 = 1.4826;

/// Median of a non-empty sample; even lengths average the two middle order statistics.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty sample");
    let n = values.len();
    let mid = n / 2;
    let (lower, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + upper)
    }
}

/// Consistency-scaled median absolute deviation around `center`.
pub fn mad(values: impl Iterator<Item = f64>, center: f64) -> f64 {
    let mut dev: Vec<f64> = values.map(|v| (v - center).abs()).collect();
    MAD_CONSISTENCY * median(&mut dev)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn new(center: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if center.len() != scale.len() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                found: scale.len(),
            });
        }
        if let Some(column) = scale.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::ZeroScale { column });
        }
        Ok(Self { center, scale })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// Column medians and consistency-scaled MADs.
pub fn fit_standardizer(x: &DataMatrix) -> Result<Standardizer> {
    if x.n_rows() < 2 {
        return Err(Error::TooFewObservations {
            n: x.n_rows(),
            p: x.n_cols(),
        });
    }
    let mut center = Vec::with_capacity(x.n_cols());
    let mut scale = Vec::with_capacity(x.n_cols());
    for j in 0..x.n_cols() {
        let mut col: Vec<f64> = x.column(j).collect();
        let med = median(&mut col);
        let s = mad(col.into_iter(), med);
        if s <= 0.0 {
            return Err(Error::ZeroScale { column: j });
        }
        center.push(med);
        scale.push(s);
    }
    Ok(Standardizer { center, scale })
}

pub fn standardize(x: &DataMatrix, s: &Standardizer) -> Result<DataMatrix> {
    if x.n_cols() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: x.n_cols(),
        });
    }
    Ok(x.map_entries(|j, v| (v - s.center[j]) / s.scale[j]))
}

/// Maps an estimate from standardized to original coordinates:
/// μ ↦ D·μ + center, Σ ↦ D·Σ·D with D = diag(scale).
pub fn destandardize_estimate(ls: &LocationScatter, s: &Standardizer) -> Result<LocationScatter> {
    let p = s.dim();
    if ls.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: ls.dim(),
        });
    }
    let mu = DVector::from_fn(p, |j, _| s.scale[j] * ls.mu()[j] + s.center[j]);
    let mut sigma = DMatrix::from_fn(p, p, |j, k| s.scale[j] * ls.sigma()[(j, k)] * s.scale[k]);
    symmetrize(&mut sigma);
    LocationScatter::new(mu, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_cov(x: &DataMatrix) -> LocationScatter {
        let n = x.n_rows() as f64;
        let p = x.n_cols();
        let mu = DVector::from_fn(p, |j, _| x.column(j).sum::<f64>() / n);
        let mut s = DMatrix::zeros(p, p);
        for r in x.rows() {
            let d = DVector::from_fn(p, |j, _| r[j] - mu[j]);
            s += &d * d.transpose();
        }
        LocationScatter::new(mu, s / (n - 1.0)).unwrap()
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&mut [7.0]), 7.0);
    }

    #[test]
    fn standardizer_of_arithmetic_column() {
        let x = DataMatrix::from_rows(&[[1.0], [2.0], [3.0], [4.0], [5.0]]).unwrap();
        let s = fit_standardizer(&x).unwrap();
        assert_eq!(s.center(), &[3.0]);
        assert_eq!(s.scale(), &[1.4826]);
    }

    #[test]
    fn constant_column_is_zero_scale() {
        let x = DataMatrix::from_rows(&[[1.0, 2.0], [1.0, 3.0], [1.0, 5.0]]).unwrap();
        assert!(matches!(
            fit_standardizer(&x),
            Err(Error::ZeroScale { column: 0 })
        ));
        // more than half identical
        let x = DataMatrix::from_rows(&[[1.0], [1.0], [1.0], [2.0], [9.0]]).unwrap();
        assert!(matches!(fit_standardizer(&x), Err(Error::ZeroScale { .. })));
    }

    #[test]
    fn symmetric_column_centers_at_zero() {
        let x = DataMatrix::from_rows(&[[-2.5], [0.0], [2.5]]).unwrap();
        assert_eq!(fit_standardizer(&x).unwrap().center(), &[0.0]);
    }

    #[test]
    fn round_trip_on_sample_moments() {
        let rows: Vec<[f64; 3]> = (0..40)
            .map(|i| {
                let t = i as f64;
                [t.sin() * 3.0 + 1.0, (t * 0.7).cos() * 10.0, t * 0.1 - 2.0]
            })
            .collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let s = fit_standardizer(&x).unwrap();
        let z = standardize(&x, &s).unwrap();
        let back = destandardize_estimate(&sample_cov(&z), &s).unwrap();
        let direct = sample_cov(&x);
        assert!((back.mu() - direct.mu()).amax() < 1e-10);
        assert!((back.sigma() - direct.sigma()).amax() < 1e-10);
    }

    #[test]
    fn identity_standardizer_is_noop() {
        let s = Standardizer::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let ls = LocationScatter::new(
            DVector::from_vec(vec![1.0, 2.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
        )
        .unwrap();
        let out = destandardize_estimate(&ls, &s).unwrap();
        assert_eq!(out.mu(), ls.mu());
        assert_eq!(out.sigma(), ls.sigma());
    }

    #[test]
    fn translation_shifts_location_only() {
        let rows: Vec<[f64; 2]> = (0..30)
            .map(|i| [(i as f64 * 1.3).sin(), (i as f64 * 0.4).cos() * 2.0])
            .collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let b = [10.0, -4.0];
        let shifted = DataMatrix::from_rows(
            &rows
                .iter()
                .map(|r| [r[0] + b[0], r[1] + b[1]])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let fit = |x: &DataMatrix| {
            let s = fit_standardizer(x).unwrap();
            destandardize_estimate(&sample_cov(&standardize(x, &s).unwrap()), &s).unwrap()
        };
        let (a, c) = (fit(&x), fit(&shifted));
        for j in 0..2 {
            assert!((c.mu()[j] - a.mu()[j] - b[j]).abs() < 1e-12);
        }
        assert!((c.sigma() - a.sigma()).amax() < 1e-12);
    }

    #[test]
    fn row_permutation_invariant() {
        let rows: Vec<[f64; 2]> = (0..25)
            .map(|i| [(i as f64 * 2.1).sin(), (i as f64).sqrt()])
            .collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let mut rev = rows.clone();
        rev.reverse();
        let y = DataMatrix::from_rows(&rev).unwrap();
        assert_eq!(fit_standardizer(&x).unwrap(), fit_standardizer(&y).unwrap());
    }
}
