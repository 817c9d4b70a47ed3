//! Robust quadratic discriminant analysis built on a block-parallel
//! deterministic Minimum Covariance Determinant estimator.
//!
//! The crate is layered bottom-up:
//!
//! * [`linalg`], [`special`], [`rng`], [`matrix`]: SPD algebra, chi-square
//!   quantiles, seeded sampling and the data containers.
//! * [`scale`]: median/MAD standardization.
//! * [`mcd`]: single-block DetMCD with two deterministic starts and C-steps.
//! * [`rtmcd`]: the block-parallel estimator with median pooling and KL selection.
//! * [`qda`]: robust and classical QDA with an explicit outlier class 0.
//! * [`lbplot`]: label-bias plot points, CSV and SVG output.
//! * [`sim`]: contamination scenarios, extended confusion matrices and study reports.
//! * [`output`]: fixed-precision number formatting and atomic file writes.

pub mod error;
pub mod lbplot;
pub mod linalg;
pub mod matrix;
pub mod mcd;
pub mod output;
pub mod qda;
pub mod rng;
pub mod rtmcd;
pub mod scale;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
pub use linalg::{cholesky, mahalanobis, LocationScatter};
pub use matrix::{DataMatrix, LabeledDataset};
pub use qda::{classify, fit, FitConfig, Mode, Prediction, QdaModel};
pub use rng::Rng;
pub use rtmcd::rt_detmcd;
pub use special::chi2_quantile;
