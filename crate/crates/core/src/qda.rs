//! Quadratic discriminant analysis with robust (block-parallel MCD) or
//! classical class fits, robust priors and an overall-outlier class 0.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::LocationScatter;
use crate::matrix::{DataMatrix, LabeledDataset};
use crate::mcd::subset_moments;
use crate::rng::Rng;
use crate::rtmcd::{default_block_count, rt_detmcd};
use crate::special::chi2_quantile;

/// Default chi-square probability of the outlier cutoff.
pub const DEFAULT_OUTLIER_QUANTILE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Robust,
    Classical,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Robust => "robust",
            Mode::Classical => "classical",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "robust" => Ok(Mode::Robust),
            "classical" => Ok(Mode::Classical),
            other => Err(Error::ConfigError(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub h_frac: f64,
    /// Block count for every class; `None` uses [`default_block_count`] per class.
    pub blocks: Option<usize>,
    pub seed: u64,
    pub outlier_quantile: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            h_frac: 0.5,
            blocks: None,
            seed: 0,
            outlier_quantile: DEFAULT_OUTLIER_QUANTILE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassModel {
    pub label: u32,
    pub loc_scat: LocationScatter,
    pub prior: f64,
    /// Training rows carrying this label.
    pub n_raw: usize,
    /// Training rows within the outlier cutoff of their own class.
    pub n_inlier: usize,
    /// Resolved block count of the robust fit; `None` in classical mode.
    pub blocks: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct QdaModel {
    classes: Vec<ClassModel>,
    p: usize,
    mode: Mode,
    outlier_quantile: f64,
    outlier_cutoff: f64,
    config: FitConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// 0 for an overall outlier, else the class with the highest score.
    pub label: u32,
    pub scores: Vec<f64>,
    pub min_rd: f64,
    pub rd_per_class: Vec<f64>,
}

impl Prediction {
    /// Class with the highest score (ties to the smaller label), ignoring the outlier rule.
    pub fn argmax(&self) -> u32 {
        argmax(&self.scores)
    }
}

fn argmax(scores: &[f64]) -> u32 {
    let mut best = 0;
    for (g, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = g;
        }
    }
    best as u32 + 1
}

impl QdaModel {
    /// Assembles a model from fitted classes (labels must be 1..=G in order).
    pub fn from_parts(
        mode: Mode,
        classes: Vec<ClassModel>,
        outlier_quantile: f64,
        config: FitConfig,
    ) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::ConfigError(format!(
                "need at least 2 classes, got {}",
                classes.len()
            )));
        }
        let p = classes[0].loc_scat.dim();
        for (g, c) in classes.iter().enumerate() {
            if c.label as usize != g + 1 {
                return Err(Error::ConfigError(format!(
                    "class labels must be 1..G in order, found {} at position {}",
                    c.label,
                    g + 1
                )));
            }
            if c.loc_scat.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: c.loc_scat.dim(),
                });
            }
            if !(c.prior > 0.0 && c.prior <= 1.0) {
                return Err(Error::ConfigError(format!(
                    "prior of class {} is {}",
                    c.label, c.prior
                )));
            }
        }
        let total: f64 = classes.iter().map(|c| c.prior).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::ConfigError(format!("priors sum to {total}, not 1")));
        }
        let outlier_cutoff = chi2_quantile(p as u32, outlier_quantile)?.sqrt();
        Ok(Self {
            classes,
            p,
            mode,
            outlier_quantile,
            outlier_cutoff,
            config,
        })
    }

    pub fn classes(&self) -> &[ClassModel] {
        &self.classes
    }

    pub fn class(&self, label: u32) -> Result<&ClassModel> {
        label
            .checked_sub(1)
            .and_then(|g| self.classes.get(g as usize))
            .ok_or(Error::UnknownClass(label))
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn outlier_quantile(&self) -> f64 {
        self.outlier_quantile
    }

    /// √χ²_{p,q} for the configured outlier quantile q.
    pub fn outlier_cutoff(&self) -> f64 {
        self.outlier_cutoff
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    /// Same classes with a different outlier quantile.
    pub fn with_outlier_quantile(&self, q: f64) -> Result<Self> {
        Self::from_parts(self.mode, self.classes.clone(), q, self.config.clone())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// −½ ln|Σ| − ½ (x−μ)ᵀΣ⁻¹(x−μ) + ln(prior).
pub fn discriminant_score(x: &[f64], cm: &ClassModel) -> Result<f64> {
    let d2 = cm.loc_scat.mahalanobis(x)?.powi(2);
    Ok(score_from_d2(d2, cm))
}

#[inline]
fn score_from_d2(d2: f64, cm: &ClassModel) -> f64 {
    -0.5 * cm.loc_scat.log_det() - 0.5 * d2 + cm.prior.ln()
}

pub fn classify(x: &[f64], model: &QdaModel) -> Result<Prediction> {
    model.check_dim(x)?;
    let mut scores = Vec::with_capacity(model.n_classes());
    let mut rd = Vec::with_capacity(model.n_classes());
    for cm in &model.classes {
        let d2 = cm.loc_scat.mahalanobis_sq(x);
        scores.push(score_from_d2(d2, cm));
        rd.push(d2.sqrt());
    }
    let min_rd = rd.iter().copied().fold(f64::INFINITY, f64::min);
    let label = if min_rd > model.outlier_cutoff {
        0
    } else {
        argmax(&scores)
    };
    Ok(Prediction {
        label,
        scores,
        min_rd,
        rd_per_class: rd,
    })
}

/// Classifies every row; order matches the input.
pub fn classify_batch(data: &DataMatrix, model: &QdaModel) -> Result<Vec<Prediction>> {
    (0..data.n_rows())
        .into_par_iter()
        .map(|i| classify(data.row(i), model))
        .collect()
}

/// √(highest score − score of the given class); 0 when the given class wins.
pub fn label_bias(x: &[f64], given: u32, model: &QdaModel) -> Result<f64> {
    let pred = classify(x, model)?;
    label_bias_of(&pred, given)
}

pub(crate) fn label_bias_of(pred: &Prediction, given: u32) -> Result<f64> {
    let g = given
        .checked_sub(1)
        .filter(|&g| (g as usize) < pred.scores.len())
        .ok_or(Error::UnknownClass(given))? as usize;
    let best = pred.scores[pred.argmax() as usize - 1];
    Ok((best - pred.scores[g]).max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustPriors {
    pub priors: Vec<f64>,
    /// Rows per class within the cutoff of their own class.
    pub inliers: Vec<usize>,
}

/// Priors from the rows whose distance to their own class is within √χ²_{p,q}.
pub fn robust_priors(
    train: &LabeledDataset,
    fits: &[LocationScatter],
    outlier_quantile: f64,
) -> Result<RobustPriors> {
    let p = train.data.n_cols();
    let cutoff2 = chi2_quantile(p as u32, outlier_quantile)?;
    let mut inliers = vec![0usize; fits.len()];
    let mut present = vec![false; fits.len()];
    for (row, &label) in train.data.rows().zip(&train.labels) {
        let g = (label as usize)
            .checked_sub(1)
            .filter(|&g| g < fits.len())
            .ok_or(Error::UnknownClass(label))?;
        present[g] = true;
        if fits[g].mahalanobis_sq(row) <= cutoff2 {
            inliers[g] += 1;
        }
    }
    for (g, (&n, &seen)) in inliers.iter().zip(&present).enumerate() {
        if !seen {
            return Err(Error::ConfigError(format!("class {} has no rows", g + 1)));
        }
        if n == 0 {
            return Err(Error::EmptyClassAfterTrim {
                label: g as u32 + 1,
            });
        }
    }
    let total: usize = inliers.iter().sum();
    let priors = inliers.iter().map(|&n| n as f64 / total as f64).collect();
    Ok(RobustPriors { priors, inliers })
}

fn classical_fit(x: &DataMatrix) -> Result<LocationScatter> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if n <= p {
        return Err(Error::TooFewObservations { n, p });
    }
    let (_, mean, scatter) = subset_moments(x, 0..n);
    LocationScatter::new(mean, scatter / (n - 1) as f64)
}

/// Sample mean and covariance (n−1 denominator).
pub fn sample_estimate(x: &DataMatrix) -> Result<LocationScatter> {
    classical_fit(x)
}

/// Fits one model per class (in parallel) and the priors.
///
/// Robust mode uses the block-parallel MCD per class with rng substream = label,
/// and priors from the rows within the outlier cutoff. Classical mode uses the
/// sample mean/covariance and priors n_g/n.
pub fn fit(train: &LabeledDataset, mode: Mode, config: &FitConfig) -> Result<QdaModel> {
    let g_count = train.n_classes() as usize;
    if g_count < 2 {
        return Err(Error::ConfigError(format!(
            "need at least 2 classes, got {g_count}"
        )));
    }
    let p = train.data.n_cols();
    let fits: Vec<(LocationScatter, Option<usize>, usize)> = (1..=g_count as u32)
        .into_par_iter()
        .map(|label| {
            let x_g = train.class_data_checked(label)?;
            let n_g = x_g.n_rows();
            let res = match mode {
                Mode::Robust => {
                    let q = config.blocks.unwrap_or_else(|| default_block_count(n_g, p));
                    let mut rng = Rng::substream(config.seed, label as u64);
                    rt_detmcd(&x_g, config.h_frac, q, &mut rng).map(|f| (f.estimate, Some(q), n_g))
                }
                Mode::Classical => classical_fit(&x_g).map(|ls| (ls, None, n_g)),
            };
            res.map_err(|e| Error::InClass {
                label,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let loc_scats: Vec<LocationScatter> = fits.iter().map(|f| f.0.clone()).collect();
    let trimmed = robust_priors(train, &loc_scats, config.outlier_quantile)?;
    let n_total = train.labels.len() as f64;
    let classes = fits
        .into_iter()
        .enumerate()
        .map(|(g, (loc_scat, blocks, n_raw))| ClassModel {
            label: g as u32 + 1,
            loc_scat,
            prior: match mode {
                Mode::Robust => trimmed.priors[g],
                Mode::Classical => n_raw as f64 / n_total,
            },
            n_raw,
            n_inlier: trimmed.inliers[g],
            blocks,
        })
        .collect();
    QdaModel::from_parts(mode, classes, config.outlier_quantile, config.clone())
}

impl LabeledDataset {
    fn class_data_checked(&self, label: u32) -> Result<DataMatrix> {
        let idx = self.indices_of(label);
        if idx.is_empty() {
            return Err(Error::ConfigError(format!(
                "class {label} has no rows; labels must be 1..G contiguous"
            )));
        }
        Ok(self.data.select_rows(&idx))
    }
}

/// Builds a class model directly from parameters.
pub fn class_model(
    label: u32,
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    prior: f64,
) -> Result<ClassModel> {
    Ok(ClassModel {
        label,
        loc_scat: LocationScatter::new(mu, sigma)?,
        prior,
        n_raw: 0,
        n_inlier: 0,
        blocks: None,
    })
}
