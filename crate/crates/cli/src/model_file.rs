//! Versioned JSON persistence of a fitted classifier.
//!
//! Floats are written in shortest round-trip form, so a saved model reloads
//! with every value bit-identical.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use robust_qda::output::write_atomic;
use robust_qda::qda::{class_model, ClassModel};
use robust_qda::{FitConfig, Mode, QdaModel};
use serde::{Deserialize, Serialize};

use crate::data::LabelMap;
use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub mode: String,
    pub p: usize,
    #[serde(rename = "G")]
    pub n_classes: usize,
    pub feature_names: Vec<String>,
    pub classes: Vec<ClassEntry>,
    pub outlier_quantile: f64,
    pub fit_config: FitConfigEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub label: u32,
    /// Label as it appeared in the training data.
    pub name: String,
    pub mu: Vec<f64>,
    /// Row-major p×p.
    pub sigma: Vec<f64>,
    pub prior: f64,
    pub n_raw: usize,
    pub n_inlier: usize,
    pub blocks: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfigEntry {
    pub h_frac: f64,
    /// Requested block count; `null` means the default rule per class.
    pub q: Option<usize>,
    pub seed: u64,
}

/// A loaded model with its naming metadata.
#[derive(Debug, Clone)]
pub struct SavedModel {
    pub model: QdaModel,
    pub labels: LabelMap,
    pub feature_names: Vec<String>,
}

impl ModelFile {
    pub fn from_model(model: &QdaModel, labels: &LabelMap, feature_names: &[String]) -> Self {
        let p = model.dim();
        let classes = model
            .classes()
            .iter()
            .map(|c| ClassEntry {
                label: c.label,
                name: labels.name(c.label).to_string(),
                mu: c.loc_scat.mu().iter().copied().collect(),
                sigma: (0..p)
                    .flat_map(|i| (0..p).map(move |j| (i, j)))
                    .map(|(i, j)| c.loc_scat.sigma()[(i, j)])
                    .collect(),
                prior: c.prior,
                n_raw: c.n_raw,
                n_inlier: c.n_inlier,
                blocks: c.blocks,
            })
            .collect();
        let cfg = model.config();
        ModelFile {
            format_version: FORMAT_VERSION,
            mode: model.mode().as_str().to_string(),
            p,
            n_classes: model.n_classes(),
            feature_names: feature_names.to_vec(),
            classes,
            outlier_quantile: model.outlier_quantile(),
            fit_config: FitConfigEntry {
                h_frac: cfg.h_frac,
                q: cfg.blocks,
                seed: cfg.seed,
            },
        }
    }

    pub fn to_model(&self) -> CliResult<SavedModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::invalid(format!(
                "unsupported model format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let mode: Mode = self.mode.parse()?;
        let p = self.p;
        if self.feature_names.len() != p {
            return Err(CliError::invalid(format!(
                "model lists {} feature names for p = {p}",
                self.feature_names.len()
            )));
        }
        if self.classes.len() != self.n_classes {
            return Err(CliError::invalid(format!(
                "model declares G = {} but stores {} classes",
                self.n_classes,
                self.classes.len()
            )));
        }
        let classes = self
            .classes
            .iter()
            .map(|c| -> CliResult<ClassModel> {
                if c.mu.len() != p || c.sigma.len() != p * p {
                    return Err(CliError::invalid(format!(
                        "class {}: mu/sigma do not match p = {p}",
                        c.label
                    )));
                }
                let mut cm = class_model(
                    c.label,
                    DVector::from_column_slice(&c.mu),
                    DMatrix::from_row_slice(p, p, &c.sigma),
                    c.prior,
                )?;
                cm.n_raw = c.n_raw;
                cm.n_inlier = c.n_inlier;
                cm.blocks = c.blocks;
                Ok(cm)
            })
            .collect::<CliResult<Vec<_>>>()?;
        let config = FitConfig {
            h_frac: self.fit_config.h_frac,
            blocks: self.fit_config.q,
            seed: self.fit_config.seed,
            outlier_quantile: self.outlier_quantile,
        };
        let model = QdaModel::from_parts(mode, classes, self.outlier_quantile, config)?;
        Ok(SavedModel {
            model,
            labels: LabelMap {
                names: self.classes.iter().map(|c| c.name.clone()).collect(),
            },
            feature_names: self.feature_names.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }
}

pub fn save(
    path: &Path,
    model: &QdaModel,
    labels: &LabelMap,
    feature_names: &[String],
) -> CliResult<()> {
    let text = ModelFile::from_model(model, labels, feature_names).to_json();
    write_atomic(path, text.as_bytes()).map_err(|e| match e {
        robust_qda::Error::Io(io) => CliError::io(path, io),
        other => other.into(),
    })
}

pub fn load(path: &Path) -> CliResult<SavedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| CliError::invalid(format!("{}: not a model file: {e}", path.display())))?;
    file.to_model()
}

#[cfg(test)]
mod tests {
    use super::*;
    use robust_qda::sim::toy_dataset;

    #[test]
    fn file_round_trip_is_exact() {
        let (data, _) = toy_dataset(1).unwrap();
        let model = robust_qda::fit(&data, Mode::Robust, &FitConfig::default()).unwrap();
        let labels = LabelMap {
            names: vec!["a".into(), "b".into()],
        };
        let names = vec!["x".to_string(), "y".to_string()];
        let file = ModelFile::from_model(&model, &labels, &names);
        let back: ModelFile = serde_json::from_str(&file.to_json()).unwrap();
        assert_eq!(back, file);
        let saved = back.to_model().unwrap();
        assert_eq!(saved.labels, labels);
        for (a, b) in saved.model.classes().iter().zip(model.classes()) {
            assert_eq!(a.loc_scat.mu(), b.loc_scat.mu());
            assert_eq!(a.loc_scat.sigma(), b.loc_scat.sigma());
            assert_eq!(a.prior.to_bits(), b.prior.to_bits());
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let (data, _) = toy_dataset(1).unwrap();
        let model = robust_qda::fit(&data, Mode::Classical, &FitConfig::default()).unwrap();
        let labels = LabelMap {
            names: vec!["1".into(), "2".into()],
        };
        let mut file = ModelFile::from_model(&model, &labels, &["x".into(), "y".into()]);
        file.format_version = 9;
        assert_eq!(file.to_model().unwrap_err().exit_code(), 2);
    }
}
