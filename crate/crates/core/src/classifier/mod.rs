//! The decision model being explained.
//!
//! Anything implementing [`Classifier`] can stand in for the model; the
//! built-in one is a gradient-boosted tree ensemble. A 1-nearest-neighbour
//! model is available for debugging runs.

mod gbt;
mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, Dataset, FeatureSchema};
use crate::error::{Error, Result};
use crate::scaling::{compute_scaling, distance, ScalingStats};

pub use gbt::{train_gbt, GbtModel, GbtParams};
pub use tree::{Node, RegressionTree, SplitTest};

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub trait Classifier: Send + Sync {
    /// Labels the model can emit, in tie-breaking order.
    fn classes(&self) -> &[ClassLabel];

    fn n_features(&self) -> usize;

    /// Predicts for a vector already known to have `n_features()` entries.
    fn predict_unchecked(&self, values: &[f64]) -> ClassLabel;

    fn predict(&self, values: &[f64]) -> Result<ClassLabel> {
        if values.len() != self.n_features() {
            return Err(Error::ArityMismatch {
                expected: self.n_features(),
                actual: values.len(),
            });
        }
        Ok(self.predict_unchecked(values))
    }
}

impl Classifier for GbtModel {
    fn classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    fn n_features(&self) -> usize {
        self.kinds.len()
    }

    fn predict_unchecked(&self, values: &[f64]) -> ClassLabel {
        self.predict_label(values)
    }
}

/// 1-nearest-neighbour under the unit-variance distance; ties go to the
/// lower instance id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneNnModel {
    classes: Vec<ClassLabel>,
    scaling: ScalingStats,
    rows: Vec<(Vec<f64>, ClassLabel)>,
}

impl OneNnModel {
    pub fn fit(train_set: &Dataset) -> Result<Self> {
        if train_set.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        Ok(Self {
            classes: train_set.class_set().into_iter().collect(),
            scaling: compute_scaling(train_set),
            rows: train_set
                .instances()
                .iter()
                .map(|i| (i.values.clone(), i.label))
                .collect(),
        })
    }
}

impl Classifier for OneNnModel {
    fn classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    fn n_features(&self) -> usize {
        self.scaling.features.len()
    }

    fn predict_unchecked(&self, values: &[f64]) -> ClassLabel {
        let mut best = (f64::INFINITY, self.rows[0].1);
        for (row, label) in &self.rows {
            let d = distance(values, row, &self.scaling);
            if d < best.0 {
                best = (d, *label);
            }
        }
        best.1
    }
}

/// A trained model of either built-in kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Gbt(GbtModel),
    OneNn(OneNnModel),
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    model: Model,
}

impl Model {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })
        .expect("model always serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedFormatVersion {
                kind: "model",
                found: doc.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        Ok(doc.model)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// True when the model was trained on vectors shaped like `schema`.
    pub fn fits_schema(&self, schema: &FeatureSchema) -> bool {
        self.n_features() == schema.len()
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::Gbt(m) => m,
            Model::OneNn(m) => m,
        }
    }
}

impl Classifier for Model {
    fn classes(&self) -> &[ClassLabel] {
        self.inner().classes()
    }

    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn predict_unchecked(&self, values: &[f64]) -> ClassLabel {
        self.inner().predict_unchecked(values)
    }
}
