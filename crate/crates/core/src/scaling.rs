//! Unit-variance scaling, the mixed-type Euclidean distance and the
//! match/difference feature partition built on the same per-feature
//! comparison.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureKind, FeatureSchema};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericScale {
    pub mean: f64,
    /// Population standard deviation; `1.0` when the feature is constant.
    pub std: f64,
    pub constant: bool,
}

/// Per-feature scaling fitted on one population. `None` for categoricals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingStats {
    pub features: Vec<Option<NumericScale>>,
}

/// Fits mean and population standard deviation (divisor n) for every numeric
/// feature. Constant features get `std = 1`.
pub fn compute_scaling(dataset: &Dataset) -> ScalingStats {
    let schema = dataset.schema();
    let n = dataset.len() as f64;
    let features = (0..schema.len())
        .map(|f| match schema.kind(f) {
            FeatureKind::Categorical => None,
            FeatureKind::Numeric => {
                let mean = dataset.instances().iter().map(|i| i.values[f]).sum::<f64>() / n;
                let var = dataset
                    .instances()
                    .iter()
                    .map(|i| (i.values[f] - mean).powi(2))
                    .sum::<f64>()
                    / n;
                let std = var.sqrt();
                let constant = !(std > 0.0);
                if constant {
                    log::warn!("feature '{}' is constant; using std = 1", schema.name(f));
                }
                Some(NumericScale {
                    mean,
                    std: if constant { 1.0 } else { std },
                    constant,
                })
            }
        })
        .collect();
    ScalingStats { features }
}

impl ScalingStats {
    /// Identity scaling (mean 0, std 1) for every numeric feature.
    pub fn identity(schema: &FeatureSchema) -> Self {
        Self {
            features: (0..schema.len())
                .map(|f| match schema.kind(f) {
                    FeatureKind::Numeric => Some(NumericScale {
                        mean: 0.0,
                        std: 1.0,
                        constant: false,
                    }),
                    FeatureKind::Categorical => None,
                })
                .collect(),
        }
    }

    /// Standardized copy of a value vector; categorical codes pass through.
    pub fn standardize(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.features)
            .map(|(&v, scale)| match scale {
                Some(s) => (v - s.mean) / s.std,
                None => v,
            })
            .collect()
    }

    /// Per-feature contribution to the distance between `a` and `b` on
    /// feature `f`: scaled absolute difference for numerics, 0/1 mismatch for
    /// categoricals.
    #[inline]
    pub fn feature_gap(&self, f: usize, a: f64, b: f64) -> f64 {
        match &self.features[f] {
            Some(s) => (a - b).abs() / s.std,
            None => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

/// Euclidean distance over scaled numeric gaps and categorical mismatches.
pub fn distance(a: &[f64], b: &[f64], stats: &ScalingStats) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(f, (&x, &y))| stats.feature_gap(f, x, y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[inline]
fn is_match(schema: &FeatureSchema, stats: &ScalingStats, f: usize, a: f64, b: f64) -> bool {
    match schema.kind(f) {
        FeatureKind::Categorical => a == b,
        FeatureKind::Numeric => stats.feature_gap(f, a, b) <= schema.tolerance(),
    }
}

/// Match and difference features between two instances, as sorted feature
/// indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeaturePartition {
    pub matches: Vec<usize>,
    pub diffs: Vec<usize>,
}

impl FeaturePartition {
    pub fn diff_names<'a>(&self, schema: &'a FeatureSchema) -> Vec<&'a str> {
        self.diffs.iter().map(|&f| schema.name(f)).collect()
    }
}

pub fn partition_features(
    a: &[f64],
    b: &[f64],
    stats: &ScalingStats,
    schema: &FeatureSchema,
) -> FeaturePartition {
    let mut part = FeaturePartition::default();
    for (f, (&x, &y)) in a.iter().zip(b).enumerate() {
        if is_match(schema, stats, f, x, y) {
            part.matches.push(f);
        } else {
            part.diffs.push(f);
        }
    }
    part
}

/// Number of difference features, stopping early once it exceeds `limit`.
/// Returns `None` when the count is above `limit`.
pub fn count_diffs_within(
    a: &[f64],
    b: &[f64],
    stats: &ScalingStats,
    schema: &FeatureSchema,
    limit: usize,
) -> Option<usize> {
    let mut count = 0;
    for (f, (&x, &y)) in a.iter().zip(b).enumerate() {
        if !is_match(schema, stats, f, x, y) {
            count += 1;
            if count > limit {
                return None;
            }
        }
    }
    Some(count)
}
