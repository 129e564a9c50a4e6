//! Gradient-boosted regression trees on the multinomial deviance.
//!
//! Two classes are boosted with a single logit tree per stage; three or more
//! classes get one tree per class per stage on softmax residuals. Leaf values
//! are one Newton step on the deviance, scaled by the learning rate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::RegressionTree;
use crate::dataset::{ClassLabel, Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::scaling::{compute_scaling, ScalingStats};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub learning_rate: f64,
    pub n_stages: usize,
    pub max_depth: usize,
    /// Fraction of rows drawn (without replacement) for each stage.
    pub subsample: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            n_stages: 100,
            max_depth: 3,
            subsample: 1.0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if self.n_stages == 0 {
            return Err(Error::InvalidConfig("n_stages must be >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("max_depth must be >= 1".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::InvalidConfig("subsample must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub(super) classes: Vec<ClassLabel>,
    pub(super) kinds: Vec<FeatureKind>,
    pub(super) scaling: ScalingStats,
    /// Initial raw score per output (1 output for two classes, K otherwise,
    /// none for a single class).
    init: Vec<f64>,
    /// `stages[s][k]` is the tree for output `k` at stage `s`.
    stages: Vec<Vec<RegressionTree>>,
    pub params: GbtParams,
    pub train_size: usize,
    /// Mean training deviance after the initial fit and after every stage.
    pub train_loss: Vec<f64>,
}

const DENOM_FLOOR: f64 = 1e-150;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(scores);
    scores.iter().map(|s| (s - lse).exp()).collect()
}

/// Fits the booster. `rng` drives row subsampling and is untouched when
/// `subsample == 1`.
pub fn train_gbt<R: Rng + ?Sized>(
    train_set: &Dataset,
    params: &GbtParams,
    rng: &mut R,
) -> Result<GbtModel> {
    params.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let schema = train_set.schema();
    let kinds: Vec<FeatureKind> = (0..schema.len()).map(|f| schema.kind(f)).collect();
    let scaling = compute_scaling(train_set);
    let classes: Vec<ClassLabel> = train_set.class_set().into_iter().collect();
    let rows: Vec<Vec<f64>> = train_set
        .instances()
        .iter()
        .map(|i| scaling.standardize(&i.values))
        .collect();
    let y: Vec<usize> = train_set
        .instances()
        .iter()
        .map(|i| {
            classes
                .binary_search(&i.label)
                .expect("label from class set")
        })
        .collect();
    let n = rows.len();
    let k = classes.len();

    let mut model = GbtModel {
        classes,
        kinds,
        scaling,
        init: Vec::new(),
        stages: Vec::new(),
        params: params.clone(),
        train_size: n,
        train_loss: Vec::new(),
    };
    if k == 1 {
        model.train_loss.push(0.0);
        return Ok(model);
    }

    let outputs = if k == 2 { 1 } else { k };
    let counts: Vec<f64> = (0..k)
        .map(|c| y.iter().filter(|&&l| l == c).count() as f64)
        .collect();
    model.init = if k == 2 {
        vec![(counts[1] / counts[0]).ln()]
    } else {
        counts.iter().map(|c| (c / n as f64).ln()).collect()
    };
    let mut raw: Vec<Vec<f64>> = vec![model.init.clone(); n];
    model.train_loss.push(deviance(&raw, &y, k));

    let all_rows: Vec<usize> = (0..n).collect();
    let draw = ((params.subsample * n as f64).floor() as usize).max(1);
    for _ in 0..params.n_stages {
        let sample: Vec<usize> = if draw < n {
            let mut s = rand::seq::index::sample(rng, n, draw).into_vec();
            s.sort_unstable();
            s
        } else {
            all_rows.clone()
        };

        // Residuals for every output, from the scores at the start of the stage.
        let residuals: Vec<Vec<f64>> = if k == 2 {
            vec![(0..n)
                .map(|i| (y[i] == 1) as u8 as f64 - sigmoid(raw[i][0]))
                .collect()]
        } else {
            let probs: Vec<Vec<f64>> = raw.iter().map(|r| softmax(r)).collect();
            (0..k)
                .map(|c| {
                    (0..n)
                        .map(|i| (y[i] == c) as u8 as f64 - probs[i][c])
                        .collect()
                })
                .collect()
        };

        let mut stage = Vec::with_capacity(outputs);
        for (out, r) in residuals.iter().enumerate() {
            let leaf = |idx: &[usize]| -> f64 {
                let num: f64 = idx.iter().map(|&i| r[i]).sum();
                let denom: f64 = if k == 2 {
                    idx.iter()
                        .map(|&i| {
                            let p = (y[i] == 1) as u8 as f64 - r[i];
                            p * (1.0 - p)
                        })
                        .sum()
                } else {
                    idx.iter().map(|&i| r[i].abs() * (1.0 - r[i].abs())).sum()
                };
                if denom.abs() < DENOM_FLOOR {
                    0.0
                } else if k == 2 {
                    num / denom
                } else {
                    (k as f64 - 1.0) / k as f64 * num / denom
                }
            };
            let tree =
                RegressionTree::fit(&rows, &model.kinds, r, &sample, params.max_depth, &leaf);
            for (i, row) in rows.iter().enumerate() {
                raw[i][out] += params.learning_rate * tree.predict(row);
            }
            stage.push(tree);
        }
        model.stages.push(stage);
        model.train_loss.push(deviance(&raw, &y, k));
    }
    Ok(model)
}

/// Mean multinomial deviance (log-loss) of raw scores.
fn deviance(raw: &[Vec<f64>], y: &[usize], k: usize) -> f64 {
    let total: f64 = raw
        .iter()
        .zip(y)
        .map(|(r, &label)| {
            if k == 2 {
                if label == 1 {
                    softplus(-r[0])
                } else {
                    softplus(r[0])
                }
            } else {
                log_sum_exp(r) - r[label]
            }
        })
        .sum();
    total / raw.len() as f64
}

impl GbtModel {
    fn raw_scores(&self, values: &[f64]) -> Vec<f64> {
        let row = self.scaling.standardize(values);
        let mut raw = self.init.clone();
        for stage in &self.stages {
            for (out, tree) in stage.iter().enumerate() {
                raw[out] += self.params.learning_rate * tree.predict(&row);
            }
        }
        raw
    }

    /// Class probabilities aligned with `classes()`.
    pub fn predict_proba(&self, values: &[f64]) -> Vec<f64> {
        match self.classes.len() {
            1 => vec![1.0],
            2 => {
                let p1 = sigmoid(self.raw_scores(values)[0]);
                vec![1.0 - p1, p1]
            }
            _ => softmax(&self.raw_scores(values)),
        }
    }

    pub(super) fn predict_label(&self, values: &[f64]) -> ClassLabel {
        match self.classes.len() {
            1 => self.classes[0],
            2 => {
                if self.raw_scores(values)[0] > 0.0 {
                    self.classes[1]
                } else {
                    self.classes[0]
                }
            }
            _ => {
                let raw = self.raw_scores(values);
                let mut best = 0;
                for (c, &s) in raw.iter().enumerate() {
                    if s > raw[best] {
                        best = c;
                    }
                }
                self.classes[best]
            }
        }
    }
}
