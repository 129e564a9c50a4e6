//! Per-problem records and the three sweep metrics: coverage, relative
//! distance and feature diversity.
//!
//! Uncovered problems count towards coverage only. Distance and diversity
//! are averaged over covered problems, pooled across folds.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::engine::{CandidateGroup, Generator, Method, ValidationMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub test_id: usize,
    pub covered: bool,
    /// Distance from `p` to its closest valid counterfactual.
    pub closest_cf_distance: Option<f64>,
    /// Distance between the two sides of the case that produced it.
    pub xc_pair_distance: Option<f64>,
    /// Features that are a difference feature in at least one valid
    /// counterfactual.
    pub diff_feature_union: BTreeSet<usize>,
    pub n_valid: usize,
}

impl ProblemRecord {
    /// Summarizes generated groups. The closest counterfactual is the first
    /// minimum in group order (nearest case first), which is the candidate
    /// kept when several cases produce the same vector.
    pub fn from_groups<M: Classifier + ?Sized>(
        test_id: usize,
        groups: &[CandidateGroup],
        generator: &Generator<'_, M>,
    ) -> Self {
        let mut closest: Option<(f64, &CandidateGroup)> = None;
        let mut union = BTreeSet::new();
        let mut n_valid = 0;
        for group in groups {
            for c in group.candidates.iter().filter(|c| c.valid) {
                n_valid += 1;
                union.extend(c.partition_vs_p.diffs.iter().copied());
                if closest.is_none_or(|(d, _)| c.distance_to_p < d) {
                    closest = Some((c.distance_to_p, group));
                }
            }
        }
        ProblemRecord {
            test_id,
            covered: closest.is_some(),
            closest_cf_distance: closest.map(|(d, _)| d),
            xc_pair_distance: closest.and_then(|(_, g)| generator.pair_distance(&g.xc)),
            diff_feature_union: union,
            n_valid,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub fold_index: usize,
    pub method: Method,
    pub k: usize,
    pub d: usize,
    pub validation_mode: ValidationMode,
    pub n_features: usize,
    pub problems: Vec<ProblemRecord>,
}

fn problems(cells: &[CellResult]) -> impl Iterator<Item = (&CellResult, &ProblemRecord)> {
    cells
        .iter()
        .flat_map(|c| c.problems.iter().map(move |p| (c, p)))
}

pub fn covered_count(cells: &[CellResult]) -> (usize, usize) {
    let mut covered = 0;
    let mut total = 0;
    for (_, p) in problems(cells) {
        total += 1;
        covered += p.covered as usize;
    }
    (covered, total)
}

/// Fraction of test problems with at least one valid counterfactual.
pub fn coverage(cells: &[CellResult]) -> f64 {
    let (covered, total) = covered_count(cells);
    if total == 0 {
        0.0
    } else {
        covered as f64 / total as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeDistance {
    pub mean: Option<f64>,
    /// One ratio per covered problem with a nonzero case distance.
    pub ratios: Vec<f64>,
    /// Covered problems skipped because their case pair distance was zero.
    pub excluded_zero_denominator: usize,
}

/// Mean of closest-counterfactual distance over the producing case's pair
/// distance.
pub fn relative_distance(cells: &[CellResult]) -> RelativeDistance {
    let mut ratios = Vec::new();
    let mut excluded = 0;
    for (_, p) in problems(cells) {
        if let (true, Some(num), Some(den)) = (p.covered, p.closest_cf_distance, p.xc_pair_distance)
        {
            if den > 0.0 {
                ratios.push(num / den);
            } else {
                excluded += 1;
            }
        }
    }
    RelativeDistance {
        mean: mean(&ratios),
        ratios,
        excluded_zero_denominator: excluded,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diversity {
    /// Mean over covered problems of |diff union| / |features|.
    pub mean: Option<f64>,
    pub per_problem: Vec<f64>,
    /// |union over every covered problem| / |features|, averaged over the
    /// distinct folds present.
    pub pooled: Option<f64>,
}

pub fn diversity(cells: &[CellResult]) -> Diversity {
    let per_problem: Vec<f64> = problems(cells)
        .filter(|(_, p)| p.covered)
        .map(|(c, p)| p.diff_feature_union.len() as f64 / c.n_features as f64)
        .collect();
    let pooled_per_cell: Vec<f64> = cells
        .iter()
        .filter(|c| c.problems.iter().any(|p| p.covered))
        .map(|c| {
            let union: BTreeSet<usize> = c
                .problems
                .iter()
                .flat_map(|p| p.diff_feature_union.iter().copied())
                .collect();
            union.len() as f64 / c.n_features as f64
        })
        .collect();
    Diversity {
        mean: mean(&per_problem),
        per_problem,
        pooled: mean(&pooled_per_cell),
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}
