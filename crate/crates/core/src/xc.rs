//! Explanation-case mining.
//!
//! An explanation case is an ordered pair `(x, x')` of instances with
//! different classes whose feature partition has between 1 and `d`
//! difference features. The case base is the (optionally capped) list of all
//! such pairs in a population.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Instance};
use crate::error::{Error, Result};
use crate::scaling::{
    count_diffs_within, distance, partition_features, FeaturePartition, ScalingStats,
};

pub const XC_BASE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationCase {
    /// Problem side.
    pub x_id: usize,
    /// Unlike-neighbour side.
    pub xprime_id: usize,
    pub partition: FeaturePartition,
    /// Sparsity bound the case was mined under.
    pub d: usize,
    /// Distance between `x` and `x'` under the mining scaling.
    pub pair_distance: f64,
}

/// True iff the two instances carry different class labels.
pub fn is_nun(x: &Instance, xprime: &Instance) -> bool {
    x.label != xprime.label
}

/// All ordered pairs `(x, x')` with different classes and `1..=d` difference
/// features, ordered by `(x_id, xprime_id)`.
pub fn mine_xcs(population: &Dataset, d: usize, stats: &ScalingStats) -> Vec<ExplanationCase> {
    assert!(d >= 1, "sparsity bound must be at least 1");
    let schema = population.schema();
    let instances = population.instances();
    instances
        .par_iter()
        .flat_map_iter(|x| {
            instances.iter().filter_map(move |xp| {
                if !is_nun(x, xp) {
                    return None;
                }
                match count_diffs_within(&x.values, &xp.values, stats, schema, d) {
                    Some(n) if n >= 1 => Some(ExplanationCase {
                        x_id: x.id,
                        xprime_id: xp.id,
                        partition: partition_features(&x.values, &xp.values, stats, schema),
                        d,
                        pair_distance: distance(&x.values, &xp.values, stats),
                    }),
                    _ => None,
                }
            })
        })
        .collect()
}

/// Number of ordered pairs `(x, x')` with different classes.
pub fn count_unlike_pairs(population: &Dataset) -> usize {
    let n = population.len();
    let mut per_class = std::collections::BTreeMap::new();
    for i in population.instances() {
        *per_class.entry(i.label).or_insert(0usize) += 1;
    }
    per_class.values().map(|&c| c * (n - c)).sum()
}

/// Fraction of unlike pairs that qualify as explanation cases at `d`.
/// Zero for a single-class population.
pub fn native_fraction(population: &Dataset, d: usize, stats: &ScalingStats) -> f64 {
    let total = count_unlike_pairs(population);
    if total == 0 {
        return 0.0;
    }
    mine_xcs(population, d, stats).len() as f64 / total as f64
}

/// How a case list larger than the cap is reduced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapPolicy {
    /// Uniform random sample without replacement.
    #[default]
    Random,
    /// The `cap` cases with the smallest pair distance.
    Closest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XcBase {
    pub cases: Vec<ExplanationCase>,
    pub member_ids: BTreeSet<usize>,
}

#[derive(Serialize, Deserialize)]
struct XcBaseDocument {
    format_version: u32,
    cases: Vec<ExplanationCase>,
}

impl XcBase {
    pub fn new(cases: Vec<ExplanationCase>) -> Self {
        let member_ids = cases.iter().flat_map(|c| [c.x_id, c.xprime_id]).collect();
        Self { cases, member_ids }
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn to_json(&self) -> String {
        let doc = XcBaseDocument {
            format_version: XC_BASE_FORMAT_VERSION,
            cases: self.cases.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("case base always serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: XcBaseDocument = serde_json::from_str(text)?;
        if doc.format_version != XC_BASE_FORMAT_VERSION {
            return Err(Error::UnsupportedFormatVersion {
                kind: "case base",
                found: doc.format_version,
                expected: XC_BASE_FORMAT_VERSION,
            });
        }
        Ok(Self::new(doc.cases))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks every case against the dataset: both ids present, classes
    /// differ and the stored diff count is within `1..=d`.
    pub fn validate_against(&self, dataset: &Dataset) -> Result<()> {
        for case in &self.cases {
            let x = dataset
                .get(case.x_id)
                .ok_or(Error::UnknownInstance(case.x_id))?;
            let xp = dataset
                .get(case.xprime_id)
                .ok_or(Error::UnknownInstance(case.xprime_id))?;
            let n = case.partition.diffs.len();
            if !is_nun(x, xp) || n == 0 || n > case.d {
                return Err(Error::InvalidConfig(format!(
                    "case ({}, {}) is not a valid explanation case",
                    case.x_id, case.xprime_id
                )));
            }
        }
        Ok(())
    }
}

/// Caps a mined case list at `cap` cases. Under the cap everything is kept;
/// otherwise the random policy draws a uniform sample from `rng`. The kept
/// cases retain their mining order.
pub fn build_xc_base<R: Rng + ?Sized>(
    xcs: Vec<ExplanationCase>,
    cap: usize,
    policy: CapPolicy,
    rng: &mut R,
) -> XcBase {
    if xcs.len() <= cap {
        return XcBase::new(xcs);
    }
    let mut keep: Vec<usize> = match policy {
        CapPolicy::Random => rand::seq::index::sample(rng, xcs.len(), cap).into_vec(),
        CapPolicy::Closest => {
            let mut order: Vec<usize> = (0..xcs.len()).collect();
            order.sort_by(|&a, &b| {
                xcs[a]
                    .pair_distance
                    .total_cmp(&xcs[b].pair_distance)
                    .then(a.cmp(&b))
            });
            order.truncate(cap);
            order
        }
    };
    keep.sort_unstable();
    let mut slots: Vec<Option<ExplanationCase>> = xcs.into_iter().map(Some).collect();
    XcBase::new(
        keep.into_iter()
            .map(|i| slots[i].take().expect("sample indices are distinct"))
            .collect(),
    )
}
