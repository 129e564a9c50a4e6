//! Counterfactual generation by reusing the k nearest explanation cases.
//!
//! For a target `p`, the cases whose problem side shares `p`'s class are
//! ranked by distance to `p`. Each selected case nominates its unlike class:
//! the case's own `x'` and every population instance of that class form the
//! pool of donors. A donor within `1..=d` difference features of `p` yields a
//! counterfactual that keeps `p`'s values on the match features and takes the
//! donor's values on the difference features. Candidates the model accepts
//! are deduplicated and ranked by distance to `p`.
//!
//! The 1NN baseline reuses only the nearest case's own `x'`; the 1NN*
//! baseline is the k = 1 case of the main method.

use std::collections::BTreeMap;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::dataset::{ClassLabel, Dataset, FeatureSchema, Instance};
use crate::error::{Error, Result};
use crate::scaling::{
    count_diffs_within, distance, partition_features, FeaturePartition, ScalingStats,
};
use crate::xc::{ExplanationCase, XcBase};

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    /// Accept when the model predicts the class of the case's `x'`.
    #[default]
    SameClass,
    /// Accept when the model predicts anything but `p`'s class.
    ClassChange,
}

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Knn,
    OneNn,
    OneNnStar,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Knn => "knn",
            Method::OneNn => "one_nn",
            Method::OneNnStar => "one_nn_star",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "knn" => Some(Method::Knn),
            "one_nn" | "1nn" => Some(Method::OneNn),
            "one_nn_star" | "1nn*" => Some(Method::OneNnStar),
            _ => None,
        }
    }
}

impl ValidationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidationMode::SameClass => "same_class",
            ValidationMode::ClassChange => "class_change",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "same_class" => Some(ValidationMode::SameClass),
            "class_change" => Some(ValidationMode::ClassChange),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub k: usize,
    pub d: usize,
    pub validation_mode: ValidationMode,
    pub method: Method,
    /// Also return candidates the model rejected (marked `valid = false`).
    #[serde(default)]
    pub keep_invalid: bool,
}

impl GenerationConfig {
    pub fn new(k: usize, d: usize) -> Self {
        Self {
            k,
            d,
            validation_mode: ValidationMode::SameClass,
            method: Method::Knn,
            keep_invalid: false,
        }
    }

    pub fn with_mode(mut self, mode: ValidationMode) -> Self {
        self.validation_mode = mode;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if self.d == 0 {
            return Err(Error::InvalidConfig("d must be >= 1".into()));
        }
        Ok(())
    }
}

/// Identifies the explanation case a candidate came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct XcRef {
    pub x_id: usize,
    pub xprime_id: usize,
}

impl From<&ExplanationCase> for XcRef {
    fn from(xc: &ExplanationCase) -> Self {
        Self {
            x_id: xc.x_id,
            xprime_id: xc.xprime_id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub values: Vec<f64>,
    pub source_xc: XcRef,
    /// Instance whose values were copied onto the difference features.
    pub source_nun_id: usize,
    pub partition_vs_p: FeaturePartition,
    pub distance_to_p: f64,
    pub valid: bool,
    pub target_class: ClassLabel,
}

/// Candidates produced from one reused explanation case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateGroup {
    pub xc: ExplanationCase,
    pub candidates: Vec<Candidate>,
}

/// A counterfactual value vector and its partition against the target.
#[derive(Clone, Debug, PartialEq)]
pub struct Substitution {
    pub values: Vec<f64>,
    pub partition: FeaturePartition,
}

/// Copies `nun`'s values onto the features where it differs from `p`.
/// Returns `None` when nothing differs (the result would equal `p`).
pub fn gen_cf(
    p: &[f64],
    nun: &[f64],
    stats: &ScalingStats,
    schema: &FeatureSchema,
) -> Option<Substitution> {
    let partition = partition_features(p, nun, stats, schema);
    if partition.diffs.is_empty() {
        return None;
    }
    let mut values = p.to_vec();
    for &f in &partition.diffs {
        values[f] = nun[f];
    }
    Some(Substitution { values, partition })
}

/// Checks a counterfactual vector against the model under `mode`.
pub fn validate_cf<M: Classifier + ?Sized>(
    cf: &[f64],
    xc_target: ClassLabel,
    model: &M,
    mode: ValidationMode,
    p_class: ClassLabel,
) -> bool {
    let predicted = model.predict_unchecked(cf);
    match mode {
        ValidationMode::SameClass => predicted == xc_target,
        ValidationMode::ClassChange => predicted != p_class,
    }
}

/// Generation context over one population, its scaling and a model.
pub struct Generator<'a, M: Classifier + ?Sized> {
    population: &'a Dataset,
    stats: &'a ScalingStats,
    model: &'a M,
    /// Positions into `population.instances()`, per class, in id order.
    by_class: BTreeMap<ClassLabel, Vec<usize>>,
}

impl<'a, M: Classifier + ?Sized> Generator<'a, M> {
    pub fn new(population: &'a Dataset, stats: &'a ScalingStats, model: &'a M) -> Result<Self> {
        let width = population.schema().len();
        if model.n_features() != width || stats.features.len() != width {
            return Err(Error::ArityMismatch {
                expected: width,
                actual: model.n_features(),
            });
        }
        let mut by_class: BTreeMap<ClassLabel, Vec<usize>> = BTreeMap::new();
        for (pos, inst) in population.instances().iter().enumerate() {
            by_class.entry(inst.label).or_default().push(pos);
        }
        Ok(Self {
            population,
            stats,
            model,
            by_class,
        })
    }

    pub fn population(&self) -> &Dataset {
        self.population
    }

    pub fn stats(&self) -> &ScalingStats {
        self.stats
    }

    pub fn model(&self) -> &M {
        self.model
    }

    /// Distance between a case's two instances under this context's scaling.
    pub fn pair_distance(&self, xc: &ExplanationCase) -> Option<f64> {
        let x = self.population.get(xc.x_id)?;
        let xp = self.population.get(xc.xprime_id)?;
        Some(distance(&x.values, &xp.values, self.stats))
    }

    /// The (up to) `k` cases whose problem side has `p`'s class, nearest
    /// first; ties broken by `(x_id, xprime_id)`. Cases whose instances are
    /// not in the population are skipped.
    pub fn get_xcs<'b>(
        &self,
        p: &Instance,
        base: &'b XcBase,
        k: usize,
    ) -> Vec<&'b ExplanationCase> {
        let mut eligible: Vec<(f64, &ExplanationCase)> = base
            .cases
            .iter()
            .filter_map(|xc| {
                let x = self.population.get(xc.x_id)?;
                self.population.get(xc.xprime_id)?;
                (x.label == p.label).then(|| (distance(&x.values, &p.values, self.stats), xc))
            })
            .collect();
        eligible.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.x_id.cmp(&b.1.x_id))
                .then(a.1.xprime_id.cmp(&b.1.xprime_id))
        });
        eligible.truncate(k);
        eligible.into_iter().map(|(_, xc)| xc).collect()
    }

    /// Counterfactuals for `p` from one case, drawing donors from `pool`.
    fn candidates_from<'p>(
        &self,
        p: &Instance,
        xc: &ExplanationCase,
        pool: impl Iterator<Item = &'p Instance>,
        config: &GenerationConfig,
    ) -> Vec<Candidate> {
        let schema = self.population.schema();
        let target_class = match self.population.get(xc.xprime_id) {
            Some(xp) => xp.label,
            None => return Vec::new(),
        };
        // value vector -> (donor distance to p, donor id, candidate)
        let mut kept: HashMap<Vec<u64>, (f64, usize, Candidate)> = HashMap::new();
        for nun in pool {
            match count_diffs_within(&p.values, &nun.values, self.stats, schema, config.d) {
                Some(n) if n >= 1 => {}
                _ => continue,
            }
            let Some(sub) = gen_cf(&p.values, &nun.values, self.stats, schema) else {
                continue;
            };
            let valid = validate_cf(
                &sub.values,
                target_class,
                self.model,
                config.validation_mode,
                p.label,
            );
            if !valid && !config.keep_invalid {
                continue;
            }
            let donor_distance = distance(&p.values, &nun.values, self.stats);
            let candidate = Candidate {
                distance_to_p: distance(&sub.values, &p.values, self.stats),
                partition_vs_p: partition_features(&sub.values, &p.values, self.stats, schema),
                values: sub.values,
                source_xc: XcRef::from(xc),
                source_nun_id: nun.id,
                valid,
                target_class,
            };
            let key: Vec<u64> = candidate.values.iter().map(|v| v.to_bits()).collect();
            match kept.get(&key) {
                Some((d, id, _)) if (*d, *id) <= (donor_distance, nun.id) => {}
                _ => {
                    kept.insert(key, (donor_distance, nun.id, candidate));
                }
            }
        }
        let mut out: Vec<Candidate> = kept.into_values().map(|(_, _, c)| c).collect();
        out.sort_by(|a, b| {
            a.distance_to_p
                .total_cmp(&b.distance_to_p)
                .then(a.source_nun_id.cmp(&b.source_nun_id))
        });
        out
    }

    /// Donor pool of a case: its `x'` plus every population instance of
    /// `x'`'s class, each once, in id order.
    fn nun_pool(&self, xc: &ExplanationCase) -> Vec<&'a Instance> {
        let instances = self.population.instances();
        let Some(xp) = self.population.get(xc.xprime_id) else {
            return Vec::new();
        };
        // x' is a population member, so its class list already contains it.
        self.by_class[&xp.label]
            .iter()
            .map(|&i| &instances[i])
            .collect()
    }

    pub fn gen_cfs(
        &self,
        p: &Instance,
        xc: &ExplanationCase,
        config: &GenerationConfig,
    ) -> Vec<Candidate> {
        self.candidates_from(p, xc, self.nun_pool(xc).into_iter(), config)
    }

    /// Reuses the `config.k` nearest cases, one candidate group per case.
    pub fn gen_knn_cfs(
        &self,
        p: &Instance,
        base: &XcBase,
        config: &GenerationConfig,
    ) -> Vec<CandidateGroup> {
        self.get_xcs(p, base, config.k)
            .into_iter()
            .map(|xc| CandidateGroup {
                xc: xc.clone(),
                candidates: self.gen_cfs(p, xc, config),
            })
            .collect()
    }

    /// Retrieval-only baseline: the nearest case's own `x'` is the only donor.
    pub fn gen_baseline_1nn(
        &self,
        p: &Instance,
        base: &XcBase,
        config: &GenerationConfig,
    ) -> Vec<Candidate> {
        match self.get_xcs(p, base, 1).first() {
            Some(xc) => match self.population.get(xc.xprime_id) {
                Some(xp) => self.candidates_from(p, xc, std::iter::once(xp), config),
                None => Vec::new(),
            },
            None => Vec::new(),
        }
    }

    /// Retrieval-and-adaptation baseline: one case, its `x'` and `x'`'s
    /// like-class neighbours as donors.
    pub fn gen_baseline_1nn_star(
        &self,
        p: &Instance,
        base: &XcBase,
        config: &GenerationConfig,
    ) -> Vec<CandidateGroup> {
        let single = GenerationConfig {
            k: 1,
            ..config.clone()
        };
        self.gen_knn_cfs(p, base, &single)
    }

    /// Dispatches on `config.method`. Baselines come back as at most one group.
    pub fn generate(
        &self,
        p: &Instance,
        base: &XcBase,
        config: &GenerationConfig,
    ) -> Vec<CandidateGroup> {
        match config.method {
            Method::Knn => self.gen_knn_cfs(p, base, config),
            Method::OneNnStar => self.gen_baseline_1nn_star(p, base, config),
            Method::OneNn => match self.get_xcs(p, base, 1).first() {
                Some(xc) => vec![CandidateGroup {
                    xc: (*xc).clone(),
                    candidates: self.gen_baseline_1nn(p, base, config),
                }],
                None => Vec::new(),
            },
        }
    }
}

/// Flattens groups into a single list ranked by distance to `p`, dropping
/// vectors already produced by an earlier (nearer) case.
pub fn rank_candidates(groups: &[CandidateGroup]) -> Vec<&Candidate> {
    let mut seen = std::collections::HashSet::new();
    let mut out: Vec<&Candidate> = Vec::new();
    for group in groups {
        for c in &group.candidates {
            let key: Vec<u64> = c.values.iter().map(|v| v.to_bits()).collect();
            if seen.insert(key) {
                out.push(c);
            }
        }
    }
    out.sort_by(|a, b| {
        a.distance_to_p
            .total_cmp(&b.distance_to_p)
            .then(a.source_nun_id.cmp(&b.source_nun_id))
    });
    out
}
