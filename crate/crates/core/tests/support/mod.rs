//! Shared fixtures for the integration tests: synthetic datasets, a
//! rule-based model and a brute-force counterfactual oracle written from the
//! textbook definitions (no calls into the crate's scaling or engine code).

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xcf::classifier::Classifier;
use xcf::dataset::{
    ClassLabel, Dataset, Feature, FeatureKind, FeatureSchema, Instance, Vocabulary,
};
use xcf::engine::{Candidate, CandidateGroup, ValidationMode};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn class_names(n: usize) -> Vec<String> {
    (0..n).map(|c| format!("c{c}")).collect()
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Small mixed-type dataset on coarse grids, so that exact matches are
/// common and no numeric gap sits near the match tolerance.
pub fn random_mixed(seed: u64, max_n: usize) -> Dataset {
    let mut r = rng(seed);
    let n = r.random_range(20..=max_n);
    let n_features = r.random_range(3..=6);
    let n_classes = r.random_range(2..=4);
    let mut features = Vec::new();
    let mut categories = Vec::new();
    let mut levels = Vec::new();
    for f in 0..n_features {
        if r.random_bool(0.35) {
            let k = r.random_range(2..=4);
            features.push(Feature::categorical(format!("cat{f}")));
            categories.push((0..k).map(|v| format!("v{v}")).collect::<Vec<_>>());
            levels.push((k, 1.0));
        } else {
            features.push(Feature::numeric(format!("num{f}")));
            categories.push(Vec::new());
            let step = [1.0, 0.5, 2.0][r.random_range(0..3)];
            levels.push((r.random_range(2..=4), step));
        }
    }
    let schema = FeatureSchema::new(features, "label", 0.1).unwrap();
    let instances = (0..n)
        .map(|id| {
            let values = levels
                .iter()
                .map(|&(k, step)| r.random_range(0..k) as f64 * step)
                .collect();
            Instance {
                id,
                values,
                label: ClassLabel(r.random_range(0..n_classes) as u32),
            }
        })
        .collect();
    let vocab = Vocabulary {
        class_names: class_names(n_classes),
        categories,
    };
    Dataset::new(schema, instances, Arc::new(vocab)).unwrap()
}

/// Gaussian class blobs on two informative features plus low-cardinality
/// shared noise features, every value rounded to an integer.
pub fn discrete_blobs(seed: u64, n: usize, n_features: usize, n_classes: usize) -> Dataset {
    discrete_blobs_with(seed, n, n_features, n_classes, 2)
}

pub fn discrete_blobs_with(
    seed: u64,
    n: usize,
    n_features: usize,
    n_classes: usize,
    noise_levels: usize,
) -> Dataset {
    assert!(n_features >= 2);
    let mut r = rng(seed);
    let centres: Vec<[f64; 2]> = (0..n_classes)
        .map(|c| {
            let a = 2.0 * std::f64::consts::PI * c as f64 / n_classes as f64;
            [4.0 * a.cos(), 4.0 * a.sin()]
        })
        .collect();
    let rows = (0..n)
        .map(|i| {
            let c = i % n_classes;
            let mut values = vec![
                (centres[c][0] + standard_normal(&mut r)).round(),
                (centres[c][1] + standard_normal(&mut r)).round(),
            ];
            for _ in 2..n_features {
                values.push(r.random_range(0..noise_levels) as f64);
            }
            (values, ClassLabel(c as u32))
        })
        .collect();
    let features = (0..n_features)
        .map(|f| Feature::numeric(format!("x{f}")))
        .collect();
    let schema = FeatureSchema::new(features, "label", 0.1).unwrap();
    Dataset::from_numeric(schema, class_names(n_classes), rows).unwrap()
}

/// Isotropic Gaussian blobs with continuous values.
pub fn continuous_blobs(seed: u64, n: usize, n_features: usize, n_classes: usize) -> Dataset {
    let mut r = rng(seed);
    let centres: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| (0..n_features).map(|_| r.random_range(-3.0..3.0)).collect())
        .collect();
    let rows = (0..n)
        .map(|i| {
            let c = i % n_classes;
            let values = centres[c]
                .iter()
                .map(|m| m + standard_normal(&mut r))
                .collect();
            (values, ClassLabel(c as u32))
        })
        .collect();
    let features = (0..n_features)
        .map(|f| Feature::numeric(format!("x{f}")))
        .collect();
    let schema = FeatureSchema::new(features, "label", 0.1).unwrap();
    Dataset::from_numeric(schema, class_names(n_classes), rows).unwrap()
}

/// Deterministic model whose decision depends on every feature: the class is
/// a hash of the value bits. Makes roughly `1/n_classes` of candidates valid.
pub struct HashModel {
    pub classes: Vec<ClassLabel>,
    pub n_features: usize,
    pub salt: u64,
}

impl HashModel {
    pub fn for_dataset(data: &Dataset, salt: u64) -> Self {
        Self {
            classes: data.class_set().into_iter().collect(),
            n_features: data.schema().len(),
            salt,
        }
    }
}

impl Classifier for HashModel {
    fn classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_unchecked(&self, values: &[f64]) -> ClassLabel {
        let mut h = self.salt ^ 0xcbf2_9ce4_8422_2325;
        for v in values {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
            h ^= h >> 29;
        }
        self.classes[(h % self.classes.len() as u64) as usize]
    }
}

/// Brute-force reference for the whole generation pipeline.
pub struct Oracle<'a> {
    pub population: &'a Dataset,
    pub kinds: Vec<FeatureKind>,
    pub std: Vec<f64>,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleCandidate {
    pub values: Vec<f64>,
    pub nun_id: usize,
    pub distance: f64,
    pub diffs: Vec<usize>,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleGroup {
    pub x_id: usize,
    pub xprime_id: usize,
    pub candidates: Vec<OracleCandidate>,
}

impl<'a> Oracle<'a> {
    pub fn new(population: &'a Dataset) -> Self {
        let schema = population.schema();
        let kinds: Vec<FeatureKind> = schema.features().iter().map(|f| f.kind).collect();
        let n = population.len() as f64;
        let std = (0..kinds.len())
            .map(|f| {
                let col: Vec<f64> = population.instances().iter().map(|i| i.values[f]).collect();
                let mean = col.iter().sum::<f64>() / n;
                let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self {
            population,
            kinds,
            std,
            tolerance: schema.tolerance(),
        }
    }

    fn matches(&self, f: usize, a: f64, b: f64) -> bool {
        match self.kinds[f] {
            FeatureKind::Categorical => a == b,
            FeatureKind::Numeric => ((a - b) / self.std[f]).abs() <= self.tolerance,
        }
    }

    pub fn diffs(&self, a: &[f64], b: &[f64]) -> Vec<usize> {
        (0..a.len())
            .filter(|&f| !self.matches(f, a[f], b[f]))
            .collect()
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut sum = 0.0;
        for f in 0..a.len() {
            let t = match self.kinds[f] {
                FeatureKind::Categorical => (a[f] != b[f]) as u8 as f64,
                FeatureKind::Numeric => (a[f] - b[f]) / self.std[f],
            };
            sum += t * t;
        }
        sum.sqrt()
    }

    /// Every ordered unlike pair with `1..=d` differences.
    pub fn mine(&self, d: usize) -> Vec<(usize, usize, Vec<usize>)> {
        let mut out = Vec::new();
        for x in self.population.instances() {
            for xp in self.population.instances() {
                if x.label == xp.label {
                    continue;
                }
                let diffs = self.diffs(&x.values, &xp.values);
                if (1..=d).contains(&diffs.len()) {
                    out.push((x.id, xp.id, diffs));
                }
            }
        }
        out
    }

    /// Cases with `p`'s class on the problem side, nearest first.
    pub fn nearest_cases(
        &self,
        p: &Instance,
        cases: &[(usize, usize)],
        k: usize,
    ) -> Vec<(usize, usize)> {
        let mut eligible: Vec<(f64, usize, usize)> = cases
            .iter()
            .filter(|(x, _)| self.population.get(*x).unwrap().label == p.label)
            .map(|&(x, xp)| {
                (
                    self.distance(&self.population.get(x).unwrap().values, &p.values),
                    x,
                    xp,
                )
            })
            .collect();
        eligible.sort_by(|a, b| a.partial_cmp(b).unwrap());
        eligible
            .into_iter()
            .take(k)
            .map(|(_, x, xp)| (x, xp))
            .collect()
    }

    pub fn candidates<M: Classifier + ?Sized>(
        &self,
        p: &Instance,
        xprime_id: usize,
        donors: &[&Instance],
        d: usize,
        mode: ValidationMode,
        model: &M,
    ) -> Vec<OracleCandidate> {
        let target = self.population.get(xprime_id).unwrap().label;
        let mut best: BTreeMap<Vec<u64>, (f64, usize, OracleCandidate)> = BTreeMap::new();
        for n in donors {
            let diffs = self.diffs(&p.values, &n.values);
            if diffs.is_empty() || diffs.len() > d {
                continue;
            }
            let mut cf = p.values.clone();
            for &f in &diffs {
                cf[f] = n.values[f];
            }
            let predicted = model.predict_unchecked(&cf);
            let valid = match mode {
                ValidationMode::SameClass => predicted == target,
                ValidationMode::ClassChange => predicted != p.label,
            };
            if !valid {
                continue;
            }
            let key: Vec<u64> = cf.iter().map(|v| v.to_bits()).collect();
            let rank = (self.distance(&p.values, &n.values), n.id);
            let cand = OracleCandidate {
                distance: self.distance(&cf, &p.values),
                diffs: self.diffs(&cf, &p.values),
                values: cf,
                nun_id: n.id,
                valid,
            };
            let replace = match best.get(&key) {
                Some((dist, id, _)) => rank < (*dist, *id),
                None => true,
            };
            if replace {
                best.insert(key, (rank.0, rank.1, cand));
            }
        }
        let mut out: Vec<OracleCandidate> = best.into_values().map(|(_, _, c)| c).collect();
        out.sort_by(|a, b| {
            a.distance
                .partial_cmp(&b.distance)
                .unwrap()
                .then(a.nun_id.cmp(&b.nun_id))
        });
        out
    }

    /// All like-class instances of `x'` are donors.
    pub fn knn<M: Classifier + ?Sized>(
        &self,
        p: &Instance,
        cases: &[(usize, usize)],
        k: usize,
        d: usize,
        mode: ValidationMode,
        model: &M,
    ) -> Vec<OracleGroup> {
        self.nearest_cases(p, cases, k)
            .into_iter()
            .map(|(x, xp)| {
                let class = self.population.get(xp).unwrap().label;
                let donors: Vec<&Instance> = self
                    .population
                    .instances()
                    .iter()
                    .filter(|i| i.label == class)
                    .collect();
                OracleGroup {
                    x_id: x,
                    xprime_id: xp,
                    candidates: self.candidates(p, xp, &donors, d, mode, model),
                }
            })
            .collect()
    }

    /// Only the nearest case's `x'` is a donor.
    pub fn one_nn<M: Classifier + ?Sized>(
        &self,
        p: &Instance,
        cases: &[(usize, usize)],
        d: usize,
        mode: ValidationMode,
        model: &M,
    ) -> Vec<OracleCandidate> {
        match self.nearest_cases(p, cases, 1).first() {
            Some(&(_, xp)) => {
                let donor = self.population.get(xp).unwrap();
                self.candidates(p, xp, &[donor], d, mode, model)
            }
            None => Vec::new(),
        }
    }
}

/// Engine output in the oracle's shape.
pub fn as_oracle_candidates(candidates: &[Candidate]) -> Vec<OracleCandidate> {
    candidates
        .iter()
        .map(|c| OracleCandidate {
            values: c.values.clone(),
            nun_id: c.source_nun_id,
            distance: c.distance_to_p,
            diffs: c.partition_vs_p.diffs.clone(),
            valid: c.valid,
        })
        .collect()
}

pub fn as_oracle_groups(groups: &[CandidateGroup]) -> Vec<OracleGroup> {
    groups
        .iter()
        .map(|g| OracleGroup {
            x_id: g.xc.x_id,
            xprime_id: g.xc.xprime_id,
            candidates: as_oracle_candidates(&g.candidates),
        })
        .collect()
}

/// Splits a dataset into a population and a handful of held-out targets.
pub fn split_targets(data: &Dataset, n_targets: usize) -> (Dataset, Vec<Instance>) {
    let targets: Vec<Instance> = data
        .instances()
        .iter()
        .rev()
        .take(n_targets)
        .cloned()
        .collect();
    let keep = data
        .ids()
        .filter(|id| !targets.iter().any(|t| t.id == *id))
        .collect();
    (data.subset(&keep), targets)
}

/// Endogeneity and sparsity of every candidate in `groups`: each value comes
/// from `p` or from some population instance, and `1..=d` features differ.
pub fn check_endogenous_sparse(
    p: &Instance,
    groups: &[CandidateGroup],
    population: &Dataset,
    oracle: &Oracle<'_>,
    d: usize,
) -> Result<usize, String> {
    let mut n = 0;
    for g in groups {
        for c in &g.candidates {
            n += 1;
            for (f, v) in c.values.iter().enumerate() {
                let from_p = v.to_bits() == p.values[f].to_bits();
                let from_pop = population
                    .instances()
                    .iter()
                    .any(|i| i.values[f].to_bits() == v.to_bits());
                if !from_p && !from_pop {
                    return Err(format!(
                        "target {} feature {f}: value {v} has no source",
                        p.id
                    ));
                }
            }
            let diffs = oracle.diffs(&c.values, &p.values).len();
            if !(1..=d).contains(&diffs) {
                return Err(format!("target {}: {diffs} differences, bound {d}", p.id));
            }
        }
    }
    Ok(n)
}

/// Writes a numeric dataset as CSV plus its schema sidecar into `dir`.
pub fn write_dataset(
    data: &Dataset,
    dir: &std::path::Path,
    stem: &str,
) -> (std::path::PathBuf, std::path::PathBuf) {
    let schema = data.schema();
    let csv_path = dir.join(format!("{stem}.csv"));
    let schema_path = dir.join(format!("{stem}.schema.toml"));
    let mut header: Vec<String> = schema.features().iter().map(|f| f.name.clone()).collect();
    header.push(schema.class_column().to_string());
    let mut text = header.join(",") + "\n";
    for inst in data.instances() {
        let mut row: Vec<String> = (0..schema.len())
            .map(|f| data.format_value(f, inst.values[f]))
            .collect();
        row.push(data.class_name(inst.label).to_string());
        text += &(row.join(",") + "\n");
    }
    std::fs::write(&csv_path, text).unwrap();
    std::fs::write(&schema_path, schema.to_toml_string()).unwrap();
    (csv_path, schema_path)
}
