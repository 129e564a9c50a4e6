//! Sweep execution: every (d, fold) pair trains its own model and runs every
//! method, validation mode and k over the fold's test problems.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{make_folds, FoldPlan, FoldSettings, TEST_FRACTION};
use super::metrics::{covered_count, diversity, relative_distance, CellResult, ProblemRecord};
use super::stats::{welch_t_test, z_test_proportions};
use crate::classifier::{train_gbt, GbtParams, Model, OneNnModel};
use crate::dataset::Dataset;
use crate::engine::{GenerationConfig, Generator, Method, ValidationMode};
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::xc::CapPolicy;

pub const RESULTS_FORMAT_VERSION: u32 = 1;

/// Significance level for every comparison.
pub const ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Gbt,
    OneNn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub ks: Vec<usize>,
    pub ds: Vec<usize>,
    pub methods: Vec<Method>,
    pub modes: Vec<ValidationMode>,
    pub n_folds: usize,
    pub seed: u64,
    pub gbt: GbtParams,
    pub model: ModelKind,
    pub cap_factor: usize,
    pub cap_policy: CapPolicy,
    /// Run folds and problems on the rayon pool; results do not depend on it.
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ks: vec![1, 2, 3, 5, 10, 20, 50, 100],
            ds: vec![2],
            methods: vec![Method::OneNn, Method::OneNnStar, Method::Knn],
            modes: vec![ValidationMode::SameClass],
            n_folds: 10,
            seed: 0,
            gbt: GbtParams::default(),
            model: ModelKind::Gbt,
            cap_factor: 2,
            cap_policy: CapPolicy::Random,
            parallel: true,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.ks.is_empty() || self.ks[0] == 0 || self.ks.windows(2).any(|w| w[0] >= w[1]) {
            return bad("k values must be positive and strictly increasing");
        }
        if self.ds.is_empty() || self.ds.contains(&0) {
            return bad("d values must be >= 1");
        }
        if self.methods.is_empty() || self.modes.is_empty() {
            return bad("at least one method and one validation mode are required");
        }
        if self.n_folds == 0 {
            return bad("n_folds must be >= 1");
        }
        self.gbt.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub format_version: u32,
    pub dataset: String,
    pub n_instances: usize,
    pub n_features: usize,
    pub tolerance: f64,
    pub test_fraction: f64,
    pub alpha: f64,
    pub sweep: SweepConfig,
}

/// Metrics for one (method, k, d, mode) point, pooled over folds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub dataset: String,
    pub method: Method,
    pub k: usize,
    pub d: usize,
    pub validation_mode: ValidationMode,
    pub n_test: usize,
    pub n_covered: usize,
    pub coverage: f64,
    pub rel_distance: Option<f64>,
    pub rel_distance_excluded: usize,
    pub diversity: Option<f64>,
    pub diversity_pooled: Option<f64>,
    pub p_coverage_vs_prev_k: Option<f64>,
    pub p_coverage_vs_baseline: Option<f64>,
    pub p_rel_distance_vs_prev_k: Option<f64>,
    pub p_rel_distance_vs_baseline: Option<f64>,
    pub p_diversity_vs_prev_k: Option<f64>,
    pub p_diversity_vs_baseline: Option<f64>,
    /// Coverage over the 1NN* coverage.
    pub coverage_ratio_vs_baseline: Option<f64>,
    /// 1NN relative distance over this point's relative distance.
    pub rel_distance_decrease_vs_baseline: Option<f64>,
    /// Diversity over the 1NN* diversity.
    pub diversity_ratio_vs_baseline: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub metadata: RunMetadata,
    pub summaries: Vec<MetricsSummary>,
    pub cells: Vec<CellResult>,
    pub folds: Vec<FoldRecord>,
}

/// What each fold used, for the results document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub d: usize,
    pub fold_index: usize,
    pub seed: u64,
    pub test_ids: BTreeSet<usize>,
    pub n_cases: usize,
    pub n_xc_members: usize,
    pub n_classifier_train: usize,
}

fn train_model(dataset: &Dataset, plan: &FoldPlan, d: usize, sweep: &SweepConfig) -> Result<Model> {
    let train_set = dataset.subset(&plan.classifier_train_ids);
    match sweep.model {
        ModelKind::Gbt => {
            let mut rng = rng_for(plan.seed, &[d as u64, 1]);
            Ok(Model::Gbt(train_gbt(&train_set, &sweep.gbt, &mut rng)?))
        }
        ModelKind::OneNn => Ok(Model::OneNn(OneNnModel::fit(&train_set)?)),
    }
}

/// Runs every cell of one (d, fold) job.
fn run_fold(
    name: &str,
    dataset: &Dataset,
    plan: &FoldPlan,
    d: usize,
    sweep: &SweepConfig,
) -> Result<Vec<CellResult>> {
    let model = train_model(dataset, plan, d, sweep)?;
    let population = dataset.subset(&plan.population_ids());
    let generator = Generator::new(&population, &plan.stats, &model)?;
    let tests: Vec<_> = plan
        .test_ids
        .iter()
        .map(|&id| dataset.get(id).expect("test ids come from the dataset"))
        .collect();
    let k_max = *sweep.ks.last().expect("validated non-empty");
    let n_features = dataset.schema().len();

    let mut cells = Vec::new();
    for &mode in &sweep.modes {
        for &method in &sweep.methods {
            let (config, ks): (GenerationConfig, Vec<usize>) = match method {
                // The candidate groups for k are the first k groups for k_max.
                Method::Knn => (GenerationConfig::new(k_max, d), sweep.ks.clone()),
                _ => (GenerationConfig::new(1, d), vec![1]),
            };
            let config = config.with_mode(mode).with_method(method);
            let per_problem = |p: &&crate::dataset::Instance| {
                let groups = generator.generate(p, &plan.base, &config);
                ks.iter()
                    .map(|&k| {
                        let upto = k.min(groups.len());
                        ProblemRecord::from_groups(p.id, &groups[..upto], &generator)
                    })
                    .collect::<Vec<_>>()
            };
            let records: Vec<Vec<ProblemRecord>> = if sweep.parallel {
                tests.par_iter().map(per_problem).collect()
            } else {
                tests.iter().map(per_problem).collect()
            };
            for (slot, &k) in ks.iter().enumerate() {
                cells.push(CellResult {
                    dataset: name.to_string(),
                    fold_index: plan.fold_index,
                    method,
                    k,
                    d,
                    validation_mode: mode,
                    n_features,
                    problems: records.iter().map(|r| r[slot].clone()).collect(),
                });
            }
        }
    }
    Ok(cells)
}

/// Executes the full sweep over one dataset.
pub fn run_experiment(name: &str, dataset: &Dataset, sweep: &SweepConfig) -> Result<ResultsTable> {
    sweep.validate()?;
    let mut plans: Vec<(usize, FoldPlan)> = Vec::new();
    for &d in &sweep.ds {
        let settings = FoldSettings {
            n_folds: sweep.n_folds,
            seed: sweep.seed,
            d,
            cap_factor: sweep.cap_factor,
            cap_policy: sweep.cap_policy,
        };
        plans.extend(make_folds(dataset, &settings)?.into_iter().map(|p| (d, p)));
    }

    let job = |(d, plan): &(usize, FoldPlan)| run_fold(name, dataset, plan, *d, sweep);
    let per_fold: Vec<Result<Vec<CellResult>>> = if sweep.parallel {
        plans.par_iter().map(job).collect()
    } else {
        plans.iter().map(job).collect()
    };
    let mut cells = Vec::new();
    for result in per_fold {
        cells.extend(result?);
    }

    let folds = plans
        .iter()
        .map(|(d, p)| FoldRecord {
            d: *d,
            fold_index: p.fold_index,
            seed: p.seed,
            test_ids: p.test_ids.clone(),
            n_cases: p.base.len(),
            n_xc_members: p.xc_member_ids.len(),
            n_classifier_train: p.classifier_train_ids.len(),
        })
        .collect();

    Ok(ResultsTable {
        metadata: RunMetadata {
            format_version: RESULTS_FORMAT_VERSION,
            dataset: name.to_string(),
            n_instances: dataset.len(),
            n_features: dataset.schema().len(),
            tolerance: dataset.schema().tolerance(),
            test_fraction: TEST_FRACTION,
            alpha: ALPHA,
            sweep: sweep.clone(),
        },
        summaries: summarize(name, &cells, sweep),
        cells,
        folds,
    })
}

fn select(
    cells: &[CellResult],
    method: Method,
    k: usize,
    d: usize,
    mode: ValidationMode,
) -> Vec<CellResult> {
    cells
        .iter()
        .filter(|c| c.method == method && c.k == k && c.d == d && c.validation_mode == mode)
        .cloned()
        .collect()
}

struct Point {
    covered: usize,
    total: usize,
    ratios: Vec<f64>,
    diversities: Vec<f64>,
}

impl Point {
    fn of(cells: &[CellResult]) -> Self {
        let (covered, total) = covered_count(cells);
        Self {
            covered,
            total,
            ratios: relative_distance(cells).ratios,
            diversities: diversity(cells).per_problem,
        }
    }
}

fn p_coverage(a: &Point, b: &Point) -> Option<f64> {
    (a.total > 0 && b.total > 0)
        .then(|| z_test_proportions(a.covered, a.total, b.covered, b.total).p_value)
}

fn p_welch(a: &[f64], b: &[f64]) -> Option<f64> {
    welch_t_test(a, b).map(|t| t.p_value)
}

fn ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    match (num, den) {
        (Some(n), Some(d)) if d != 0.0 => Some(n / d),
        _ => None,
    }
}

/// Summary rows ordered by d, mode, then baselines before the k sweep.
fn summarize(name: &str, cells: &[CellResult], sweep: &SweepConfig) -> Vec<MetricsSummary> {
    let mut out = Vec::new();
    for &d in &sweep.ds {
        for &mode in &sweep.modes {
            let one_nn = sweep
                .methods
                .contains(&Method::OneNn)
                .then(|| select(cells, Method::OneNn, 1, d, mode));
            let star = sweep
                .methods
                .contains(&Method::OneNnStar)
                .then(|| select(cells, Method::OneNnStar, 1, d, mode));
            let one_nn_point = one_nn.as_deref().map(Point::of);
            let star_point = star.as_deref().map(Point::of);
            let one_nn_rd = one_nn.as_deref().and_then(|c| relative_distance(c).mean);
            let star_cov = star.as_deref().map(super::metrics::coverage);
            let star_div = star.as_deref().and_then(|c| diversity(c).mean);

            let mut rows: Vec<(Method, usize)> = Vec::new();
            for &m in &[Method::OneNn, Method::OneNnStar] {
                if sweep.methods.contains(&m) {
                    rows.push((m, 1));
                }
            }
            if sweep.methods.contains(&Method::Knn) {
                rows.extend(sweep.ks.iter().map(|&k| (Method::Knn, k)));
            }

            let mut prev: Option<Point> = None;
            for (method, k) in rows {
                let sel = select(cells, method, k, d, mode);
                let point = Point::of(&sel);
                let rd = relative_distance(&sel);
                let dv = diversity(&sel);
                let cov = super::metrics::coverage(&sel);
                let is_knn = method == Method::Knn;
                let (prev_cov, prev_rd, prev_div) = match (&prev, is_knn) {
                    (Some(pp), true) => (
                        p_coverage(&point, pp),
                        p_welch(&point.ratios, &pp.ratios),
                        p_welch(&point.diversities, &pp.diversities),
                    ),
                    _ => (None, None, None),
                };
                let (base_cov, base_rd, base_div) = if is_knn {
                    (
                        star_point.as_ref().and_then(|s| p_coverage(&point, s)),
                        one_nn_point
                            .as_ref()
                            .and_then(|b| p_welch(&point.ratios, &b.ratios)),
                        star_point
                            .as_ref()
                            .and_then(|s| p_welch(&point.diversities, &s.diversities)),
                    )
                } else {
                    (None, None, None)
                };
                out.push(MetricsSummary {
                    dataset: name.to_string(),
                    method,
                    k,
                    d,
                    validation_mode: mode,
                    n_test: point.total,
                    n_covered: point.covered,
                    coverage: cov,
                    rel_distance: rd.mean,
                    rel_distance_excluded: rd.excluded_zero_denominator,
                    diversity: dv.mean,
                    diversity_pooled: dv.pooled,
                    p_coverage_vs_prev_k: prev_cov,
                    p_coverage_vs_baseline: base_cov,
                    p_rel_distance_vs_prev_k: prev_rd,
                    p_rel_distance_vs_baseline: base_rd,
                    p_diversity_vs_prev_k: prev_div,
                    p_diversity_vs_baseline: base_div,
                    coverage_ratio_vs_baseline: if is_knn {
                        ratio(Some(cov), star_cov)
                    } else {
                        None
                    },
                    rel_distance_decrease_vs_baseline: if is_knn {
                        ratio(one_nn_rd, rd.mean)
                    } else {
                        None
                    },
                    diversity_ratio_vs_baseline: if is_knn {
                        ratio(dv.mean, star_div)
                    } else {
                        None
                    },
                });
                if is_knn {
                    prev = Some(point);
                }
            }
        }
    }
    out
}
