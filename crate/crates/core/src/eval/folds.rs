//! Fold construction: each fold draws 10% of the instances as test problems,
//! mines and caps explanation cases from the rest, and hands every instance
//! outside the selected cases to the classifier.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scaling::{compute_scaling, ScalingStats};
use crate::seed::rng_for;
use crate::xc::{build_xc_base, mine_xcs, CapPolicy, XcBase};

pub const TEST_FRACTION: f64 = 0.1;

/// Smallest test set a fold may have; the t-test needs two values per side.
pub const MIN_TEST_SIZE: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSettings {
    pub n_folds: usize,
    pub seed: u64,
    pub d: usize,
    /// Case base holds at most `cap_factor * |test|` cases.
    pub cap_factor: usize,
    pub cap_policy: CapPolicy,
}

impl FoldSettings {
    pub fn new(n_folds: usize, seed: u64, d: usize) -> Self {
        Self {
            n_folds,
            seed,
            d,
            cap_factor: 2,
            cap_policy: CapPolicy::Random,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub fold_index: usize,
    pub seed: u64,
    pub test_ids: BTreeSet<usize>,
    pub xc_member_ids: BTreeSet<usize>,
    pub classifier_train_ids: BTreeSet<usize>,
    pub base: XcBase,
    /// Scaling fitted on the non-test instances.
    pub stats: ScalingStats,
}

impl FoldPlan {
    /// Every non-test instance: the pool counterfactual donors come from.
    pub fn population_ids(&self) -> BTreeSet<usize> {
        self.xc_member_ids
            .union(&self.classifier_train_ids)
            .copied()
            .collect()
    }
}

pub fn test_size(n: usize) -> usize {
    (n as f64 * TEST_FRACTION).round() as usize
}

/// Builds `n_folds` independent folds. Fold `i` samples its test set with
/// seed `seed + i`; its case-base sample uses a stream derived from that
/// seed and `d`.
pub fn make_folds(dataset: &Dataset, settings: &FoldSettings) -> Result<Vec<FoldPlan>> {
    if settings.n_folds == 0 {
        return Err(Error::InvalidConfig("n_folds must be >= 1".into()));
    }
    if settings.d == 0 {
        return Err(Error::InvalidConfig("d must be >= 1".into()));
    }
    let n = dataset.len();
    let n_test = test_size(n);
    if n_test < MIN_TEST_SIZE {
        return Err(Error::DatasetTooSmall(format!(
            "{n} instances give a test set of {n_test} (need at least {MIN_TEST_SIZE})"
        )));
    }
    let ids: Vec<usize> = dataset.ids().collect();

    (0..settings.n_folds)
        .map(|fold_index| {
            let seed = settings.seed.wrapping_add(fold_index as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let test_ids: BTreeSet<usize> = rand::seq::index::sample(&mut rng, n, n_test)
                .into_iter()
                .map(|i| ids[i])
                .collect();
            let rest: BTreeSet<usize> = ids
                .iter()
                .copied()
                .filter(|id| !test_ids.contains(id))
                .collect();
            let population = dataset.subset(&rest);
            let stats = compute_scaling(&population);
            let mined = mine_xcs(&population, settings.d, &stats);
            let mut cap_rng = rng_for(seed, &[settings.d as u64]);
            let base = build_xc_base(
                mined,
                settings.cap_factor * n_test,
                settings.cap_policy,
                &mut cap_rng,
            );
            if base.is_empty() {
                return Err(Error::DatasetTooSmall(format!(
                    "fold {fold_index} has no explanation cases with at most {} differences",
                    settings.d
                )));
            }
            let classifier_train_ids: BTreeSet<usize> =
                rest.difference(&base.member_ids).copied().collect();
            if classifier_train_ids.is_empty() {
                return Err(Error::DatasetTooSmall(format!(
                    "fold {fold_index} leaves no instances to train the classifier"
                )));
            }
            Ok(FoldPlan {
                fold_index,
                seed,
                test_ids,
                xc_member_ids: base.member_ids.clone(),
                classifier_train_ids,
                base,
                stats,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ClassLabel, Feature, FeatureSchema};

    /// Integer grid data: plenty of one- and two-difference unlike pairs.
    fn grid(n: usize) -> Dataset {
        let schema = FeatureSchema::new(
            vec![
                Feature::numeric("a"),
                Feature::numeric("b"),
                Feature::numeric("c"),
            ],
            "y",
            0.1,
        )
        .unwrap();
        let rows = (0..n)
            .map(|i| {
                let v = vec![(i % 3) as f64, (i / 3 % 3) as f64, (i / 9 % 3) as f64];
                (v, ClassLabel((i % 2) as u32))
            })
            .collect();
        Dataset::from_numeric(schema, vec!["a".into(), "b".into()], rows).unwrap()
    }

    #[test]
    fn hundred_instances_ten_folds() {
        let data = grid(100);
        let plans = make_folds(&data, &FoldSettings::new(10, 3, 2)).unwrap();
        assert_eq!(plans.len(), 10);
        for plan in &plans {
            assert_eq!(plan.test_ids.len(), 10);
            assert!(plan.base.len() <= 20);
            assert!(plan.test_ids.is_disjoint(&plan.xc_member_ids));
            assert!(plan.test_ids.is_disjoint(&plan.classifier_train_ids));
            assert!(plan.xc_member_ids.is_disjoint(&plan.classifier_train_ids));
            let all = plan.population_ids().len() + plan.test_ids.len();
            assert_eq!(all, 100);
        }
        assert_ne!(plans[0].test_ids, plans[1].test_ids);
    }

    #[test]
    fn plans_are_seed_deterministic() {
        let data = grid(60);
        let settings = FoldSettings::new(4, 11, 2);
        assert_eq!(
            make_folds(&data, &settings).unwrap(),
            make_folds(&data, &settings).unwrap()
        );
    }

    #[test]
    fn twelve_instances_is_too_small() {
        let err = make_folds(&grid(12), &FoldSettings::new(10, 0, 2)).unwrap_err();
        assert!(matches!(err, Error::DatasetTooSmall(_)));
        assert!(err.to_string().contains("dataset too small"));
    }
}
