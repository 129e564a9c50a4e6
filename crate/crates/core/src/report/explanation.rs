//! The explanation payload for one target: ranked counterfactuals with
//! their provenance and the feature changes they propose.

use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::dataset::{Dataset, Instance};
use crate::engine::{rank_candidates, CandidateGroup, GenerationConfig, XcRef};

pub const EXPLANATION_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureChange {
    pub feature: String,
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedCounterfactual {
    pub rank: usize,
    pub distance: f64,
    pub valid: bool,
    pub target_class: String,
    pub predicted_class: String,
    pub source_xc: XcRef,
    pub source_nun_id: usize,
    pub changes: Vec<FeatureChange>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationDocument {
    pub format_version: u32,
    pub instance_id: usize,
    pub class: String,
    pub predicted_class: String,
    pub config: GenerationConfig,
    pub cases_used: Vec<XcRef>,
    pub counterfactuals: Vec<RankedCounterfactual>,
}

pub fn explanation_document<M: Classifier + ?Sized>(
    p: &Instance,
    groups: &[CandidateGroup],
    dataset: &Dataset,
    model: &M,
    config: &GenerationConfig,
) -> ExplanationDocument {
    let schema = dataset.schema();
    let counterfactuals = rank_candidates(groups)
        .into_iter()
        .enumerate()
        .map(|(i, c)| RankedCounterfactual {
            rank: i + 1,
            distance: c.distance_to_p,
            valid: c.valid,
            target_class: dataset.class_name(c.target_class).to_string(),
            predicted_class: dataset
                .class_name(model.predict_unchecked(&c.values))
                .to_string(),
            source_xc: c.source_xc,
            source_nun_id: c.source_nun_id,
            changes: c
                .partition_vs_p
                .diffs
                .iter()
                .map(|&f| FeatureChange {
                    feature: schema.name(f).to_string(),
                    from: dataset.format_value(f, p.values[f]),
                    to: dataset.format_value(f, c.values[f]),
                })
                .collect(),
        })
        .collect();
    ExplanationDocument {
        format_version: EXPLANATION_FORMAT_VERSION,
        instance_id: p.id,
        class: dataset.class_name(p.label).to_string(),
        predicted_class: dataset
            .class_name(model.predict_unchecked(&p.values))
            .to_string(),
        config: config.clone(),
        cases_used: groups.iter().map(|g| XcRef::from(&g.xc)).collect(),
        counterfactuals,
    }
}
