//! Tabular datasets: the feature schema and its sidecar document, instances,
//! and CSV ingestion.
//!
//! Feature values are stored as `f64`. Categorical values are interned to
//! small integer codes (stored exactly as `f64`), so value vectors can be
//! compared, copied and fed to the classifier without a second representation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version of the schema sidecar document understood by this crate.
pub const SCHEMA_FORMAT_VERSION: u32 = 1;

/// Default numeric match tolerance, in standardized units.
pub const DEFAULT_TOLERANCE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

impl Feature {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical,
        }
    }
}

/// Ordered feature list, class column and the numeric match tolerance.
///
/// Two numeric values match when they differ by at most `tolerance` after
/// scaling to unit variance; categorical values match only when equal.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSchema {
    features: Vec<Feature>,
    class_column: String,
    tolerance: f64,
}

#[derive(Serialize, Deserialize)]
struct SchemaDocument {
    format_version: u32,
    class_column: String,
    #[serde(default = "default_tolerance")]
    numeric_match_tolerance: f64,
    features: Vec<Feature>,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

impl FeatureSchema {
    pub fn new(
        features: Vec<Feature>,
        class_column: impl Into<String>,
        tolerance: f64,
    ) -> Result<Self> {
        let class_column = class_column.into();
        if features.is_empty() {
            return Err(Error::InvalidSchema("no features declared".into()));
        }
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate feature name '{}'",
                    f.name
                )));
            }
        }
        if seen.contains(class_column.as_str()) {
            return Err(Error::InvalidSchema(format!(
                "class column '{class_column}' is also declared as a feature"
            )));
        }
        if !(tolerance >= 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidSchema(format!(
                "numeric_match_tolerance must be a finite value >= 0, got {tolerance}"
            )));
        }
        Ok(Self {
            features,
            class_column,
            tolerance,
        })
    }

    /// Parses the TOML sidecar document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: SchemaDocument = toml::from_str(text)?;
        if doc.format_version != SCHEMA_FORMAT_VERSION {
            return Err(Error::UnsupportedFormatVersion {
                kind: "schema",
                found: doc.format_version,
                expected: SCHEMA_FORMAT_VERSION,
            });
        }
        Self::new(doc.features, doc.class_column, doc.numeric_match_tolerance)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let doc = SchemaDocument {
            format_version: SCHEMA_FORMAT_VERSION,
            class_column: self.class_column.clone(),
            numeric_match_tolerance: self.tolerance,
            features: self.features.clone(),
        };
        toml::to_string(&doc).expect("schema document always serializes")
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn kind(&self, feature: usize) -> FeatureKind {
        self.features[feature].kind
    }

    pub fn name(&self, feature: usize) -> &str {
        &self.features[feature].name
    }

    pub fn class_column(&self) -> &str {
        &self.class_column
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Same schema with a different match tolerance.
    pub fn with_tolerance(&self, tolerance: f64) -> Result<Self> {
        Self::new(self.features.clone(), self.class_column.clone(), tolerance)
    }
}

/// Index into the dataset's class name table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(pub u32);

impl ClassLabel {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: usize,
    pub values: Vec<f64>,
    pub label: ClassLabel,
}

/// Interned names shared by a dataset and every subset cut from it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Class names, indexed by `ClassLabel`.
    pub class_names: Vec<String>,
    /// Per feature, the category names indexed by code. Empty for numeric
    /// features.
    pub categories: Vec<Vec<String>>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    schema: FeatureSchema,
    instances: Vec<Instance>,
    vocab: Arc<Vocabulary>,
}

impl Dataset {
    /// Builds a dataset, validating arity, id uniqueness and labels.
    /// Instances are kept sorted by id.
    pub fn new(
        schema: FeatureSchema,
        mut instances: Vec<Instance>,
        vocab: Arc<Vocabulary>,
    ) -> Result<Self> {
        let width = schema.len();
        for inst in &instances {
            if inst.values.len() != width {
                return Err(Error::ArityMismatch {
                    expected: width,
                    actual: inst.values.len(),
                });
            }
            if inst.label.index() >= vocab.class_names.len() {
                return Err(Error::SchemaMismatch(format!(
                    "instance {} has unknown class label {}",
                    inst.id, inst.label.0
                )));
            }
        }
        instances.sort_by_key(|i| i.id);
        if instances.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::SchemaMismatch("duplicate instance ids".into()));
        }
        Ok(Self {
            schema,
            instances,
            vocab,
        })
    }

    /// Convenience constructor for purely numeric data with the given class
    /// names.
    pub fn from_numeric(
        schema: FeatureSchema,
        class_names: Vec<String>,
        rows: Vec<(Vec<f64>, ClassLabel)>,
    ) -> Result<Self> {
        let vocab = Vocabulary {
            class_names,
            categories: vec![Vec::new(); schema.len()],
        };
        let instances = rows
            .into_iter()
            .enumerate()
            .map(|(id, (values, label))| Instance { id, values, label })
            .collect();
        Self::new(schema, instances, Arc::new(vocab))
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Instance> {
        self.instances
            .binary_search_by_key(&id, |i| i.id)
            .ok()
            .map(|pos| &self.instances[pos])
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.instances.iter().map(|i| i.id)
    }

    /// Labels that occur in this dataset.
    pub fn class_set(&self) -> BTreeSet<ClassLabel> {
        self.instances.iter().map(|i| i.label).collect()
    }

    pub fn class_name(&self, label: ClassLabel) -> &str {
        &self.vocab.class_names[label.index()]
    }

    /// Renders a stored value: numbers as-is, categories by name.
    pub fn format_value(&self, feature: usize, value: f64) -> String {
        match self.schema.kind(feature) {
            FeatureKind::Numeric => format!("{value}"),
            FeatureKind::Categorical => self.vocab.categories[feature]
                .get(value as usize)
                .cloned()
                .unwrap_or_else(|| format!("#{value}")),
        }
    }

    /// Subset restricted to `keep` (ids absent from the dataset are ignored).
    pub fn subset(&self, keep: &BTreeSet<usize>) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            instances: self
                .instances
                .iter()
                .filter(|i| keep.contains(&i.id))
                .cloned()
                .collect(),
            vocab: Arc::clone(&self.vocab),
        }
    }

    /// Same instances under a schema with a different match tolerance.
    pub fn with_tolerance(&self, tolerance: f64) -> Result<Dataset> {
        Ok(Dataset {
            schema: self.schema.with_tolerance(tolerance)?,
            instances: self.instances.clone(),
            vocab: Arc::clone(&self.vocab),
        })
    }
}

/// Result of CSV ingestion.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    /// Rows discarded because at least one cell was empty.
    pub dropped_rows: usize,
}

/// Reads a CSV stream (header row, comma separated, `.` decimals) against a
/// schema. Rows with an empty cell are dropped and counted; ids are the
/// zero-based data row index, so dropped rows leave gaps. Class and category
/// names are interned in sorted order.
pub fn load_dataset<R: Read>(data: R, schema: &FeatureSchema) -> Result<LoadedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(data);
    let header = reader.headers()?.clone();

    let mut column_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (pos, name) in header.iter().enumerate() {
        if column_of.insert(name, pos).is_some() {
            return Err(Error::SchemaMismatch(format!("duplicate column '{name}'")));
        }
    }
    let expected: BTreeSet<&str> = schema
        .features()
        .iter()
        .map(|f| f.name.as_str())
        .chain(std::iter::once(schema.class_column()))
        .collect();
    let present: BTreeSet<&str> = column_of.keys().copied().collect();
    if expected != present {
        let missing: Vec<_> = expected.difference(&present).collect();
        let extra: Vec<_> = present.difference(&expected).collect();
        return Err(Error::SchemaMismatch(format!(
            "header does not match schema (missing: {missing:?}, unexpected: {extra:?})"
        )));
    }
    let feature_cols: Vec<usize> = schema
        .features()
        .iter()
        .map(|f| column_of[f.name.as_str()])
        .collect();
    let class_col = column_of[schema.class_column()];

    // First pass: keep complete rows as raw strings.
    let mut rows: Vec<(usize, Vec<String>, String)> = Vec::new();
    let mut dropped = 0;
    for (row_index, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |col: usize| record.get(col).unwrap_or("");
        let complete =
            feature_cols.iter().all(|&c| !cell(c).is_empty()) && !cell(class_col).is_empty();
        if !complete {
            dropped += 1;
            continue;
        }
        let values = feature_cols.iter().map(|&c| cell(c).to_string()).collect();
        rows.push((row_index, values, cell(class_col).to_string()));
    }
    if dropped > 0 {
        log::info!("dropped {dropped} rows with missing values");
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset { dropped });
    }

    let class_names: Vec<String> = rows
        .iter()
        .map(|(_, _, c)| c.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let categories: Vec<Vec<String>> = (0..schema.len())
        .map(|f| match schema.kind(f) {
            FeatureKind::Numeric => Vec::new(),
            FeatureKind::Categorical => rows
                .iter()
                .map(|(_, v, _)| v[f].clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        })
        .collect();

    let mut instances = Vec::with_capacity(rows.len());
    for (row_index, raw, class) in rows {
        let mut values = Vec::with_capacity(raw.len());
        for (f, text) in raw.iter().enumerate() {
            let v = match schema.kind(f) {
                FeatureKind::Numeric => text
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::UnparseableNumber {
                        row: row_index,
                        column: schema.name(f).to_string(),
                        value: text.clone(),
                    })?,
                FeatureKind::Categorical => {
                    categories[f].binary_search(text).expect("interned above") as f64
                }
            };
            values.push(v);
        }
        let label = ClassLabel(class_names.binary_search(&class).expect("interned above") as u32);
        instances.push(Instance {
            id: row_index,
            values,
            label,
        });
    }

    let vocab = Vocabulary {
        class_names,
        categories,
    };
    let dataset = Dataset::new(schema.clone(), instances, Arc::new(vocab))?;
    Ok(LoadedDataset {
        dataset,
        dropped_rows: dropped,
    })
}

/// Loads a dataset and its schema sidecar from disk.
pub fn load_dataset_files(data_path: &Path, schema_path: &Path) -> Result<LoadedDataset> {
    let schema = FeatureSchema::from_path(schema_path)?;
    let file = std::fs::File::open(data_path).map_err(|e| Error::io(data_path, e))?;
    load_dataset(std::io::BufReader::new(file), &schema)
}
