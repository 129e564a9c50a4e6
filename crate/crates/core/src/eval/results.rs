//! Results persistence: the summary CSV (one row per method/k/d/mode point)
//! and the full JSON document with per-problem records and run metadata.
//!
//! CSV columns, in order:
//!
//! ```text
//! dataset,method,k,d,mode,coverage,rel_distance,diversity,n,p_vs_prev_k,p_vs_baseline,
//! p_rel_distance_vs_prev_k,p_rel_distance_vs_baseline,p_diversity_vs_prev_k,
//! p_diversity_vs_baseline,n_covered,rel_distance_excluded,diversity_pooled,
//! coverage_ratio_vs_baseline,rel_distance_decrease_vs_baseline,diversity_ratio_vs_baseline
//! ```
//!
//! `p_vs_prev_k` and `p_vs_baseline` are the coverage z-test p-values.
//! Absent values are empty cells. Reals use the shortest representation that
//! parses back to the same `f64`, in exponent form when very small or large.

use std::io::{Read, Write};

use super::experiment::{MetricsSummary, ResultsTable};
use crate::engine::{Method, ValidationMode};
use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 21] = [
    "dataset",
    "method",
    "k",
    "d",
    "mode",
    "coverage",
    "rel_distance",
    "diversity",
    "n",
    "p_vs_prev_k",
    "p_vs_baseline",
    "p_rel_distance_vs_prev_k",
    "p_rel_distance_vs_baseline",
    "p_diversity_vs_prev_k",
    "p_diversity_vs_baseline",
    "n_covered",
    "rel_distance_excluded",
    "diversity_pooled",
    "coverage_ratio_vs_baseline",
    "rel_distance_decrease_vs_baseline",
    "diversity_ratio_vs_baseline",
];

/// Shortest text that parses back to `v`: positional for magnitudes in
/// `[1e-5, 1e16)` and zero, scientific otherwise.
pub fn format_real(v: f64) -> String {
    let m = v.abs();
    if m == 0.0 || (1e-5..1e16).contains(&m) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

fn record(s: &MetricsSummary) -> Vec<String> {
    vec![
        s.dataset.clone(),
        s.method.as_str().to_string(),
        s.k.to_string(),
        s.d.to_string(),
        s.validation_mode.as_str().to_string(),
        format_real(s.coverage),
        opt(s.rel_distance),
        opt(s.diversity),
        s.n_test.to_string(),
        opt(s.p_coverage_vs_prev_k),
        opt(s.p_coverage_vs_baseline),
        opt(s.p_rel_distance_vs_prev_k),
        opt(s.p_rel_distance_vs_baseline),
        opt(s.p_diversity_vs_prev_k),
        opt(s.p_diversity_vs_baseline),
        s.n_covered.to_string(),
        s.rel_distance_excluded.to_string(),
        opt(s.diversity_pooled),
        opt(s.coverage_ratio_vs_baseline),
        opt(s.rel_distance_decrease_vs_baseline),
        opt(s.diversity_ratio_vs_baseline),
    ]
}

pub fn write_summary_csv<W: Write>(summaries: &[MetricsSummary], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_COLUMNS)?;
    for s in summaries {
        writer.write_record(record(s))?;
    }
    writer.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn summary_csv_string(summaries: &[MetricsSummary]) -> String {
    let mut buf = Vec::new();
    write_summary_csv(summaries, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

fn parse_err(row: usize, column: &str, value: &str) -> Error {
    Error::InvalidConfig(format!(
        "results row {row}: bad value '{value}' in column '{column}'"
    ))
}

/// Reads a summary CSV written by [`write_summary_csv`].
pub fn read_summary_csv<R: Read>(input: R) -> Result<Vec<MetricsSummary>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(Error::SchemaMismatch(
            "results CSV header does not match the expected columns".into(),
        ));
    }
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let real = |i: usize| -> Result<f64> {
            cell(i)
                .parse()
                .map_err(|_| parse_err(row, CSV_COLUMNS[i], cell(i)))
        };
        let maybe = |i: usize| -> Result<Option<f64>> {
            if cell(i).is_empty() {
                Ok(None)
            } else {
                real(i).map(Some)
            }
        };
        let count = |i: usize| -> Result<usize> {
            cell(i)
                .parse()
                .map_err(|_| parse_err(row, CSV_COLUMNS[i], cell(i)))
        };
        out.push(MetricsSummary {
            dataset: cell(0).to_string(),
            method: Method::parse(cell(1)).ok_or_else(|| parse_err(row, "method", cell(1)))?,
            k: count(2)?,
            d: count(3)?,
            validation_mode: ValidationMode::parse(cell(4))
                .ok_or_else(|| parse_err(row, "mode", cell(4)))?,
            coverage: real(5)?,
            rel_distance: maybe(6)?,
            diversity: maybe(7)?,
            n_test: count(8)?,
            p_coverage_vs_prev_k: maybe(9)?,
            p_coverage_vs_baseline: maybe(10)?,
            p_rel_distance_vs_prev_k: maybe(11)?,
            p_rel_distance_vs_baseline: maybe(12)?,
            p_diversity_vs_prev_k: maybe(13)?,
            p_diversity_vs_baseline: maybe(14)?,
            n_covered: count(15)?,
            rel_distance_excluded: count(16)?,
            diversity_pooled: maybe(17)?,
            coverage_ratio_vs_baseline: maybe(18)?,
            rel_distance_decrease_vs_baseline: maybe(19)?,
            diversity_ratio_vs_baseline: maybe(20)?,
        });
    }
    Ok(out)
}

impl ResultsTable {
    pub fn to_csv(&self) -> String {
        summary_csv_string(&self.summaries)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results always serialize")
    }
}
