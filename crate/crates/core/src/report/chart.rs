//! Line charts of one metric against k, one series per dataset.
//!
//! A segment is solid when the later point differs significantly from the
//! earlier one and dashed otherwise. A marker is filled when the point
//! differs significantly from its baseline (1NN* for coverage and
//! diversity, 1NN for relative distance). The x axis is linear up to k = 10
//! and logarithmic above it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::engine::{Method, ValidationMode};
use crate::error::{Error, Result};
use crate::eval::experiment::{MetricsSummary, ALPHA};
use crate::eval::results::format_real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ChartMetric {
    Coverage,
    RelativeDistance,
    Diversity,
}

impl ChartMetric {
    pub const ALL: [ChartMetric; 3] = [
        ChartMetric::Coverage,
        ChartMetric::RelativeDistance,
        ChartMetric::Diversity,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            ChartMetric::Coverage => "coverage",
            ChartMetric::RelativeDistance => "relative_distance",
            ChartMetric::Diversity => "diversity",
        }
    }

    fn label(self) -> &'static str {
        match self {
            ChartMetric::Coverage => "Coverage",
            ChartMetric::RelativeDistance => "Mean relative distance",
            ChartMetric::Diversity => "Feature diversity",
        }
    }

    fn baseline(self) -> &'static str {
        match self {
            ChartMetric::RelativeDistance => "1NN",
            _ => "1NN*",
        }
    }

    /// (value, p vs previous k, p vs baseline) of a summary row.
    fn read(self, s: &MetricsSummary) -> (Option<f64>, Option<f64>, Option<f64>) {
        match self {
            ChartMetric::Coverage => (
                Some(s.coverage),
                s.p_coverage_vs_prev_k,
                s.p_coverage_vs_baseline,
            ),
            ChartMetric::RelativeDistance => (
                s.rel_distance,
                s.p_rel_distance_vs_prev_k,
                s.p_rel_distance_vs_baseline,
            ),
            ChartMetric::Diversity => (
                s.diversity,
                s.p_diversity_vs_prev_k,
                s.p_diversity_vs_baseline,
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    pub k: usize,
    pub value: f64,
    /// Segment from the previous point is drawn solid.
    pub significant_vs_prev: bool,
    /// Marker is drawn filled.
    pub significant_vs_baseline: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChartSeries {
    pub dataset: String,
    pub points: Vec<ChartPoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChartSpec {
    pub metric: ChartMetric,
    pub d: usize,
    pub mode: ValidationMode,
    pub series: Vec<ChartSeries>,
}

impl ChartSpec {
    pub fn file_name(&self) -> String {
        format!(
            "{}_d{}_{}.svg",
            self.metric.slug(),
            self.d,
            self.mode.as_str()
        )
    }
}

fn significant(p: Option<f64>) -> bool {
    p.is_some_and(|p| p < ALPHA)
}

/// Builds one chart per (metric, d, mode) from the k-sweep rows of one or
/// more datasets. Points whose metric is absent are skipped.
pub fn chart_specs(summaries: &[MetricsSummary]) -> Vec<ChartSpec> {
    let mut grouped: BTreeMap<(usize, ValidationMode), BTreeMap<String, Vec<&MetricsSummary>>> =
        BTreeMap::new();
    for s in summaries.iter().filter(|s| s.method == Method::Knn) {
        grouped
            .entry((s.d, s.validation_mode))
            .or_default()
            .entry(s.dataset.clone())
            .or_default()
            .push(s);
    }
    let mut specs = Vec::new();
    for ((d, mode), by_dataset) in &grouped {
        for metric in ChartMetric::ALL {
            let series: Vec<ChartSeries> = by_dataset
                .iter()
                .map(|(dataset, rows)| {
                    let mut rows = rows.clone();
                    rows.sort_by_key(|s| s.k);
                    ChartSeries {
                        dataset: dataset.clone(),
                        points: rows
                            .iter()
                            .filter_map(|s| {
                                let (value, prev, base) = metric.read(s);
                                value.map(|value| ChartPoint {
                                    k: s.k,
                                    value,
                                    significant_vs_prev: significant(prev),
                                    significant_vs_baseline: significant(base),
                                })
                            })
                            .collect(),
                    }
                })
                .filter(|s| !s.points.is_empty())
                .collect();
            if !series.is_empty() {
                specs.push(ChartSpec {
                    metric,
                    d: *d,
                    mode: *mode,
                    series,
                });
            }
        }
    }
    specs
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 76.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Position of `k` in [0, 1]: linear over 1..=10 on the left half, log10
/// from 10 to `k_max` on the right half.
fn k_position(k: usize, k_max: usize) -> f64 {
    let k = k as f64;
    if k_max <= 10 {
        return if k_max <= 1 {
            0.5
        } else {
            (k - 1.0) / (k_max as f64 - 1.0)
        };
    }
    if k <= 10.0 {
        0.5 * (k - 1.0) / 9.0
    } else {
        0.5 + 0.5 * (k / 10.0).log10() / (k_max as f64 / 10.0).log10()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

/// Renders a chart as a standalone SVG document.
pub fn render_svg(spec: &ChartSpec) -> Result<String> {
    if spec.series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::InvalidConfig("cannot chart an empty spec".into()));
    }
    let points = || spec.series.iter().flat_map(|s| s.points.iter());
    let k_max = points().map(|p| p.k).max().unwrap_or(1);
    let y_max = match spec.metric {
        ChartMetric::Coverage | ChartMetric::Diversity => 1.0,
        ChartMetric::RelativeDistance => {
            let m = points().map(|p| p.value).fold(0.0, f64::max);
            if m > 0.0 {
                m * 1.1
            } else {
                1.0
            }
        }
    };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |k: usize| LEFT + k_position(k, k_max) * plot_w;
    let y = |v: f64| TOP + plot_h * (1.0 - (v / y_max).clamp(0.0, 1.0));

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="22" font-size="14" text-anchor="middle">{} (d = {}, {})</text>"#,
        LEFT + plot_w / 2.0,
        spec.metric.label(),
        spec.d,
        spec.mode.as_str()
    );

    // Axes and ticks.
    let _ = writeln!(
        svg,
        r#"<g stroke="black" fill="none"><line x1="{LEFT:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{:.2}"/></g>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h,
        TOP + plot_h
    );
    let mut ks: Vec<usize> = points().map(|p| p.k).collect();
    ks.sort_unstable();
    ks.dedup();
    for k in &ks {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{k}</text>"#,
            x(*k),
            TOP + plot_h + 16.0
        );
    }
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text><line x1="{LEFT:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            LEFT - 6.0,
            y(v) + 4.0,
            y(v),
            LEFT + plot_w,
            y(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">k</text>"#,
        LEFT + plot_w / 2.0,
        TOP + plot_h + 34.0
    );

    for (i, series) in spec.series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let name = escape(&series.dataset);
        let _ = writeln!(svg, r#"<g class="series" data-dataset="{name}">"#);
        for w in series.points.windows(2) {
            let dash = if w[1].significant_vs_prev {
                ""
            } else {
                r#" stroke-dasharray="5,4""#
            };
            let _ = writeln!(
                svg,
                r#"<line class="segment" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{colour}" stroke-width="1.5"{dash}/>"#,
                x(w[0].k),
                y(w[0].value),
                x(w[1].k),
                y(w[1].value)
            );
        }
        for p in &series.points {
            let fill = if p.significant_vs_baseline {
                colour
            } else {
                "white"
            };
            let value = format_real(p.value);
            let _ = writeln!(
                svg,
                r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="3.5" stroke="{colour}" fill="{fill}" data-k="{}" data-value="{value}"><title>{name}, k = {}: {value}</title></circle>"#,
                x(p.k),
                y(p.value),
                p.k,
                p.k
            );
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 16.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="1.5"/><text x="{:.2}" y="{:.2}">{name}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
        let _ = writeln!(svg, "</g>");
    }

    let _ = writeln!(
        svg,
        r##"<text x="8" y="{:.2}" font-size="9" fill="#555555">Solid: significant change from the previous k (p &lt; {ALPHA}); dashed otherwise. Filled marker: significant vs {} (p &lt; {ALPHA}).</text>"##,
        HEIGHT - 22.0,
        spec.metric.baseline()
    );
    let _ = writeln!(
        svg,
        r##"<text x="8" y="{:.2}" font-size="9" fill="#555555">x axis approximate: linear for k &lt;= 10, logarithmic above.</text>"##,
        HEIGHT - 9.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders `spec` and writes it to `out`.
pub fn emit_chart(spec: &ChartSpec, out: &Path) -> Result<String> {
    let svg = render_svg(spec)?;
    std::fs::write(out, &svg).map_err(|e| Error::io(out, e))?;
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(k: usize, value: f64, prev: bool, base: bool) -> ChartPoint {
        ChartPoint {
            k,
            value,
            significant_vs_prev: prev,
            significant_vs_baseline: base,
        }
    }

    fn spec(points: Vec<ChartPoint>) -> ChartSpec {
        ChartSpec {
            metric: ChartMetric::Coverage,
            d: 2,
            mode: ValidationMode::SameClass,
            series: vec![ChartSeries {
                dataset: "blobs <3>".into(),
                points,
            }],
        }
    }

    #[test]
    fn all_significant_is_solid_and_filled() {
        let svg = render_svg(&spec(vec![
            point(1, 0.2, false, true),
            point(2, 0.5, true, true),
            point(5, 0.7, true, true),
        ]))
        .unwrap();
        assert_eq!(svg.matches(r#"class="segment""#).count(), 2);
        assert!(!svg.contains("stroke-dasharray"));
        assert_eq!(svg.matches(r##"fill="#1f77b4""##).count(), 3);
        assert!(svg.contains("blobs &lt;3&gt;"));
    }

    #[test]
    fn equal_points_get_a_dashed_segment() {
        let svg = render_svg(&spec(vec![
            point(1, 0.5, false, false),
            point(2, 0.5, false, false),
        ]))
        .unwrap();
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
        assert_eq!(svg.matches(r#"fill="white" data-k"#).count(), 2);
    }

    #[test]
    fn rendering_is_deterministic_and_rejects_empty() {
        let s = spec(vec![
            point(1, 0.25, false, false),
            point(100, 0.75, true, true),
        ]);
        assert_eq!(render_svg(&s).unwrap(), render_svg(&s).unwrap());
        assert!(render_svg(&spec(vec![])).is_err());
    }

    #[test]
    fn axis_is_linear_then_logarithmic() {
        assert_eq!(k_position(1, 100), 0.0);
        assert_eq!(k_position(10, 100), 0.5);
        assert_eq!(k_position(100, 100), 1.0);
        assert!((k_position(5, 100) - 0.5 * 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(k_position(5, 5), 1.0);
    }
}
