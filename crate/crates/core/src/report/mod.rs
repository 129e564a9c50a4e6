//! Human-facing artifacts: SVG charts and counterfactual explanation
//! documents.

pub mod chart;
pub mod explanation;

pub use chart::{
    chart_specs, emit_chart, render_svg, ChartMetric, ChartPoint, ChartSeries, ChartSpec,
};
pub use explanation::{explanation_document, ExplanationDocument};
