mod support;

use xcf::classifier::GbtParams;
use xcf::eval::{run_experiment, SweepConfig};
use xcf::report::{chart_specs, render_svg};

#[test]
fn charts_are_well_formed_views_of_the_csv() {
    let mut tables = Vec::new();
    for (seed, name) in [(1u64, "alpha"), (2, "beta & <gamma>")] {
        let data = support::discrete_blobs(seed, 150, 5, 3);
        let sweep = SweepConfig {
            ks: vec![1, 2, 5, 20],
            n_folds: 2,
            seed,
            gbt: GbtParams {
                n_stages: 20,
                ..GbtParams::default()
            },
            ..SweepConfig::default()
        };
        tables.push(run_experiment(name, &data, &sweep).unwrap());
    }
    let summaries: Vec<_> = tables.iter().flat_map(|t| t.summaries.clone()).collect();
    let csv = xcf::eval::results::summary_csv_string(&summaries);
    let cells: std::collections::HashSet<&str> =
        csv.lines().skip(1).flat_map(|l| l.split(',')).collect();

    let specs = chart_specs(&summaries);
    assert_eq!(specs.len(), 3);
    for spec in &specs {
        assert_eq!(spec.series.len(), 2);
        let svg = render_svg(spec).unwrap();
        assert_eq!(svg, render_svg(spec).unwrap());
        let doc = roxmltree::Document::parse(&svg).expect("valid XML");
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert!(!svg.contains("href"), "charts must be self-contained");
        let markers: Vec<_> = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("marker"))
            .collect();
        assert_eq!(markers.len(), 8);
        for m in markers {
            let v = m.attribute("data-value").unwrap();
            assert!(cells.contains(v), "{v} is not in the results CSV");
        }
    }
}
