use clusterlens_cli::svg::{render_svg, Artifact, RenderError};
use clusterlens_core::explain::{
    AttentionFeatureRecord, CorrelationProfile, FeatureAttentionHeatmap, IndividualSummary, SummaryEntry,
};
use clusterlens_core::Matrix;

fn names(v: usize) -> Vec<String> {
    (0..v).map(|i| format!("item_{i:02}")).collect()
}

fn parse(svg: &str) -> roxmltree::Document<'_> {
    roxmltree::Document::parse(svg).expect("well-formed SVG")
}

fn count_class(doc: &roxmltree::Document, class: &str) -> usize {
    doc.descendants().filter(|n| n.attribute("class") == Some(class)).count()
}

#[test]
fn heatmap_has_one_labelled_cell_per_entry() {
    let data: Vec<f64> = (0..144).map(|i| i as f64 / 144.0).collect();
    let heatmap = FeatureAttentionHeatmap {
        cluster: 0,
        model: 0,
        matrix: Matrix::new(12, 12, data).unwrap(),
    };
    let feature_names = names(12);
    let svg = render_svg(&Artifact::Heatmap {
        heatmap: &heatmap,
        feature_names: &feature_names,
    })
    .unwrap();
    let doc = parse(&svg);
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert_eq!(count_class(&doc, "cell"), 144);
    assert_eq!(count_class(&doc, "xlabel"), 12);
    assert_eq!(count_class(&doc, "ylabel"), 12);
    let texts: Vec<&str> = doc.descendants().filter_map(|n| n.text()).collect();
    assert!(texts.contains(&"0.99"));
    assert!(texts.contains(&"0.00"));
}

#[test]
fn all_zero_profile_still_renders() {
    let profile = CorrelationProfile {
        cluster: 1,
        model: 1,
        r: vec![0.0; 12],
        n_individuals: 20,
    };
    let feature_names = names(12);
    let svg = render_svg(&Artifact::CorrBars {
        profile: &profile,
        feature_names: &feature_names,
    })
    .unwrap();
    let doc = parse(&svg);
    assert_eq!(count_class(&doc, "bar"), 12);
    assert!(!svg.contains("NaN") && !svg.contains("inf"));
}

#[test]
fn scatter_has_a_point_per_record_and_a_legend_per_cluster() {
    let records: Vec<AttentionFeatureRecord> = (0..180)
        .map(|i| AttentionFeatureRecord {
            model: i / 60,
            id: format!("id{}", i % 60),
            true_cluster: (i % 60) / 20,
            class: u8::from((i % 60) / 20 == i / 60),
            probability: 0.5,
            attention_focus: 1.0 + (i % 7) as f64 / 10.0,
            mean_feature: (i % 11) as f64 / 11.0,
        })
        .collect();
    let svg = render_svg(&Artifact::Scatter {
        records: &records,
        feature_name: "a<b & c",
    })
    .unwrap();
    let doc = parse(&svg);
    assert_eq!(count_class(&doc, "point"), 180);
    assert_eq!(count_class(&doc, "legend-entry"), 3);
    assert!(svg.contains("a&lt;b &amp; c"));
}

#[test]
fn summary_highlights_top_points() {
    let summary = IndividualSummary {
        id: "person 1".into(),
        cluster: 0,
        model: 0,
        features: (0..3)
            .map(|_| {
                (0..10)
                    .map(|t| SummaryEntry {
                        time_index: t,
                        value: t as f64 / 10.0,
                        weight: 0.1,
                    })
                    .collect()
            })
            .collect(),
    };
    let feature_names = names(3);
    let svg = render_svg(&Artifact::Summary {
        summary: &summary,
        feature_names: &feature_names,
        top_n: 4,
    })
    .unwrap();
    let doc = parse(&svg);
    assert_eq!(count_class(&doc, "series"), 3);
    assert_eq!(count_class(&doc, "highlight"), 12);
}

#[test]
fn empty_inputs_are_reported() {
    let svg = render_svg(&Artifact::Scatter {
        records: &[],
        feature_name: "x",
    });
    assert!(matches!(svg, Err(RenderError::EmptyArtifact(_))));
}
