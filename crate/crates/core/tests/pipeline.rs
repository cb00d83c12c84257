mod common;

use common::*;
use xdis_core::agreement::MetricId;
use xdis_core::attribution::{AttributionStore, Explanation};
use xdis_core::pipeline::{
    compare_reports, export_viz_payload, read_report, run_global_analysis, run_regional_analysis, write_flat_table,
    write_report, write_viz_payload, AnalysisConfig, PipelineError, FLAT_HEADER,
};
use xdis_core::SegmentSource;

fn two_article_store() -> (Vec<xdis_core::CleanArticle>, AttributionStore) {
    let corpus = vec![article("p", &sentences("p", 4)), article("q", &sentences("q", 5))];
    let mut store = AttributionStore::new(&corpus);
    for (id, x, y) in [
        ("p", vec![0.9, -0.1, 0.5, 0.2], vec![0.3, 0.8, -0.6, 0.1]),
        ("q", vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![5.0, 1.0, 4.0, 2.0, 3.0]),
    ] {
        store.insert(Explanation::new(id, m("x"), x)).unwrap();
        store.insert(Explanation::new(id, m("y"), y)).unwrap();
    }
    (corpus, store)
}

#[test]
fn identical_methods_agree_everywhere() {
    let corpus = vec![article("a", &sentences("a", 6)), article("b", &sentences("b", 7))];
    let mut store = AttributionStore::new(&corpus);
    for a in &corpus {
        let s: Vec<f64> = (0..a.sentence_count()).map(|i| (i as f64 * 0.37).sin()).collect();
        for name in ["lime", "attention"] {
            store
                .insert(Explanation::new(a.id.clone(), m(name), s.clone()))
                .unwrap();
        }
    }
    let mut config = AnalysisConfig::global(vec![m("lime"), m("attention")]);
    config.k_values = vec![2, 3, 4, 5, 6];
    let r = run_global_analysis(&corpus, &store, &config).unwrap();
    for mat in &r.matrices {
        assert_eq!(mat.values[0][1], Some(1.0), "{} k={:?}", mat.metric, mat.k);
    }
}

#[test]
fn cells_are_hand_averaged_oracle_values() {
    let (corpus, store) = two_article_store();
    let mut config = AnalysisConfig::global(vec![m("x"), m("y")]);
    config.k_values = vec![2, 3];
    let r = run_global_analysis(&corpus, &store, &config).unwrap();
    let p = (vec![0.9, -0.1, 0.5, 0.2], vec![0.3, 0.8, -0.6, 0.1]);
    let q = (vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![5.0, 1.0, 4.0, 2.0, 3.0]);
    for k in [2, 3] {
        let want = (oracle_fa(&p.0, &p.1, k) + oracle_fa(&q.0, &q.1, k)) / 2.0;
        assert_eq!(
            r.matrix(MetricId::FeatureAgreement, Some(k)).unwrap().values[0][1],
            Some(want)
        );
        let want = (oracle_ra(&p.0, &p.1, k) + oracle_ra(&q.0, &q.1, k)) / 2.0;
        assert_eq!(
            r.matrix(MetricId::RankAgreement, Some(k)).unwrap().values[0][1],
            Some(want)
        );
    }
    let want = (oracle_pra(&p.0, &p.1) + oracle_pra(&q.0, &q.1)) / 2.0;
    assert_eq!(
        r.matrix(MetricId::PairwiseRankAgreement, None).unwrap().values[0][1],
        Some(want)
    );
    let rho = r.matrix(MetricId::Spearman, None).unwrap().values[0][1].unwrap();
    let want = (oracle_spearman(&p.0, &p.1).unwrap() + oracle_spearman(&q.0, &q.1).unwrap()) / 2.0;
    assert!((rho - want).abs() < 1e-12);
}

#[test]
fn too_few_methods_is_a_config_error() {
    let (corpus, store) = two_article_store();
    let err = run_global_analysis(&corpus, &store, &AnalysisConfig::global(vec![m("x")])).unwrap_err();
    assert!(matches!(err, PipelineError::Config(_)));
}

#[test]
fn structured_report_round_trips() {
    let (corpus, store) = two_article_store();
    let r = run_global_analysis(&corpus, &store, &AnalysisConfig::global(vec![m("x"), m("y")])).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    write_report(&r, &path).unwrap();
    assert_eq!(read_report(&path).unwrap(), r);
}

#[test]
fn flat_table_rows() {
    let (corpus, store) = two_article_store();
    let mut config = AnalysisConfig::global(vec![m("x"), m("y")]);
    config.metrics = vec![MetricId::FeatureAgreement, MetricId::Spearman];
    config.k_values = vec![2, 3];
    let r = run_global_analysis(&corpus, &store, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    write_flat_table(&r, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], FLAT_HEADER.join(","));
    // one pair × (2 top-k rows + 1 relative-ranking row)
    assert_eq!(lines.len() - 1, 3);

    config.metrics = vec![
        MetricId::FeatureAgreement,
        MetricId::RankAgreement,
        MetricId::PairwiseRankAgreement,
        MetricId::Spearman,
    ];
    let r = run_global_analysis(&corpus, &store, &config).unwrap();
    write_flat_table(&r, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count() - 1, 6);

    let mut empty = r.clone();
    empty.matrices.clear();
    write_flat_table(&empty, &path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap().trim_end(),
        FLAT_HEADER.join(",")
    );
}

#[test]
fn unwritable_destination_is_an_io_error() {
    let (corpus, store) = two_article_store();
    let r = run_global_analysis(&corpus, &store, &AnalysisConfig::global(vec![m("x"), m("y")])).unwrap();
    let err = write_report(&r, std::path::Path::new("/nonexistent/dir/r.json")).unwrap_err();
    assert!(matches!(err, PipelineError::Io { .. }));
}

#[test]
fn comparison_of_identical_reports_is_zero() {
    let (corpus, store) = two_article_store();
    let r = run_global_analysis(&corpus, &store, &AnalysisConfig::global(vec![m("x"), m("y")])).unwrap();
    let cmp = compare_reports(&r, &r).unwrap();
    assert!(!cmp.rows.is_empty());
    for row in &cmp.rows {
        if let Some(d) = row.delta {
            assert_eq!(d, 0.0);
        }
        assert!(!row.regional_lower);
    }
    assert!(cmp.notes.is_empty());
}

#[test]
fn comparison_restricts_to_shared_k() {
    let (corpus, store) = two_article_store();
    let mut config = AnalysisConfig::global(vec![m("x"), m("y")]);
    config.k_values = vec![2, 3, 4, 5];
    let g = run_global_analysis(&corpus, &store, &config).unwrap();
    config.k_values = vec![2, 3, 4];
    let r = run_global_analysis(&corpus, &store, &config).unwrap();
    let cmp = compare_reports(&g, &r).unwrap();
    assert!(cmp.rows.iter().all(|row| row.k != Some(5)));
    assert_eq!(cmp.notes.len(), 2, "{:?}", cmp.notes);

    let other = run_global_analysis(&corpus, &store, &AnalysisConfig::global(vec![m("x"), m("y")]));
    let mut mismatched = other.unwrap();
    mismatched.config.methods = vec![m("x"), m("z")];
    assert!(matches!(
        compare_reports(&g, &mismatched),
        Err(PipelineError::Validation(_))
    ));
}

#[test]
fn fixture_deltas_match_oracle_differences() {
    let f = regional_fixture(11, 8);
    let mut config = AnalysisConfig::regional(vec![m("x"), m("y")]);
    config.segment_source = SegmentSource::SliceArticleLevel;
    let g = run_global_analysis(&f.corpus, &f.sliced, &config).unwrap();
    let r = run_regional_analysis(&f.corpus, &f.sliced, &f.embeddings, &config).unwrap();
    let cmp = compare_reports(&g, &r).unwrap();
    for k in [2, 3, 4] {
        let (og, or) = fixture_oracle_fa(&f, k);
        let row = cmp
            .rows
            .iter()
            .find(|row| row.metric == MetricId::FeatureAgreement && row.k == Some(k))
            .unwrap();
        assert!((row.delta.unwrap() - (or - og)).abs() < 1e-12, "k={k}");
    }
}

#[test]
fn native_segments_without_records_are_skipped() {
    let f = regional_fixture(5, 4);
    let config = AnalysisConfig::regional(vec![m("x"), m("y")]);
    // the sliced store has no per-segment records
    let r = run_regional_analysis(&f.corpus, &f.sliced, &f.embeddings, &config).unwrap();
    assert!(r.per_article.is_empty());
    assert!(!r.segment_skips.is_empty());
    assert_eq!(r.skipped.len(), f.corpus.len() * r.matrices.len());
}

#[test]
fn viz_payload_file() {
    let a = article("v", &sentences("v", 3));
    let p = export_viz_payload(
        &a,
        &Explanation::new("v", m("lime"), vec![2.0, 4.0, 6.0]),
        "Sum.",
        "Title",
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("viz.json");
    write_viz_payload(&p, &path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["sentences", "summary", "title", "weights"]);
    assert_eq!(v["weights"], serde_json::json!([0.0, 0.5, 1.0]));
}
