//! Corpus-level analyses: global agreement over whole articles, regional
//! agreement over k-means segments, their comparison, and exports.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agreement::{evaluate, mean, AgreementMatrix, MetricId, RankBasis};
use crate::attribution::{
    normalize_minmax, AggregationMode, AttributionError, AttributionStore, Explanation, MethodId, SegmentSource,
};
use crate::corpus::{CleanArticle, CorpusError, TokenBudget};
use crate::kmeans::DEFAULT_RESTARTS;
use crate::segmentation::{
    average_optimal_k, segment_article, select_optimal_k, ClusterParams, EmbeddingSet, KSelection, SegmentationError,
    SegmentationResult, DEFAULT_MAX_K, MIN_SENTENCES_FOR_CLUSTERING,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Attribution(#[from] AttributionError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
}

impl PipelineError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn format(path: &Path, message: impl ToString) -> Self {
        PipelineError::Format {
            path: path.display().to_string(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentWeighting {
    #[default]
    Unweighted,
    SentenceCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub methods: Vec<MethodId>,
    pub k_values: Vec<usize>,
    pub metrics: Vec<MetricId>,
    pub aggregation: AggregationMode,
    pub token_budget: TokenBudget,
    pub seed: u64,
    pub restarts: usize,
    /// Inclusive range searched when choosing each article's cluster count.
    pub k_search: (usize, usize),
    pub segment_source: SegmentSource,
    pub segment_weighting: SegmentWeighting,
    pub rank_basis: RankBasis,
}

impl AnalysisConfig {
    /// k from 2 to 11 over whole articles.
    pub fn global(methods: Vec<MethodId>) -> Self {
        AnalysisConfig {
            methods,
            k_values: (2..=11).collect(),
            metrics: MetricId::ALL.to_vec(),
            aggregation: AggregationMode::default(),
            token_budget: TokenBudget::default(),
            seed: 0,
            restarts: DEFAULT_RESTARTS,
            k_search: (2, DEFAULT_MAX_K),
            segment_source: SegmentSource::default(),
            segment_weighting: SegmentWeighting::default(),
            rank_basis: RankBasis::default(),
        }
    }

    /// k from 2 to 4, since segments are much shorter than articles.
    pub fn regional(methods: Vec<MethodId>) -> Self {
        AnalysisConfig {
            k_values: (2..=4).collect(),
            ..Self::global(methods)
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.methods.len() < 2 {
            return Err(PipelineError::Config("at least two methods required".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(PipelineError::Config(format!("method {m} listed twice")));
            }
        }
        if self.k_values.iter().any(|&k| k < 2) {
            return Err(PipelineError::Config("k values must be at least 2".into()));
        }
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PipelineError::Config("k values must be strictly ascending".into()));
        }
        if self.metrics.is_empty() {
            return Err(PipelineError::Config("at least one metric required".into()));
        }
        if self.restarts == 0 {
            return Err(PipelineError::Config("restarts must be at least 1".into()));
        }
        if self.k_search.0 > self.k_search.1 {
            return Err(PipelineError::Config("empty cluster-count search range".into()));
        }
        Ok(())
    }

    fn cluster_params(&self) -> ClusterParams {
        ClusterParams {
            seed: self.seed,
            restarts: self.restarts,
        }
    }

    /// (metric, k) keys in report order: metrics in canonical order, k
    /// ascending for top-k metrics.
    fn cells(&self) -> Vec<(MetricId, Option<usize>)> {
        let mut out = Vec::new();
        for m in MetricId::ALL.into_iter().filter(|m| self.metrics.contains(m)) {
            if m.uses_k() {
                out.extend(self.k_values.iter().map(|&k| (m, Some(k))));
            } else {
                out.push((m, None));
            }
        }
        out
    }

    fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.methods.len();
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Global,
    Regional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleValue {
    pub article_id: String,
    pub metric: MetricId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub method_a: MethodId,
    pub method_b: MethodId,
    pub value: f64,
    /// Units (segments) averaged into this value.
    pub units: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub article_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<Vec<usize>>,
    pub metric: MetricId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub method_a: MethodId,
    pub method_b: MethodId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationSummary {
    pub average_k: Option<usize>,
    pub selections: BTreeMap<String, KSelection>,
    pub segments: BTreeMap<String, Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scope: Scope,
    pub config: AnalysisConfig,
    pub corpus_digest: String,
    pub matrices: Vec<AgreementMatrix>,
    pub per_article: Vec<ArticleValue>,
    /// Article-level exclusions; one entry per (article, pair, metric, k).
    pub skipped: Vec<SkipEntry>,
    /// Segments excluded inside articles that still contributed.
    #[serde(default)]
    pub segment_skips: Vec<SkipEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<SegmentationSummary>,
}

impl Report {
    pub fn matrix(&self, metric: MetricId, k: Option<usize>) -> Option<&AgreementMatrix> {
        self.matrices.iter().find(|m| m.metric == metric && m.k == k)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The analysis results alone (matrices, per-article values, article
    /// skips), without scope or configuration.
    pub fn results_json(&self) -> String {
        #[derive(Serialize)]
        struct Results<'a> {
            matrices: &'a [AgreementMatrix],
            per_article: &'a [ArticleValue],
            skipped: &'a [SkipEntry],
        }
        serde_json::to_string_pretty(&Results {
            matrices: &self.matrices,
            per_article: &self.per_article,
            skipped: &self.skipped,
        })
        .expect("results serialize")
    }
}

pub fn corpus_digest(corpus: &[CleanArticle]) -> String {
    let mut h = Sha256::new();
    for a in corpus {
        h.update(a.to_json_line().as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

type CellOutcome = Result<(f64, usize), String>;

/// Per-article outcome for every (cell, pair), plus segment skips.
struct ArticleOutcome {
    values: Vec<Vec<CellOutcome>>,
    segment_skips: Vec<SkipEntry>,
}

fn evaluate_article(
    article: &CleanArticle,
    segments: &[Vec<usize>],
    store: &AttributionStore,
    config: &AnalysisConfig,
    cells: &[(MetricId, Option<usize>)],
    pairs: &[(usize, usize)],
) -> ArticleOutcome {
    let whole = segments.len() == 1;
    let explanations: Vec<Vec<Option<Explanation>>> = segments
        .iter()
        .map(|seg| {
            config
                .methods
                .iter()
                .map(|m| store.resolve(&article.id, m, Some(seg), config.segment_source))
                .collect()
        })
        .collect();

    let mut segment_skips = Vec::new();
    let mut values = Vec::with_capacity(cells.len());
    for &(metric, k) in cells {
        let mut row = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            let (ma, mb) = (&config.methods[i], &config.methods[j]);
            let mut got = Vec::new();
            let mut weights = Vec::new();
            let mut last_reason = String::new();
            for (seg, expl) in segments.iter().zip(&explanations) {
                let outcome = match (&expl[i], &expl[j]) {
                    (None, _) => Err(format!("missing explanation for {ma}")),
                    (_, None) => Err(format!("missing explanation for {mb}")),
                    (Some(a), Some(b)) => {
                        let need = metric.min_features(k);
                        if a.len() < need {
                            Err(format!("{} sentences, need {need}", a.len()))
                        } else {
                            evaluate(metric, a, b, k, config.rank_basis).map_err(|e| e.to_string())
                        }
                    }
                };
                match outcome {
                    Ok(v) => {
                        got.push(v);
                        weights.push(seg.len() as f64);
                    }
                    Err(reason) => {
                        if !whole {
                            segment_skips.push(SkipEntry {
                                article_id: article.id.clone(),
                                segment: Some(seg.clone()),
                                metric,
                                k,
                                method_a: ma.clone(),
                                method_b: mb.clone(),
                                reason: reason.clone(),
                            });
                        }
                        last_reason = reason;
                    }
                }
            }
            row.push(match got.len() {
                0 if whole => Err(last_reason),
                0 => Err(format!("no usable segment among {}", segments.len())),
                1 => Ok((got[0], 1)),
                n => {
                    let v = match config.segment_weighting {
                        SegmentWeighting::Unweighted => mean(&got).expect("non-empty"),
                        SegmentWeighting::SentenceCount => {
                            let total: f64 = weights.iter().sum();
                            got.iter().zip(&weights).map(|(v, w)| v * w).sum::<f64>() / total
                        }
                    };
                    Ok((v, n))
                }
            });
        }
        values.push(row);
    }
    ArticleOutcome { values, segment_skips }
}

/// Shared by both scopes: `plan` maps each article to its units, or to the
/// reason the whole article is excluded.
fn assemble(
    scope: Scope,
    corpus: &[CleanArticle],
    store: &AttributionStore,
    config: &AnalysisConfig,
    plan: &[Result<Vec<Vec<usize>>, String>],
) -> Report {
    let cells = config.cells();
    let pairs = config.pairs();

    let outcomes: Vec<Option<ArticleOutcome>> = corpus
        .par_iter()
        .zip(plan.par_iter())
        .map(|(article, units)| {
            units
                .as_ref()
                .ok()
                .map(|segs| evaluate_article(article, segs, store, config, &cells, &pairs))
        })
        .collect();

    let mut matrices = Vec::with_capacity(cells.len());
    let mut per_article = Vec::new();
    let mut skipped = Vec::new();
    let mut segment_skips = Vec::new();
    for o in outcomes.iter().flatten() {
        segment_skips.extend(o.segment_skips.iter().cloned());
    }

    let n_methods = config.methods.len();
    let mut presence = vec![0usize; n_methods];
    for (article, units) in corpus.iter().zip(plan) {
        if units.is_ok() {
            for (m, method) in config.methods.iter().enumerate() {
                if store.get(&article.id, method).is_some() {
                    presence[m] += 1;
                }
            }
        }
    }

    for (c, &(metric, k)) in cells.iter().enumerate() {
        let mut matrix = AgreementMatrix::empty(metric, k, config.methods.clone());
        for (m, &count) in presence.iter().enumerate() {
            matrix.set(m, m, (count > 0).then_some(1.0), count);
        }
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let mut cell_values = Vec::new();
            for ((article, units), outcome) in corpus.iter().zip(plan).zip(&outcomes) {
                let result = match (units, outcome) {
                    (Err(reason), _) => Err(reason.clone()),
                    (Ok(_), Some(o)) => o.values[c][p].clone(),
                    (Ok(_), None) => unreachable!("outcome exists for every planned article"),
                };
                match result {
                    Ok((value, n_units)) => {
                        cell_values.push(value);
                        per_article.push(ArticleValue {
                            article_id: article.id.clone(),
                            metric,
                            k,
                            method_a: config.methods[i].clone(),
                            method_b: config.methods[j].clone(),
                            value,
                            units: n_units,
                        });
                    }
                    Err(reason) => skipped.push(SkipEntry {
                        article_id: article.id.clone(),
                        segment: None,
                        metric,
                        k,
                        method_a: config.methods[i].clone(),
                        method_b: config.methods[j].clone(),
                        reason,
                    }),
                }
            }
            if cell_values.is_empty() {
                warn!(
                    "{metric} k={k:?} {}/{}: no usable articles",
                    config.methods[i], config.methods[j]
                );
            }
            matrix.set(i, j, mean(&cell_values), cell_values.len());
        }
        matrices.push(matrix);
    }
    info!(
        "{scope:?} analysis: {} articles, {} matrices, {} skips",
        corpus.len(),
        matrices.len(),
        skipped.len()
    );

    Report {
        scope,
        config: config.clone(),
        corpus_digest: corpus_digest(corpus),
        matrices,
        per_article,
        skipped,
        segment_skips,
        segmentation: None,
    }
}

/// Agreement between every method pair over whole articles. Articles with
/// fewer sentences than k are skipped for that k; relative-ranking metrics
/// need at least two sentences.
pub fn run_global_analysis(
    corpus: &[CleanArticle],
    store: &AttributionStore,
    config: &AnalysisConfig,
) -> Result<Report, PipelineError> {
    config.validate()?;
    let plan: Vec<_> = corpus
        .iter()
        .map(|a| Ok(vec![(0..a.sentence_count()).collect()]))
        .collect();
    Ok(assemble(Scope::Global, corpus, store, config, &plan))
}

/// Per-article k selection, the averaged k, and the resulting segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationPlan {
    pub selections: BTreeMap<String, KSelection>,
    pub average_k: Option<usize>,
    pub segmentations: BTreeMap<String, SegmentationResult>,
}

pub fn plan_segmentation(
    corpus: &[CleanArticle],
    embeddings: &BTreeMap<String, EmbeddingSet>,
    config: &AnalysisConfig,
) -> Result<SegmentationPlan, PipelineError> {
    let params = config.cluster_params();
    let selections: Vec<Option<KSelection>> = corpus
        .par_iter()
        .map(|a| match embeddings.get(&a.id) {
            Some(emb) if a.sentence_count() >= MIN_SENTENCES_FOR_CLUSTERING => {
                select_optimal_k(emb, Some(config.k_search), params).map(Some)
            }
            _ => Ok(None),
        })
        .collect::<Result<_, _>>()?;
    let chosen: Vec<KSelection> = selections.iter().flatten().cloned().collect();
    let average_k = if chosen.is_empty() {
        None
    } else {
        Some(average_optimal_k(&chosen)?)
    };
    debug!("average k = {average_k:?} over {} articles", chosen.len());

    let segmentations: Vec<Option<SegmentationResult>> = corpus
        .par_iter()
        .map(|a| match embeddings.get(&a.id) {
            None => Ok(None),
            Some(_) if a.sentence_count() == 0 => Ok(Some(SegmentationResult::single(&a.id, 0))),
            Some(emb) => segment_article(a, emb, average_k.unwrap_or(2), params).map(Some),
        })
        .collect::<Result<_, _>>()?;

    Ok(SegmentationPlan {
        selections: corpus
            .iter()
            .zip(selections)
            .filter_map(|(a, s)| s.map(|s| (a.id.clone(), s)))
            .collect(),
        average_k,
        segmentations: segmentations
            .into_iter()
            .flatten()
            .map(|s| (s.article_id.clone(), s))
            .collect(),
    })
}

/// Segments every article and averages agreement first over an article's
/// segments, then over articles. Articles without embeddings are skipped.
pub fn run_regional_analysis(
    corpus: &[CleanArticle],
    store: &AttributionStore,
    embeddings: &BTreeMap<String, EmbeddingSet>,
    config: &AnalysisConfig,
) -> Result<Report, PipelineError> {
    config.validate()?;
    let plan = plan_segmentation(corpus, embeddings, config)?;
    let mut report = regional_from_segmentations(corpus, store, &plan.segmentations, config)?;
    if let Some(s) = report.segmentation.as_mut() {
        s.average_k = plan.average_k;
        s.selections = plan.selections;
    }
    Ok(report)
}

/// Regional analysis over precomputed segmentations.
pub fn regional_from_segmentations(
    corpus: &[CleanArticle],
    store: &AttributionStore,
    segmentations: &BTreeMap<String, SegmentationResult>,
    config: &AnalysisConfig,
) -> Result<Report, PipelineError> {
    config.validate()?;
    let plan: Vec<Result<Vec<Vec<usize>>, String>> = corpus
        .iter()
        .map(|a| match segmentations.get(&a.id) {
            Some(s) => Ok(s.segments.clone()),
            None => {
                warn!("article {:?}: no embeddings, skipped", a.id);
                Err("missing embeddings".to_owned())
            }
        })
        .collect();
    let mut report = assemble(Scope::Regional, corpus, store, config, &plan);
    report.segmentation = Some(SegmentationSummary {
        average_k: None,
        selections: BTreeMap::new(),
        segments: segmentations
            .iter()
            .map(|(id, s)| (id.clone(), s.segments.clone()))
            .collect(),
    });
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: MetricId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub method_a: MethodId,
    pub method_b: MethodId,
    pub global: Option<f64>,
    pub regional: Option<f64>,
    pub delta: Option<f64>,
    pub regional_lower: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub notes: Vec<String>,
}

/// Cell-by-cell regional − global for every shared (metric, k).
pub fn compare_reports(global: &Report, regional: &Report) -> Result<Comparison, PipelineError> {
    let mut gm = global.config.methods.clone();
    let mut rm = regional.config.methods.clone();
    gm.sort();
    rm.sort();
    if gm != rm {
        return Err(PipelineError::Validation("reports cover different methods".into()));
    }
    let metrics = |r: &Report| {
        let mut m: Vec<MetricId> = r.matrices.iter().map(|m| m.metric).collect();
        m.sort();
        m.dedup();
        m
    };
    if metrics(global) != metrics(regional) {
        return Err(PipelineError::Validation("reports cover different metrics".into()));
    }

    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for g in &global.matrices {
        let Some(r) = regional.matrix(g.metric, g.k) else {
            notes.push(format!("{} k={} only in the global report", g.metric, g.k.unwrap_or(0)));
            continue;
        };
        for (a, b, gv, _) in g.pairs() {
            let rv = r.get(a, b);
            let delta = gv.zip(rv).map(|(g, r)| r - g);
            rows.push(ComparisonRow {
                metric: g.metric,
                k: g.k,
                method_a: a.clone(),
                method_b: b.clone(),
                global: gv,
                regional: rv,
                delta,
                regional_lower: delta.is_some_and(|d| d < 0.0),
            });
        }
    }
    for r in &regional.matrices {
        if global.matrix(r.metric, r.k).is_none() {
            notes.push(format!(
                "{} k={} only in the regional report",
                r.metric,
                r.k.unwrap_or(0)
            ));
        }
    }
    Ok(Comparison { rows, notes })
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    let mut f = File::create(path).map_err(|e| PipelineError::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| PipelineError::io(path, e))?;
    f.write_all(b"\n").map_err(|e| PipelineError::io(path, e))
}

pub fn write_report(report: &Report, path: &Path) -> Result<(), PipelineError> {
    write_file(path, &report.to_json())
}

pub fn read_report(path: &Path) -> Result<Report, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::format(path, e))
}

pub const FLAT_HEADER: [&str; 6] = ["metric", "method_a", "method_b", "k", "value", "count"];

fn opt_f64(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_usize(v: Option<usize>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per (metric, pair, k); missing values are empty cells.
pub fn flat_table(report: &Report) -> Vec<[String; 6]> {
    report
        .matrices
        .iter()
        .flat_map(|m| {
            m.pairs().map(move |(a, b, v, count)| {
                [
                    m.metric.to_string(),
                    a.to_string(),
                    b.to_string(),
                    opt_usize(m.k),
                    opt_f64(v),
                    count.to_string(),
                ]
            })
        })
        .collect()
}

pub fn write_flat_table(report: &Report, path: &Path) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| PipelineError::format(path, e))?;
    w.write_record(FLAT_HEADER)
        .map_err(|e| PipelineError::format(path, e))?;
    for row in flat_table(report) {
        w.write_record(&row).map_err(|e| PipelineError::format(path, e))?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

pub fn write_comparison(cmp: &Comparison, json: &Path, table: Option<&Path>) -> Result<(), PipelineError> {
    write_file(json, &serde_json::to_string_pretty(cmp).expect("comparison serializes"))?;
    if let Some(path) = table {
        let mut w = csv::Writer::from_path(path).map_err(|e| PipelineError::format(path, e))?;
        w.write_record([
            "metric",
            "method_a",
            "method_b",
            "k",
            "global",
            "regional",
            "delta",
            "regional_lower",
        ])
        .map_err(|e| PipelineError::format(path, e))?;
        for r in &cmp.rows {
            w.write_record([
                r.metric.to_string(),
                r.method_a.to_string(),
                r.method_b.to_string(),
                opt_usize(r.k),
                opt_f64(r.global),
                opt_f64(r.regional),
                opt_f64(r.delta),
                r.regional_lower.to_string(),
            ])
            .map_err(|e| PipelineError::format(path, e))?;
        }
        w.flush().map_err(|e| PipelineError::io(path, e))?;
    }
    Ok(())
}

/// Input for the sentence highlighting viewer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VizPayload {
    pub title: String,
    pub summary: String,
    pub sentences: Vec<String>,
    pub weights: Vec<f64>,
}

pub fn export_viz_payload(
    article: &CleanArticle,
    expl: &Explanation,
    summary: &str,
    title: &str,
) -> Result<VizPayload, PipelineError> {
    if expl.len() != article.sentence_count() {
        return Err(PipelineError::Validation(format!(
            "article {:?} has {} sentences but the explanation has {} scores",
            article.id,
            article.sentence_count(),
            expl.len()
        )));
    }
    let weights = if expl.is_empty() {
        Vec::new()
    } else {
        normalize_minmax(&expl.scores)?
    };
    Ok(VizPayload {
        title: title.to_owned(),
        summary: summary.to_owned(),
        sentences: article.sentences.iter().map(|s| s.text.clone()).collect(),
        weights,
    })
}

pub fn write_viz_payload(payload: &VizPayload, path: &Path) -> Result<(), PipelineError> {
    write_file(
        path,
        &serde_json::to_string_pretty(payload).expect("payload serializes"),
    )
}
