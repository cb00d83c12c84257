//! Python bindings for xdis-core.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use xdis_core::agreement::{self, RankBasis};
use xdis_core::attribution::{import_lines, AggregationMode, Explanation, MethodId, SegmentSource};
use xdis_core::corpus::{self, CleanArticle, RawArticle, TokenBudget};
use xdis_core::pipeline::{self, AnalysisConfig};
use xdis_core::preprocess::{self, Placeholder, Protection, ProtectionMap};
use xdis_core::segmentation::{self, ClusterParams, EmbeddingSet, KSelection};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn core_err(e: xdis_core::Error) -> PyErr {
    if e.is_io() {
        PyIOError::new_err(e.to_string())
    } else {
        value_err(e)
    }
}

fn expl(scores: Vec<f64>) -> Explanation {
    Explanation::new("", MethodId::new("py").expect("valid method"), scores)
}

fn basis(signed: bool) -> RankBasis {
    if signed {
        RankBasis::Signed
    } else {
        RankBasis::Magnitude
    }
}

/// A preprocessed, sentence-split article.
#[pyclass(frozen, name = "Article")]
struct PyArticle {
    inner: CleanArticle,
}

#[pymethods]
impl PyArticle {
    #[new]
    #[pyo3(signature = (id, text, budget=None))]
    fn new(id: String, text: String, budget: Option<usize>) -> PyResult<Self> {
        let mut inner = CleanArticle::from_raw(&RawArticle { id, text });
        if let Some(b) = budget {
            let budget = TokenBudget::new(b).map_err(value_err)?;
            inner = corpus::truncate_to_budget(&inner, &budget).map_err(value_err)?.article;
        }
        Ok(PyArticle { inner })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn text(&self) -> &str {
        &self.inner.text
    }

    #[getter]
    fn sentences(&self) -> Vec<String> {
        self.inner.sentences.iter().map(|s| s.text.clone()).collect()
    }

    #[getter]
    fn truncated(&self) -> bool {
        self.inner.truncated
    }

    fn __len__(&self) -> usize {
        self.inner.sentence_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "Article(id={:?}, sentences={})",
            self.inner.id,
            self.inner.sentence_count()
        )
    }
}

/// Returns the protected text and a list of `(offset, placeholder, original)`.
#[pyfunction]
fn preprocess_text(text: &str) -> (String, Vec<(usize, String, String)>) {
    let (clean, map) = preprocess::preprocess_text(text);
    let prot = map
        .iter()
        .map(|p| (p.offset, p.placeholder.token().to_owned(), p.original.clone()))
        .collect();
    (clean, prot)
}

#[pyfunction]
fn restore_protected(text: &str, protections: Vec<(usize, String, String)>) -> PyResult<String> {
    let mut map = Vec::with_capacity(protections.len());
    for (offset, token, original) in protections {
        let placeholder = Placeholder::ALL
            .into_iter()
            .find(|p| p.token() == token)
            .ok_or_else(|| value_err(format!("unknown placeholder {token:?}")))?;
        map.push(Protection {
            offset,
            placeholder,
            original,
        });
    }
    preprocess::restore_protected(text, &ProtectionMap(map)).map_err(value_err)
}

#[pyfunction]
fn split_sentences(text: &str) -> Vec<String> {
    corpus::split_sentences(text).into_iter().map(|s| s.text).collect()
}

#[pyfunction]
fn normalize_minmax(scores: Vec<f64>) -> PyResult<Vec<f64>> {
    xdis_core::attribution::normalize_minmax(&scores).map_err(value_err)
}

#[pyfunction]
fn top_features(scores: Vec<f64>, k: usize) -> PyResult<Vec<usize>> {
    Ok(agreement::top_k(&scores, k).map_err(value_err)?.0)
}

#[pyfunction]
fn feature_agreement(a: Vec<f64>, b: Vec<f64>, k: usize) -> PyResult<f64> {
    agreement::feature_agreement(&expl(a), &expl(b), k).map_err(value_err)
}

#[pyfunction]
fn rank_agreement(a: Vec<f64>, b: Vec<f64>, k: usize) -> PyResult<f64> {
    agreement::rank_agreement(&expl(a), &expl(b), k).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (a, b, signed=false))]
fn pairwise_rank_agreement(a: Vec<f64>, b: Vec<f64>, signed: bool) -> PyResult<f64> {
    agreement::pairwise_with(&expl(a), &expl(b), basis(signed)).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (a, b, signed=false))]
fn spearman(a: Vec<f64>, b: Vec<f64>, signed: bool) -> PyResult<f64> {
    agreement::spearman_with(&expl(a), &expl(b), basis(signed)).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (sentences, dim=256))]
fn lexical_embed(sentences: Vec<String>, dim: usize) -> PyResult<Vec<Vec<f64>>> {
    let refs: Vec<&str> = sentences.iter().map(String::as_str).collect();
    Ok(segmentation::lexical_fallback_embed("py", &refs, dim)
        .map_err(value_err)?
        .vectors)
}

/// Returns `(labels, centroids, wcss)` of the best restart.
#[pyfunction]
#[pyo3(signature = (points, k, seed=0, restarts=10))]
fn kmeans(points: Vec<Vec<f64>>, k: usize, seed: u64, restarts: usize) -> PyResult<(Vec<usize>, Vec<Vec<f64>>, f64)> {
    let a = segmentation::cluster_points(&points, k, ClusterParams { seed, restarts }).map_err(value_err)?;
    Ok((a.labels, a.centroids, a.wcss))
}

#[pyfunction]
fn silhouette(points: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
    if points.len() != labels.len() {
        return Err(value_err("points and labels differ in length"));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    Ok(xdis_core::kmeans::silhouette(&points, &labels, k))
}

/// Vectors are L2-normalized first. Returns `(chosen_k, silhouette_curve, wcss_curve)`.
#[pyfunction]
#[pyo3(signature = (points, k_range=None, seed=0, restarts=10))]
fn select_optimal_k(
    points: Vec<Vec<f64>>,
    k_range: Option<(usize, usize)>,
    seed: u64,
    restarts: usize,
) -> PyResult<(usize, Vec<f64>, Vec<f64>)> {
    let emb = EmbeddingSet::new("py", points).map_err(value_err)?;
    let s = segmentation::select_optimal_k(&emb, k_range, ClusterParams { seed, restarts }).map_err(value_err)?;
    Ok((s.chosen_k, s.silhouette_curve, s.wcss_curve))
}

#[pyfunction]
fn average_optimal_k(chosen: Vec<usize>) -> PyResult<usize> {
    let sel: Vec<KSelection> = chosen
        .into_iter()
        .map(|k| KSelection {
            k_range: (k, k),
            wcss_curve: Vec::new(),
            silhouette_curve: Vec::new(),
            chosen_k: k,
            elbow_k: None,
        })
        .collect();
    segmentation::average_optimal_k(&sel).map_err(value_err)
}

fn analysis_inputs(
    articles: Vec<(String, String)>,
    attributions: &[String],
) -> PyResult<(Vec<CleanArticle>, xdis_core::AttributionStore)> {
    let corpus: Vec<CleanArticle> = articles
        .into_iter()
        .map(|(id, text)| CleanArticle::from_raw(&RawArticle { id, text }))
        .collect();
    let store =
        import_lines(attributions.iter().map(String::as_str), &corpus, AggregationMode::Sum).map_err(value_err)?;
    Ok((corpus, store))
}

fn config_for(
    mut config: AnalysisConfig,
    methods: Option<Vec<String>>,
    store: &xdis_core::AttributionStore,
    k: Option<Vec<usize>>,
) -> PyResult<AnalysisConfig> {
    config.methods = match methods {
        Some(m) => m
            .iter()
            .map(|s| MethodId::new(s))
            .collect::<Result<_, _>>()
            .map_err(value_err)?,
        None => store.methods().to_vec(),
    };
    if let Some(k) = k {
        config.k_values = k;
    }
    Ok(config)
}

/// Global analysis over `(id, text)` articles and attribution JSONL lines.
/// Returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (articles, attributions, methods=None, k=None))]
fn global_report(
    articles: Vec<(String, String)>,
    attributions: Vec<String>,
    methods: Option<Vec<String>>,
    k: Option<Vec<usize>>,
) -> PyResult<String> {
    let (corpus, store) = analysis_inputs(articles, &attributions)?;
    let config = config_for(AnalysisConfig::global(Vec::new()), methods, &store, k)?;
    let report = pipeline::run_global_analysis(&corpus, &store, &config).map_err(|e| core_err(e.into()))?;
    Ok(report.to_json())
}

/// Regional analysis with lexical-fallback embeddings. Returns JSON.
#[pyfunction]
#[pyo3(signature = (articles, attributions, methods=None, k=None, segment_source="slice", seed=0, embed_dim=256))]
#[allow(clippy::too_many_arguments)]
fn regional_report(
    articles: Vec<(String, String)>,
    attributions: Vec<String>,
    methods: Option<Vec<String>>,
    k: Option<Vec<usize>>,
    segment_source: &str,
    seed: u64,
    embed_dim: usize,
) -> PyResult<String> {
    let (corpus, store) = analysis_inputs(articles, &attributions)?;
    let mut config = config_for(AnalysisConfig::regional(Vec::new()), methods, &store, k)?;
    config.segment_source = segment_source.parse::<SegmentSource>().map_err(value_err)?;
    config.seed = seed;
    let mut embeddings = std::collections::BTreeMap::new();
    for a in corpus.iter().filter(|a| a.sentence_count() > 0) {
        let e = segmentation::lexical_fallback_embed(&a.id, &a.sentence_texts(), embed_dim).map_err(value_err)?;
        embeddings.insert(a.id.clone(), e);
    }
    let report =
        pipeline::run_regional_analysis(&corpus, &store, &embeddings, &config).map_err(|e| core_err(e.into()))?;
    Ok(report.to_json())
}

/// Compares two report JSON strings; returns the comparison as JSON.
#[pyfunction]
fn compare_reports(global: &str, regional: &str) -> PyResult<String> {
    let g: pipeline::Report = serde_json::from_str(global).map_err(value_err)?;
    let r: pipeline::Report = serde_json::from_str(regional).map_err(value_err)?;
    let cmp = pipeline::compare_reports(&g, &r).map_err(|e| core_err(e.into()))?;
    serde_json::to_string(&cmp).map_err(value_err)
}

#[pymodule]
fn xdis(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArticle>()?;
    m.add_function(wrap_pyfunction!(preprocess_text, m)?)?;
    m.add_function(wrap_pyfunction!(restore_protected, m)?)?;
    m.add_function(wrap_pyfunction!(split_sentences, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_minmax, m)?)?;
    m.add_function(wrap_pyfunction!(top_features, m)?)?;
    m.add_function(wrap_pyfunction!(feature_agreement, m)?)?;
    m.add_function(wrap_pyfunction!(rank_agreement, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise_rank_agreement, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(lexical_embed, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(silhouette, m)?)?;
    m.add_function(wrap_pyfunction!(select_optimal_k, m)?)?;
    m.add_function(wrap_pyfunction!(average_optimal_k, m)?)?;
    m.add_function(wrap_pyfunction!(global_report, m)?)?;
    m.add_function(wrap_pyfunction!(regional_report, m)?)?;
    m.add_function(wrap_pyfunction!(compare_reports, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
