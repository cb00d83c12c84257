//! Sentence embeddings, cluster-count selection and k-means segmentation of
//! articles into semantically coherent groups of sentences.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CleanArticle;
use crate::kmeans::{self, squared_distance, ClusterAssignment, DEFAULT_RESTARTS};

pub const DEFAULT_MAX_K: usize = 10;
pub const MIN_SENTENCES_FOR_CLUSTERING: usize = 4;

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed embedding record: {message}")]
    Parse { line: usize, message: String },
    #[error("embedding refers to unknown article {0:?}")]
    UnknownArticle(String),
    #[error("article {article_id:?}: missing vector for sentence {sentence}")]
    Incomplete { article_id: String, sentence: usize },
    #[error("article {article_id:?}: sentence {sentence} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        article_id: String,
        sentence: usize,
        expected: usize,
        got: usize,
    },
    #[error("article {article_id:?}: sentence {sentence} vector has zero norm or non-finite values")]
    Degenerate { article_id: String, sentence: usize },
    #[error("article {article_id:?}: duplicate or out-of-range sentence index {sentence}")]
    BadIndex { article_id: String, sentence: usize },
    #[error("sentence {0} is empty")]
    EmptySentence(usize),
    #[error("embedding dimension must be at least 8, got {0}")]
    DimensionTooSmall(usize),
    #[error("k = {k} is out of range for {n} points")]
    KOutOfRange { k: usize, n: usize },
    #[error("need at least {MIN_SENTENCES_FOR_CLUSTERING} sentences to choose k, got {0}")]
    TooSmall(usize),
    #[error("empty k range [{lo}, {hi}]")]
    EmptyRange { lo: usize, hi: usize },
    #[error("no cluster-count selections to average")]
    NoSelections,
    #[error("article {0:?} has no sentences")]
    EmptyArticle(String),
}

impl SegmentationError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        SegmentationError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// One unit-norm vector per sentence of an article.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub article_id: String,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl EmbeddingSet {
    /// Validates dimensions and L2-normalizes every vector.
    pub fn new(article_id: impl Into<String>, vectors: Vec<Vec<f64>>) -> Result<Self, SegmentationError> {
        let article_id = article_id.into();
        let dim = vectors.first().map_or(0, Vec::len);
        let mut out = Vec::with_capacity(vectors.len());
        for (i, mut v) in vectors.into_iter().enumerate() {
            if v.len() != dim {
                return Err(SegmentationError::DimensionMismatch {
                    article_id,
                    sentence: i,
                    expected: dim,
                    got: v.len(),
                });
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(SegmentationError::Degenerate {
                    article_id,
                    sentence: i,
                });
            }
            v.iter_mut().for_each(|x| *x /= norm);
            out.push(v);
        }
        Ok(EmbeddingSet {
            article_id,
            dim,
            vectors: out,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

#[derive(Debug, Deserialize)]
struct EmbeddingRecord {
    article_id: String,
    sentence_index: usize,
    vector: Vec<f64>,
}

/// Reads per-sentence vectors. Articles with no records at all are absent
/// from the result; partially covered articles are an error.
pub fn load_embeddings(
    path: &Path,
    corpus: &[CleanArticle],
) -> Result<BTreeMap<String, EmbeddingSet>, SegmentationError> {
    let file = File::open(path).map_err(|e| SegmentationError::io(path, e))?;
    let counts: BTreeMap<&str, usize> = corpus.iter().map(|a| (a.id.as_str(), a.sentence_count())).collect();
    let mut raw: BTreeMap<String, Vec<Option<Vec<f64>>>> = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| SegmentationError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord = serde_json::from_str(&line).map_err(|e| SegmentationError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let n = *counts
            .get(rec.article_id.as_str())
            .ok_or_else(|| SegmentationError::UnknownArticle(rec.article_id.clone()))?;
        let slots = raw.entry(rec.article_id.clone()).or_insert_with(|| vec![None; n]);
        match slots.get_mut(rec.sentence_index) {
            Some(slot @ None) => *slot = Some(rec.vector),
            _ => {
                return Err(SegmentationError::BadIndex {
                    article_id: rec.article_id,
                    sentence: rec.sentence_index,
                })
            }
        }
    }

    let mut out = BTreeMap::new();
    for (article_id, slots) in raw {
        let mut vectors = Vec::with_capacity(slots.len());
        for (i, v) in slots.into_iter().enumerate() {
            vectors.push(v.ok_or_else(|| SegmentationError::Incomplete {
                article_id: article_id.clone(),
                sentence: i,
            })?);
        }
        out.insert(article_id.clone(), EmbeddingSet::new(article_id, vectors)?);
    }
    Ok(out)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic stand-in for a sentence encoder: lowercased character
/// 3-grams (with boundary markers) hashed into `dim` buckets.
pub fn lexical_fallback_embed(
    article_id: &str,
    sentences: &[&str],
    dim: usize,
) -> Result<EmbeddingSet, SegmentationError> {
    if dim < 8 {
        return Err(SegmentationError::DimensionTooSmall(dim));
    }
    let mut vectors = Vec::with_capacity(sentences.len());
    for (i, s) in sentences.iter().enumerate() {
        let s = s.trim();
        if s.is_empty() {
            return Err(SegmentationError::EmptySentence(i));
        }
        let chars: Vec<char> = std::iter::once('\u{2}')
            .chain(s.to_lowercase().chars())
            .chain(std::iter::once('\u{3}'))
            .collect();
        let mut v = vec![0.0; dim];
        for gram in chars.windows(3) {
            let g: String = gram.iter().collect();
            v[(fnv1a(g.as_bytes()) % dim as u64) as usize] += 1.0;
        }
        vectors.push(v);
    }
    EmbeddingSet::new(article_id, vectors)
}

/// Random seed and restart count shared by every clustering call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub seed: u64,
    pub restarts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            seed: 0,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

pub fn kmeans_cluster(
    emb: &EmbeddingSet,
    k: usize,
    params: ClusterParams,
) -> Result<ClusterAssignment, SegmentationError> {
    cluster_points(&emb.vectors, k, params)
}

pub fn cluster_points(
    points: &[Vec<f64>],
    k: usize,
    params: ClusterParams,
) -> Result<ClusterAssignment, SegmentationError> {
    if k == 0 || k > points.len() {
        return Err(SegmentationError::KOutOfRange { k, n: points.len() });
    }
    Ok(kmeans::best_run(kmeans::kmeans(
        points,
        k,
        params.seed,
        params.restarts,
    )))
}

pub fn silhouette_score(emb: &EmbeddingSet, assignment: &ClusterAssignment) -> Result<f64, SegmentationError> {
    if assignment.k < 2 {
        return Err(SegmentationError::KOutOfRange {
            k: assignment.k,
            n: emb.len(),
        });
    }
    Ok(kmeans::silhouette(&emb.vectors, &assignment.labels, assignment.k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k_range: (usize, usize),
    pub wcss_curve: Vec<f64>,
    pub silhouette_curve: Vec<f64>,
    pub chosen_k: usize,
    /// k at the largest second difference of the WCSS curve (diagnostic only).
    pub elbow_k: Option<usize>,
}

/// Picks the k with the highest silhouette (smaller k on ties). The range
/// defaults to `[2, min(10, n - 1)]`; an explicit upper bound is clamped to
/// `n - 1`.
pub fn select_optimal_k(
    emb: &EmbeddingSet,
    k_range: Option<(usize, usize)>,
    params: ClusterParams,
) -> Result<KSelection, SegmentationError> {
    let n = emb.len();
    if n < MIN_SENTENCES_FOR_CLUSTERING {
        return Err(SegmentationError::TooSmall(n));
    }
    let (lo, hi) = k_range.unwrap_or((2, DEFAULT_MAX_K));
    let (lo, hi) = (lo.max(2), hi.min(n - 1));
    if lo > hi {
        return Err(SegmentationError::EmptyRange { lo, hi });
    }

    let mut wcss_curve = Vec::new();
    let mut silhouette_curve = Vec::new();
    let mut chosen_k = lo;
    let mut best = f64::NEG_INFINITY;
    for k in lo..=hi {
        let a = kmeans_cluster(emb, k, params)?;
        let s = silhouette_score(emb, &a)?;
        if s > best {
            best = s;
            chosen_k = k;
        }
        wcss_curve.push(a.wcss);
        silhouette_curve.push(s);
    }
    let elbow_k = (1..wcss_curve.len().saturating_sub(1))
        .map(|i| (i, wcss_curve[i - 1] - 2.0 * wcss_curve[i] + wcss_curve[i + 1]))
        .fold(None::<(usize, f64)>, |acc, (i, d)| match acc {
            Some((_, best)) if best >= d => acc,
            _ => Some((i, d)),
        })
        .map(|(i, _)| lo + i);
    Ok(KSelection {
        k_range: (lo, hi),
        wcss_curve,
        silhouette_curve,
        chosen_k,
        elbow_k,
    })
}

/// Mean chosen k, rounded half away from zero, at least 2.
pub fn average_optimal_k(selections: &[KSelection]) -> Result<usize, SegmentationError> {
    if selections.is_empty() {
        return Err(SegmentationError::NoSelections);
    }
    let mean = selections.iter().map(|s| s.chosen_k as f64).sum::<f64>() / selections.len() as f64;
    Ok((mean.round() as usize).max(2))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationResult {
    pub article_id: String,
    pub k_used: usize,
    /// Sentence indices per segment, ascending; segments ordered by their
    /// first sentence.
    pub segments: Vec<Vec<usize>>,
    /// Segment number of every sentence.
    pub labels: Vec<usize>,
}

impl SegmentationResult {
    pub fn single(article_id: &str, n: usize) -> Self {
        SegmentationResult {
            article_id: article_id.to_owned(),
            k_used: 1,
            segments: vec![(0..n).collect()],
            labels: vec![0; n],
        }
    }

    pub fn from_segments(article_id: &str, k_used: usize, segments: Vec<Vec<usize>>) -> Self {
        let n = segments.iter().map(Vec::len).sum();
        let mut labels = vec![0; n];
        for (s, seg) in segments.iter().enumerate() {
            for &i in seg {
                if let Some(l) = labels.get_mut(i) {
                    *l = s;
                }
            }
        }
        SegmentationResult {
            article_id: article_id.to_owned(),
            k_used,
            segments,
            labels,
        }
    }
}

/// Groups labels into segments ordered by their smallest index.
fn segments_from_labels(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut segs: Vec<Vec<usize>> = groups.into_values().collect();
    segs.sort_by_key(|s| s[0]);
    segs
}

/// Folds every cluster with fewer than two members into the cluster whose
/// centroid is nearest, until none is left or only one cluster remains.
/// Returns canonical labels (segment order).
pub fn merge_small_clusters(points: &[Vec<f64>], labels: &[usize]) -> Vec<usize> {
    let dim = points.first().map_or(0, Vec::len);
    let mut groups = segments_from_labels(labels);
    loop {
        if groups.len() <= 1 {
            break;
        }
        let Some(small) = groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.len() < 2)
            .min_by_key(|(i, g)| (g.len(), *i))
            .map(|(i, _)| i)
        else {
            break;
        };
        let centroids: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| kmeans::centroid_of(g.iter().map(|&i| &points[i]), dim))
            .collect();
        let target = (0..groups.len())
            .filter(|&g| g != small)
            .min_by(|&a, &b| {
                squared_distance(&centroids[small], &centroids[a])
                    .total_cmp(&squared_distance(&centroids[small], &centroids[b]))
                    .then(a.cmp(&b))
            })
            .expect("at least two groups");
        let moved = groups.remove(small);
        let target = if target > small { target - 1 } else { target };
        groups[target].extend(moved);
        groups[target].sort_unstable();
        groups.sort_by_key(|s| s[0]);
    }
    let mut out = vec![0; labels.len()];
    for (s, g) in groups.iter().enumerate() {
        for &i in g {
            out[i] = s;
        }
    }
    out
}

/// Clusters an article's sentences with `min(k, n / 2)` clusters and merges
/// clusters smaller than two. Articles under four sentences stay whole.
pub fn segment_article(
    article: &CleanArticle,
    emb: &EmbeddingSet,
    k: usize,
    params: ClusterParams,
) -> Result<SegmentationResult, SegmentationError> {
    let n = article.sentence_count();
    if n == 0 {
        return Err(SegmentationError::EmptyArticle(article.id.clone()));
    }
    if emb.len() != n {
        return Err(SegmentationError::Incomplete {
            article_id: article.id.clone(),
            sentence: emb.len().min(n),
        });
    }
    if n < MIN_SENTENCES_FOR_CLUSTERING {
        return Ok(SegmentationResult::single(&article.id, n));
    }
    let k_eff = k.min(n / 2).max(1);
    let assignment = kmeans_cluster(emb, k_eff, params)?;
    let labels = merge_small_clusters(&emb.vectors, &assignment.labels);
    Ok(SegmentationResult {
        article_id: article.id.clone(),
        k_used: k_eff,
        segments: segments_from_labels(&labels),
        labels,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentationRecord {
    article_id: String,
    k_used: usize,
    segments: Vec<Vec<usize>>,
}

pub fn segmentation_to_json_line(s: &SegmentationResult) -> String {
    serde_json::to_string(&SegmentationRecord {
        article_id: s.article_id.clone(),
        k_used: s.k_used,
        segments: s.segments.clone(),
    })
    .expect("segmentation record serializes")
}

pub fn write_segmentations(path: &Path, segs: &[SegmentationResult]) -> Result<(), SegmentationError> {
    let mut f = std::io::BufWriter::new(File::create(path).map_err(|e| SegmentationError::io(path, e))?);
    for s in segs {
        writeln!(f, "{}", segmentation_to_json_line(s)).map_err(|e| SegmentationError::io(path, e))?;
    }
    f.flush().map_err(|e| SegmentationError::io(path, e))
}

/// Reads a segmentation export; segments must partition each article.
pub fn load_segmentations(
    path: &Path,
    corpus: &[CleanArticle],
) -> Result<BTreeMap<String, SegmentationResult>, SegmentationError> {
    let file = File::open(path).map_err(|e| SegmentationError::io(path, e))?;
    let counts: BTreeMap<&str, usize> = corpus.iter().map(|a| (a.id.as_str(), a.sentence_count())).collect();
    let mut out = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| SegmentationError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SegmentationRecord = serde_json::from_str(&line).map_err(|e| SegmentationError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let n = *counts
            .get(rec.article_id.as_str())
            .ok_or_else(|| SegmentationError::UnknownArticle(rec.article_id.clone()))?;
        let mut seen = vec![false; n];
        for seg in &rec.segments {
            for (j, &s) in seg.iter().enumerate() {
                let bad = s >= n || seen[s] || (j > 0 && seg[j - 1] >= s);
                if bad {
                    return Err(SegmentationError::BadIndex {
                        article_id: rec.article_id,
                        sentence: s,
                    });
                }
                seen[s] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(SegmentationError::Incomplete {
                article_id: rec.article_id,
                sentence: missing,
            });
        }
        let result = SegmentationResult::from_segments(&rec.article_id, rec.k_used, rec.segments);
        out.insert(rec.article_id, result);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RawArticle;

    fn unit(v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    #[test]
    fn embedding_validation() {
        let e = EmbeddingSet::new("a", vec![unit(&[3.0, 4.0]), unit(&[0.0, 2.0])]).unwrap();
        assert_eq!(e.vectors[0], vec![0.6, 0.8]);
        assert!(matches!(
            EmbeddingSet::new("a", vec![unit(&[0.0, 0.0])]),
            Err(SegmentationError::Degenerate { sentence: 0, .. })
        ));
        assert!(matches!(
            EmbeddingSet::new("a", vec![unit(&[1.0, 0.0]), unit(&[1.0])]),
            Err(SegmentationError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lexical_embedding() {
        let e = lexical_fallback_embed("a", &["abc", "abc", "xyz"], 16).unwrap();
        assert_eq!(e.vectors[0], e.vectors[1]);
        assert_ne!(e.vectors[0], e.vectors[2]);
        for v in &e.vectors {
            assert!((v.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-9);
        }
        assert!(matches!(
            lexical_fallback_embed("a", &["ok", " "], 16),
            Err(SegmentationError::EmptySentence(1))
        ));
        assert!(matches!(
            lexical_fallback_embed("a", &["ok"], 4),
            Err(SegmentationError::DimensionTooSmall(4))
        ));
    }

    fn sel(k: usize) -> KSelection {
        KSelection {
            k_range: (2, 10),
            wcss_curve: vec![],
            silhouette_curve: vec![],
            chosen_k: k,
            elbow_k: None,
        }
    }

    #[test]
    fn averaging_k() {
        assert_eq!(average_optimal_k(&[sel(2), sel(3), sel(4)]).unwrap(), 3);
        assert_eq!(average_optimal_k(&[sel(2), sel(3)]).unwrap(), 3);
        assert_eq!(average_optimal_k(&[sel(2), sel(2), sel(2)]).unwrap(), 2);
        assert!(matches!(average_optimal_k(&[]), Err(SegmentationError::NoSelections)));
    }

    #[test]
    fn selection_range_bounds() {
        let e = lexical_fallback_embed("a", &["one fish", "two fish", "red car", "blue car"], 32).unwrap();
        let s = select_optimal_k(&e, None, ClusterParams::default()).unwrap();
        assert_eq!(s.k_range, (2, 3));
        assert_eq!(s.wcss_curve.len(), 2);
        assert!((2..=3).contains(&s.chosen_k));

        let small = lexical_fallback_embed("a", &["one", "two"], 32).unwrap();
        assert!(matches!(
            select_optimal_k(&small, None, ClusterParams::default()),
            Err(SegmentationError::TooSmall(2))
        ));
    }

    #[test]
    fn merge_folds_singletons() {
        let pts = vec![
            unit(&[0.0, 0.0]),
            unit(&[0.1, 0.0]),
            unit(&[0.0, 0.1]),
            unit(&[0.1, 0.1]),
            unit(&[5.0, 5.0]),
        ];
        assert_eq!(merge_small_clusters(&pts, &[0, 0, 0, 0, 1]), vec![0; 5]);
        // singleton goes to the nearer of two clusters
        let pts = vec![unit(&[0.0]), unit(&[0.1]), unit(&[10.0]), unit(&[10.1]), unit(&[9.0])];
        assert_eq!(merge_small_clusters(&pts, &[2, 2, 0, 0, 1]), vec![0, 0, 1, 1, 1]);
    }

    #[test]
    fn small_articles_stay_whole() {
        let a = CleanArticle::from_raw(&RawArticle {
            id: "a".into(),
            text: "One. Two. Three.".into(),
        });
        let e = lexical_fallback_embed("a", &a.sentence_texts(), 16).unwrap();
        let s = segment_article(&a, &e, 5, ClusterParams::default()).unwrap();
        assert_eq!(s.segments, vec![vec![0, 1, 2]]);
    }
}
