//! Agreement metrics between two explanations of the same unit, and their
//! averages over a corpus as method × method matrices.
//!
//! Features are ranked by the magnitude of their score, highest first, with
//! ties going to the lower sentence index. Every metric here depends on the
//! scores only through that ranking, so they are invariant to positive
//! rescaling and exactly symmetric in their two arguments.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attribution::{AttributionStore, Explanation, MethodId, SegmentSource};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgreementError {
    #[error("explanations have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("k = {k} is out of range for {features} features")]
    KOutOfRange { k: usize, features: usize },
    #[error("need at least 2 features, got {0}")]
    TooFewFeatures(usize),
    #[error("rank correlation is undefined for a constant ranking")]
    Undefined,
}

/// Whether rankings use score magnitude or the signed score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankBasis {
    #[default]
    Magnitude,
    Signed,
}

impl RankBasis {
    fn key(self, s: f64) -> f64 {
        match self {
            RankBasis::Magnitude => s.abs(),
            RankBasis::Signed => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    FeatureAgreement,
    RankAgreement,
    PairwiseRankAgreement,
    Spearman,
}

impl MetricId {
    pub const ALL: [MetricId; 4] = [
        MetricId::FeatureAgreement,
        MetricId::RankAgreement,
        MetricId::PairwiseRankAgreement,
        MetricId::Spearman,
    ];

    /// Top-k metrics are evaluated once per k; the others once per unit.
    pub fn uses_k(self) -> bool {
        matches!(self, MetricId::FeatureAgreement | MetricId::RankAgreement)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            MetricId::FeatureAgreement => "fa",
            MetricId::RankAgreement => "ra",
            MetricId::PairwiseRankAgreement => "pra",
            MetricId::Spearman => "spearman",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricId::FeatureAgreement => "feature_agreement",
            MetricId::RankAgreement => "rank_agreement",
            MetricId::PairwiseRankAgreement => "pairwise_rank_agreement",
            MetricId::Spearman => "spearman",
        }
    }

    /// Minimum number of features a unit needs for this metric at `k`.
    pub fn min_features(self, k: Option<usize>) -> usize {
        if self.uses_k() {
            k.unwrap_or(1)
        } else {
            2
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.short_name() == s || m.name() == s)
            .ok_or_else(|| format!("unknown metric {s:?} (expected fa, ra, pra or spearman)"))
    }
}

/// Ordering of feature indices: larger key first, lower index on ties.
fn ranking(scores: &[f64], basis: RankBasis) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| basis.key(scores[b]).total_cmp(&basis.key(scores[a])).then(a.cmp(&b)));
    idx
}

/// The k most important features, most important first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopKList(pub Vec<usize>);

impl TopKList {
    pub fn k(&self) -> usize {
        self.0.len()
    }

    /// 1-based position of `feature` in the list.
    pub fn rank(&self, feature: usize) -> Option<usize> {
        self.0.iter().position(|&f| f == feature).map(|p| p + 1)
    }
}

pub fn top_features(expl: &Explanation, k: usize) -> Result<TopKList, AgreementError> {
    top_k(&expl.scores, k)
}

pub fn top_k(scores: &[f64], k: usize) -> Result<TopKList, AgreementError> {
    if k == 0 || k > scores.len() {
        return Err(AgreementError::KOutOfRange {
            k,
            features: scores.len(),
        });
    }
    let mut r = ranking(scores, RankBasis::Magnitude);
    r.truncate(k);
    Ok(TopKList(r))
}

fn paired<'a>(a: &'a Explanation, b: &'a Explanation) -> Result<(&'a [f64], &'a [f64]), AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::LengthMismatch(a.len(), b.len()));
    }
    Ok((&a.scores, &b.scores))
}

/// Fraction of the two top-k sets that is shared.
pub fn feature_agreement(a: &Explanation, b: &Explanation, k: usize) -> Result<f64, AgreementError> {
    let (sa, sb) = paired(a, b)?;
    let (ta, tb) = (top_k(sa, k)?, top_k(sb, k)?);
    let mut in_a = vec![false; sa.len()];
    for &f in &ta.0 {
        in_a[f] = true;
    }
    let common = tb.0.iter().filter(|&&f| in_a[f]).count();
    Ok(common as f64 / k as f64)
}

/// Fraction of top-k positions holding the same feature in both lists.
pub fn rank_agreement(a: &Explanation, b: &Explanation, k: usize) -> Result<f64, AgreementError> {
    let (sa, sb) = paired(a, b)?;
    let (ta, tb) = (top_k(sa, k)?, top_k(sb, k)?);
    let same = ta.0.iter().zip(&tb.0).filter(|(x, y)| x == y).count();
    Ok(same as f64 / k as f64)
}

/// Fractional (average) ranks, 1 = most important.
pub fn fractional_ranks(scores: &[f64], basis: RankBasis) -> Vec<f64> {
    let order = ranking(scores, basis);
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let key = basis.key(scores[order[i]]);
        let mut j = i + 1;
        while j < order.len() && basis.key(scores[order[j]]).total_cmp(&key) == Ordering::Equal {
            j += 1;
        }
        // positions i..j (0-based) share the mean of ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &f in &order[i..j] {
            ranks[f] = avg;
        }
        i = j;
    }
    ranks
}

pub fn spearman_rank_correlation(a: &Explanation, b: &Explanation) -> Result<f64, AgreementError> {
    spearman_with(a, b, RankBasis::Magnitude)
}

/// Spearman's rho: Pearson correlation of the fractional ranks.
pub fn spearman_with(a: &Explanation, b: &Explanation, basis: RankBasis) -> Result<f64, AgreementError> {
    let (sa, sb) = paired(a, b)?;
    if sa.len() < 2 {
        return Err(AgreementError::TooFewFeatures(sa.len()));
    }
    let ra = fractional_ranks(sa, basis);
    let rb = fractional_ranks(sb, basis);
    // both rank vectors have the same mean, (n + 1) / 2
    let mean = (sa.len() + 1) as f64 / 2.0;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        let (dx, dy) = (x - mean, y - mean);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return Err(AgreementError::Undefined);
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

pub fn pairwise_rank_agreement(a: &Explanation, b: &Explanation) -> Result<f64, AgreementError> {
    pairwise_with(a, b, RankBasis::Magnitude)
}

/// Fraction of unordered feature pairs ordered the same way in both
/// rankings, computed as 1 − inversions / C(n, 2).
pub fn pairwise_with(a: &Explanation, b: &Explanation, basis: RankBasis) -> Result<f64, AgreementError> {
    let (sa, sb) = paired(a, b)?;
    let n = sa.len();
    if n < 2 {
        return Err(AgreementError::TooFewFeatures(n));
    }
    let mut pos_b = vec![0usize; n];
    for (p, f) in ranking(sb, basis).into_iter().enumerate() {
        pos_b[f] = p;
    }
    let mut seq: Vec<usize> = ranking(sa, basis).into_iter().map(|f| pos_b[f]).collect();
    let inversions = count_inversions(&mut seq);
    let pairs = n * (n - 1) / 2;
    Ok((pairs - inversions) as f64 / pairs as f64)
}

fn count_inversions(v: &mut [usize]) -> usize {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            merged.push(v[i]);
            i += 1;
        } else {
            merged.push(v[j]);
            count += mid - i;
            j += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    count
}

/// Evaluates one metric on a pair of explanations.
pub fn evaluate(
    metric: MetricId,
    a: &Explanation,
    b: &Explanation,
    k: Option<usize>,
    basis: RankBasis,
) -> Result<f64, AgreementError> {
    match metric {
        MetricId::FeatureAgreement => feature_agreement(a, b, k.unwrap_or(1)),
        MetricId::RankAgreement => rank_agreement(a, b, k.unwrap_or(1)),
        MetricId::PairwiseRankAgreement => pairwise_with(a, b, basis),
        MetricId::Spearman => spearman_with(a, b, basis),
    }
}

/// Averaged agreement for one metric (and one k for top-k metrics). `None`
/// marks a cell with no usable unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementMatrix {
    pub metric: MetricId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub methods: Vec<MethodId>,
    pub values: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<usize>>,
}

impl AgreementMatrix {
    pub fn empty(metric: MetricId, k: Option<usize>, methods: Vec<MethodId>) -> Self {
        let n = methods.len();
        AgreementMatrix {
            metric,
            k,
            methods,
            values: vec![vec![None; n]; n],
            counts: vec![vec![0; n]; n],
        }
    }

    /// Sets a cell and its mirror.
    pub fn set(&mut self, i: usize, j: usize, value: Option<f64>, count: usize) {
        self.values[i][j] = value;
        self.values[j][i] = value;
        self.counts[i][j] = count;
        self.counts[j][i] = count;
    }

    pub fn get(&self, a: &MethodId, b: &MethodId) -> Option<f64> {
        let i = self.methods.iter().position(|m| m == a)?;
        let j = self.methods.iter().position(|m| m == b)?;
        self.values[i][j]
    }

    /// Flat rows (method_a, method_b, value, count) for i < j.
    pub fn pairs(&self) -> impl Iterator<Item = (&MethodId, &MethodId, Option<f64>, usize)> + '_ {
        let n = self.methods.len();
        (0..n).flat_map(move |i| {
            ((i + 1)..n).map(move |j| (&self.methods[i], &self.methods[j], self.values[i][j], self.counts[i][j]))
        })
    }
}

/// A unit of analysis: a whole article or one segment of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub article_id: String,
    pub segment: Option<Vec<usize>>,
}

impl Unit {
    pub fn article(id: impl Into<String>) -> Self {
        Unit {
            article_id: id.into(),
            segment: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MatrixOptions {
    pub basis: RankBasis,
    pub source: SegmentSource,
}

/// Unweighted mean of a metric over every unit where both explanations exist
/// and the metric is defined. Units failing either test are not counted.
pub fn agreement_matrix(
    store: &AttributionStore,
    methods: &[MethodId],
    metric: MetricId,
    k: Option<usize>,
    units: &[Unit],
    options: MatrixOptions,
) -> AgreementMatrix {
    let mut matrix = AgreementMatrix::empty(metric, k, methods.to_vec());
    let resolved: Vec<Vec<Option<Explanation>>> = methods
        .iter()
        .map(|m| {
            units
                .iter()
                .map(|u| store.resolve(&u.article_id, m, u.segment.as_deref(), options.source))
                .collect()
        })
        .collect();
    for i in 0..methods.len() {
        let present = resolved[i].iter().filter(|e| e.is_some()).count();
        matrix.set(i, i, (present > 0).then_some(1.0), present);
        for j in (i + 1)..methods.len() {
            let values: Vec<f64> = resolved[i]
                .iter()
                .zip(&resolved[j])
                .filter_map(|(a, b)| match (a, b) {
                    (Some(a), Some(b)) => evaluate(metric, a, b, k, options.basis).ok(),
                    _ => None,
                })
                .collect();
            matrix.set(i, j, mean(&values), values.len());
        }
    }
    matrix
}

/// Sequential mean; `None` for an empty slice.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(scores: &[f64]) -> Explanation {
        Explanation::new("a", MethodId::new("m").unwrap(), scores.to_vec())
    }

    #[test]
    fn top_features_by_magnitude() {
        assert_eq!(top_features(&e(&[0.9, -0.7, 0.1]), 2).unwrap().0, vec![0, 1]);
        assert_eq!(top_features(&e(&[0.5, 0.5]), 2).unwrap().0, vec![0, 1]);
        assert_eq!(
            top_features(&e(&[0.1]), 2),
            Err(AgreementError::KOutOfRange { k: 2, features: 1 })
        );
        assert_eq!(top_features(&e(&[0.3, -0.3, 0.1]), 3).unwrap().rank(1), Some(2));
    }

    #[test]
    fn feature_agreement_examples() {
        let a = e(&[0.9, 0.1, 0.5, 0.3]);
        assert_eq!(feature_agreement(&a, &a, 3).unwrap(), 1.0);
        assert_eq!(feature_agreement(&a, &e(&[0.8, 0.4, 0.7, 0.0]), 2).unwrap(), 1.0);
        assert_eq!(
            feature_agreement(&e(&[0.9, 0.1, 0.5]), &e(&[0.1, 0.9, 0.2]), 2).unwrap(),
            0.5
        );
        assert_eq!(
            feature_agreement(&e(&[0.9, 0.1]), &e(&[0.9, 0.1, 0.3]), 2),
            Err(AgreementError::LengthMismatch(2, 3))
        );
    }

    #[test]
    fn rank_agreement_examples() {
        let a = e(&[0.9, 0.5, 0.1]);
        assert_eq!(rank_agreement(&a, &a, 2).unwrap(), 1.0);
        assert_eq!(rank_agreement(&a, &e(&[0.9, 0.1, 0.5]), 2).unwrap(), 0.5);
        let b = e(&[0.5, 0.9, 0.1]);
        assert_eq!(rank_agreement(&a, &b, 2).unwrap(), 0.0);
        assert_eq!(feature_agreement(&a, &b, 2).unwrap(), 1.0);
    }

    #[test]
    fn spearman_examples() {
        let a = e(&[3.0, 1.0, 2.0]);
        assert_eq!(spearman_rank_correlation(&a, &a).unwrap(), 1.0);
        assert_eq!(spearman_rank_correlation(&a, &e(&[1.0, 3.0, 2.0])).unwrap(), -1.0);
        assert!((spearman_rank_correlation(&a, &e(&[3.0, 2.0, 1.0])).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(
            spearman_rank_correlation(&e(&[1.0]), &e(&[1.0])),
            Err(AgreementError::TooFewFeatures(1))
        );
        assert_eq!(
            spearman_rank_correlation(&e(&[2.0, -2.0, 2.0]), &a),
            Err(AgreementError::Undefined)
        );
    }

    #[test]
    fn fractional_ranks_average_ties() {
        assert_eq!(
            fractional_ranks(&[1.0, 3.0, 3.0, 0.5], RankBasis::Magnitude),
            vec![3.0, 1.5, 1.5, 4.0]
        );
        assert_eq!(fractional_ranks(&[-3.0, 2.0], RankBasis::Signed), vec![2.0, 1.0]);
        assert_eq!(fractional_ranks(&[-3.0, 2.0], RankBasis::Magnitude), vec![1.0, 2.0]);
    }

    #[test]
    fn pairwise_examples() {
        let a = e(&[0.9, 0.5, 0.1]);
        assert_eq!(pairwise_rank_agreement(&a, &a).unwrap(), 1.0);
        assert_eq!(pairwise_rank_agreement(&a, &e(&[0.1, 0.5, 0.9])).unwrap(), 0.0);
        assert!((pairwise_rank_agreement(&a, &e(&[0.8, 0.2, 0.4])).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            pairwise_rank_agreement(&e(&[1.0]), &e(&[1.0])),
            Err(AgreementError::TooFewFeatures(1))
        );
    }

    #[test]
    fn inversion_count_matches_naive() {
        let mut v = vec![3, 1, 4, 0, 2];
        let naive = (0..5)
            .flat_map(|i| (i + 1..5).map(move |j| (i, j)))
            .filter(|&(i, j)| v[i] > v[j])
            .count();
        assert_eq!(count_inversions(&mut v), naive);
        assert_eq!(v, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn metric_names_parse() {
        for m in MetricId::ALL {
            assert_eq!(m.short_name().parse::<MetricId>().unwrap(), m);
            assert_eq!(m.name().parse::<MetricId>().unwrap(), m);
        }
        assert!("sign".parse::<MetricId>().is_err());
    }
}
