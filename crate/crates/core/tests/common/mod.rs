//! Brute-force oracles and fixture builders shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xdis_core::attribution::{AttributionStore, Explanation, MethodId};
use xdis_core::corpus::{CleanArticle, RawArticle};
use xdis_core::segmentation::EmbeddingSet;

pub fn m(name: &str) -> MethodId {
    MethodId::new(name).unwrap()
}

pub fn expl(scores: &[f64]) -> Explanation {
    Explanation::new("t", m("x"), scores.to_vec())
}

/// Feature i is ranked ahead of j: larger magnitude, lower index on ties.
pub fn beats(s: &[f64], i: usize, j: usize) -> bool {
    let (a, b) = (s[i].abs(), s[j].abs());
    a > b || (a == b && i < j)
}

/// The top-k set found by enumerating every k-subset and keeping the one
/// whose members all beat all non-members.
pub fn oracle_top_set(s: &[f64], k: usize) -> Vec<usize> {
    let n = s.len();
    let mut found = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let inside: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let outside: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 0).collect();
        if inside.iter().all(|&i| outside.iter().all(|&j| beats(s, i, j))) {
            found.push(inside);
        }
    }
    assert_eq!(found.len(), 1, "top-k set must be unique");
    found.pop().unwrap()
}

/// Members of `set` in rank order: position p holds the member beaten by
/// exactly p others.
pub fn oracle_order(s: &[f64], set: &[usize]) -> Vec<usize> {
    let mut out = vec![usize::MAX; set.len()];
    for &i in set {
        let p = set.iter().filter(|&&j| j != i && beats(s, j, i)).count();
        out[p] = i;
    }
    out
}

pub fn oracle_fa(a: &[f64], b: &[f64], k: usize) -> f64 {
    let (sa, sb) = (oracle_top_set(a, k), oracle_top_set(b, k));
    sa.iter().filter(|i| sb.contains(i)).count() as f64 / k as f64
}

pub fn oracle_ra(a: &[f64], b: &[f64], k: usize) -> f64 {
    let oa = oracle_order(a, &oracle_top_set(a, k));
    let ob = oracle_order(b, &oracle_top_set(b, k));
    oa.iter().zip(&ob).filter(|(x, y)| x == y).count() as f64 / k as f64
}

pub fn oracle_pra(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut agree = 0;
    let mut total = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += 1;
            if beats(a, i, j) == beats(b, i, j) {
                agree += 1;
            }
        }
    }
    agree as f64 / total as f64
}

/// 1 + (number strictly ahead) + (number tied, excluding self) / 2.
pub fn oracle_ranks(s: &[f64]) -> Vec<f64> {
    (0..s.len())
        .map(|i| {
            let ahead = s.iter().filter(|x| x.abs() > s[i].abs()).count();
            let tied = s.iter().filter(|x| x.abs() == s[i].abs()).count() - 1;
            1.0 + ahead as f64 + tied as f64 / 2.0
        })
        .collect()
}

/// Pearson correlation of the fractional ranks; `None` when either side is
/// constant.
pub fn oracle_spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ra, rb) = (oracle_ranks(a), oracle_ranks(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va.sqrt() * vb.sqrt()))
}

/// 1 − 6 Σd² / (n(n² − 1)); valid only without ties.
pub fn closed_form_spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (oracle_ranks(a), oracle_ranks(b));
    let n = ra.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

pub fn has_magnitude_ties(s: &[f64]) -> bool {
    (0..s.len()).any(|i| ((i + 1)..s.len()).any(|j| s[i].abs() == s[j].abs()))
}

/// Scores of length n drawn from one of several shapes: continuous values,
/// small integers (ties and zeros), or signed copies of a few magnitudes.
pub fn random_scores(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    match rng.gen_range(0..3) {
        0 => (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        1 => (0..n).map(|_| rng.gen_range(-3i32..=3) as f64).collect(),
        _ => {
            let pool: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..2.0)).collect();
            (0..n)
                .map(|_| {
                    let v = pool[rng.gen_range(0..pool.len())];
                    if rng.gen_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect()
        }
    }
}

pub fn article(id: &str, sentences: &[String]) -> CleanArticle {
    let a = CleanArticle::from_raw(&RawArticle {
        id: id.into(),
        text: sentences.join(" "),
    });
    assert_eq!(
        a.sentence_count(),
        sentences.len(),
        "fixture sentences must split cleanly"
    );
    a
}

/// `n` distinct period-terminated sentences.
pub fn sentences(tag: &str, n: usize) -> Vec<String> {
    (0..n)
        .map(|i| format!("Item {tag} number {i} says something."))
        .collect()
}

/// Points around `centers`, `per` each, with Gaussian noise of std `sigma`
/// (Box-Muller on a seeded generator). Returns points and planted labels.
pub fn gaussian_blobs(
    rng: &mut ChaCha8Rng,
    centers: &[Vec<f64>],
    per: usize,
    sigma: f64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per {
            pts.push(center.iter().map(|x| x + sigma * gaussian(rng)).collect());
            labels.push(c);
        }
    }
    (pts, labels)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn unit(dim: usize, axis: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[axis] = 1.0;
    v
}

/// Two methods over articles whose sentences fall into two planted topics.
/// Both methods share the within-topic order, but each puts a different
/// topic on top, so their article-level top sets diverge while every
/// topic's top sets coincide.
pub struct RegionalFixture {
    pub corpus: Vec<CleanArticle>,
    pub sliced: AttributionStore,
    pub native: AttributionStore,
    pub embeddings: BTreeMap<String, EmbeddingSet>,
    pub planted: BTreeMap<String, Vec<Vec<usize>>>,
    pub scores: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

pub const FIXTURE_DIM: usize = 16;

pub fn regional_fixture(seed: u64, articles: usize) -> RegionalFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Vec::new();
    let mut embeddings = BTreeMap::new();
    let mut planted = BTreeMap::new();
    let mut scores = BTreeMap::new();
    for a in 0..articles {
        let id = format!("art{a:02}");
        let n = rng.gen_range(8..=12);
        let mut topic: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
        topic.shuffle(&mut rng);
        let mut groups: Vec<Vec<usize>> = (0..2).map(|t| (0..n).filter(|&i| topic[i] == t).collect()).collect();
        groups.sort();

        let axes = [
            rng.gen_range(0..FIXTURE_DIM / 2),
            FIXTURE_DIM / 2 + rng.gen_range(0..FIXTURE_DIM / 2),
        ];
        let vectors: Vec<Vec<f64>> = topic
            .iter()
            .map(|&t| {
                unit(FIXTURE_DIM, axes[t])
                    .into_iter()
                    .map(|x| x + 0.01 * gaussian(&mut rng))
                    .collect()
            })
            .collect();
        embeddings.insert(id.clone(), EmbeddingSet::new(id.clone(), vectors).unwrap());

        // shared within-topic magnitudes; the favoured topic gets the high band
        let favoured = rng.gen_range(0..2);
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        for t in 0..2 {
            let members: Vec<usize> = (0..n).filter(|&i| topic[i] == t).collect();
            let mut mags: Vec<f64> = members.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
            mags.sort_by(|p, q| q.total_cmp(p));
            let mut order = members.clone();
            order.shuffle(&mut rng);
            for (&i, &mag) in order.iter().zip(&mags) {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                x[i] = sign * (mag + if t == favoured { 1.0 } else { 0.0 });
                y[i] = sign * (mag + if t == favoured { 0.0 } else { 1.0 });
            }
        }

        let texts: Vec<String> = topic
            .iter()
            .enumerate()
            .map(|(i, t)| format!("Paragraph {i} covers topic {t} in {id}."))
            .collect();
        corpus.push(article(&id, &texts));
        planted.insert(id.clone(), groups);
        scores.insert(id, (x, y));
    }

    let mut sliced = AttributionStore::new(&corpus);
    let mut native = AttributionStore::new(&corpus);
    for (id, (x, y)) in &scores {
        for (name, s) in [("x", x), ("y", y)] {
            sliced.insert(Explanation::new(id.clone(), m(name), s.clone())).unwrap();
            native.insert(Explanation::new(id.clone(), m(name), s.clone())).unwrap();
            for seg in &planted[id] {
                let part: Vec<f64> = seg.iter().map(|&i| s[i]).collect();
                native
                    .insert_segment(seg.clone(), Explanation::new(id.clone(), m(name), part))
                    .unwrap();
            }
        }
    }
    RegionalFixture {
        corpus,
        sliced,
        native,
        embeddings,
        planted,
        scores,
    }
}

/// Corpus-level oracle means of feature agreement at k over whole articles
/// and over the planted segments.
pub fn fixture_oracle_fa(f: &RegionalFixture, k: usize) -> (f64, f64) {
    let mut global = Vec::new();
    let mut regional = Vec::new();
    for a in &f.corpus {
        let (x, y) = &f.scores[&a.id];
        global.push(oracle_fa(x, y, k));
        let per_seg: Vec<f64> = f.planted[&a.id]
            .iter()
            .map(|seg| {
                let xs: Vec<f64> = seg.iter().map(|&i| x[i]).collect();
                let ys: Vec<f64> = seg.iter().map(|&i| y[i]).collect();
                oracle_fa(&xs, &ys, k)
            })
            .collect();
        regional.push(per_seg.iter().sum::<f64>() / per_seg.len() as f64);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (mean(&global), mean(&regional))
}

/// A corpus of assorted lengths (1 to 9 sentences) with three methods and
/// random scores; one (article, method) pair is left out.
pub fn random_corpus(seed: u64, articles: usize) -> (Vec<CleanArticle>, AttributionStore) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus: Vec<CleanArticle> = (0..articles)
        .map(|i| {
            let id = format!("doc{i}");
            let n = rng.gen_range(1..=9);
            article(&id, &sentences(&id, n))
        })
        .collect();
    let mut store = AttributionStore::new(&corpus);
    for (ai, a) in corpus.iter().enumerate() {
        for name in ["attention", "lime", "deeplift"] {
            if ai == 1 && name == "lime" {
                continue;
            }
            let s = random_scores(&mut rng, a.sentence_count());
            store.insert(Explanation::new(a.id.clone(), m(name), s)).unwrap();
        }
    }
    (corpus, store)
}
