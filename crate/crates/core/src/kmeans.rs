//! Lloyd's k-means with k-means++ seeding, plus the silhouette coefficient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const MAX_ITERATIONS: usize = 300;
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wcss: f64,
}

impl ClusterAssignment {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// One restart: the final assignment and the WCSS after every iteration.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub assignment: ClusterAssignment,
    pub wcss_trace: Vec<f64>,
    pub iterations: usize,
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

pub fn centroid_of<'a>(members: impl IntoIterator<Item = &'a Vec<f64>>, dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for p in members {
        for (s, x) in sum.iter_mut().zip(p) {
            *s += x;
        }
        n += 1;
    }
    if n > 0 {
        for s in &mut sum {
            *s /= n as f64;
        }
    }
    sum
}

pub fn wcss(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| squared_distance(p, &centroids[l]))
        .sum()
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && r < w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            // guard against rounding leaving r just past the last positive weight
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

/// A single Lloyd run from k-means++ seeds. Stops when assignments repeat or
/// after [`MAX_ITERATIONS`]. An empty cluster takes over the point farthest
/// from its centroid among clusters that can spare one.
pub fn lloyd(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> LloydRun {
    let dim = points[0].len();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut labels: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut next = Vec::with_capacity(points.len());
        let mut dist = Vec::with_capacity(points.len());
        for p in points {
            let (c, d) = nearest(p, &centroids);
            next.push(c);
            dist.push(d);
        }

        let mut sizes = vec![0usize; k];
        for &l in &next {
            sizes[l] += 1;
        }
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let donor = (0..points.len())
                .filter(|&i| sizes[next[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .expect("k <= n leaves a cluster with two members");
            sizes[next[donor]] -= 1;
            sizes[empty] = 1;
            next[donor] = empty;
            dist[donor] = 0.0;
            centroids[empty] = points[donor].clone();
        }

        for (c, centroid) in centroids.iter_mut().enumerate() {
            *centroid = centroid_of(points.iter().zip(&next).filter(|(_, &l)| l == c).map(|(p, _)| p), dim);
        }
        trace.push(wcss(points, &next, &centroids));

        let converged = next == labels;
        labels = next;
        if converged {
            break;
        }
    }

    let w = *trace.last().unwrap_or(&0.0);
    LloydRun {
        assignment: ClusterAssignment {
            k,
            labels,
            centroids,
            wcss: w,
        },
        wcss_trace: trace,
        iterations,
    }
}

/// Best of `restarts` Lloyd runs by WCSS. Restart `r` is seeded with
/// `seed + r`, so results depend only on `(points, k, seed, restarts)`.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Vec<LloydRun> {
    (0..restarts.max(1))
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            lloyd(points, k, &mut rng)
        })
        .collect()
}

pub fn best_run(runs: Vec<LloydRun>) -> ClusterAssignment {
    let mut best: Option<LloydRun> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.assignment.wcss < b.assignment.wcss) {
            best = Some(run);
        }
    }
    best.expect("at least one restart").assignment
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Mean silhouette coefficient with Euclidean distance. Points in singleton
/// clusters, and points whose a and b are both zero, score 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let n = points.len();
    if n == 0 {
        return 0.0;
    }
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        if sizes[own] <= 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += distance(&points[i], &points[j]);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 && b.is_finite() {
            total += (b - a) / denom;
        }
    }
    (total / n as f64).clamp(-1.0, 1.0)
}
