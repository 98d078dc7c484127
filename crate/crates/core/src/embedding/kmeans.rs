use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EmbeddingVector;

pub const DEFAULT_SEED: u64 = 42;
const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster index per input vector, in input order.
    pub cluster_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl ClusterAssignment {
    pub fn cluster(&self, index: usize) -> usize {
        self.cluster_of[index]
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.cluster_of
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == cluster)
            .map(|(i, _)| i)
    }
}

/// `max(2, round(sqrt(n / 2)))`, clamped to `n`.
pub fn default_cluster_count(n: usize) -> usize {
    let k = ((n as f64 / 2.0).sqrt().round() as usize).max(2);
    k.min(n)
}

fn distance2(a: &[f64], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - f64::from(y);
            d * d
        })
        .sum()
}

fn nearest(centroids: &[Vec<f64>], v: &[f32]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = distance2(c, v);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Seeded k-means++ followed by Lloyd iterations until assignments stop
/// changing. Ties go to the lowest cluster index; `k` is clamped to
/// `1..=vectors.len()`.
pub fn cluster_entities(vectors: &[EmbeddingVector], k: usize, seed: u64) -> ClusterAssignment {
    let n = vectors.len();
    if n == 0 {
        return ClusterAssignment {
            cluster_of: Vec::new(),
            k: 0,
            seed,
        };
    }
    let k = k.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let to_f64 = |v: &EmbeddingVector| v.values().iter().map(|&x| f64::from(x)).collect::<Vec<_>>();

    let mut centroids = vec![to_f64(&vectors[rng.gen_range(0..n)])];
    let mut closest: Vec<f64> = vectors.iter().map(|v| distance2(&centroids[0], v.values())).collect();
    while centroids.len() < k {
        let total: f64 = closest.iter().sum();
        let pick = if total <= 0.0 {
            // All remaining points coincide with a centroid.
            rng.gen_range(0..n)
        } else {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                if r < d {
                    chosen = i;
                    break;
                }
                r -= d;
            }
            chosen
        };
        let c = to_f64(&vectors[pick]);
        for (slot, v) in closest.iter_mut().zip(vectors) {
            *slot = slot.min(distance2(&c, v.values()));
        }
        centroids.push(c);
    }

    let mut assignment: Vec<usize> = vectors.iter().map(|v| nearest(&centroids, v.values())).collect();
    for _ in 0..MAX_ITERATIONS {
        let dim = centroids[0].len();
        let mut sums = vec![vec![0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (v, &c) in vectors.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, &x) in sums[c].iter_mut().zip(v.values()) {
                *s += f64::from(x);
            }
        }
        for c in 0..k {
            // Empty clusters keep their previous centroid.
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<usize> = vectors.iter().map(|v| nearest(&centroids, v.values())).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    ClusterAssignment {
        cluster_of: assignment,
        k,
        seed,
    }
}
