//! Lloyd's k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TopicError;
use crate::memory::{mean_vector, squared_distance};

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// Cluster index for every input point.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Inertia (sum of squared distances to the assigned centroid) after
    /// every Lloyd iteration.
    pub inertia_history: Vec<f64>,
}

impl KMeans {
    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

/// Number of topics for a memory of `n_samples` events:
/// `max(2, min(floor(n / 5), 50))`.
pub fn cluster_count(n_samples: usize) -> Result<usize, TopicError> {
    if n_samples == 0 {
        return Err(TopicError::EmptyInput);
    }
    Ok((n_samples / 5).min(50).max(2))
}

fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &points[chosen[0]]))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if *w > 0.0 && acc >= target {
                    pick = Some(i);
                    break;
                }
            }
            // float round-off can leave `acc` a hair below `target`
            pick.unwrap_or_else(|| d2.iter().rposition(|w| *w > 0.0).unwrap())
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(p, &points[next]));
        }
    }
    chosen
}

fn nearest(point: &[f64], centroids: &[Vec<f64>], current: Option<usize>) -> usize {
    let mut best = current.unwrap_or(0);
    let mut best_d = squared_distance(point, &centroids[best]);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(point, centroid);
        // strict improvement only: ties keep the current (or lowest) cluster
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Partitions `points` into `k` non-empty clusters. Deterministic for a
/// fixed `seed`.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans, TopicError> {
    let n = points.len();
    if k == 0 {
        return Err(TopicError::InvalidK(k));
    }
    if k > n {
        return Err(TopicError::TooFewPoints { k, n });
    }
    let dim = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(TopicError::Dimension {
            expected: dim,
            got: bad.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = seed_centroids(points, k, &mut rng)
        .into_iter()
        .map(|i| points[i].clone())
        .collect();
    let mut assignments: Vec<Option<usize>> = vec![None; n];
    let mut inertia_history = Vec::new();

    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let c = nearest(p, &centroids, assignments[i]);
            if assignments[i] != Some(c) {
                assignments[i] = Some(c);
                changed = true;
            }
        }

        let mut sizes = vec![0usize; k];
        for a in assignments.iter().flatten() {
            sizes[*a] += 1;
        }
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            // move the point farthest from its centroid into the empty cluster
            let far = (0..n)
                .filter(|&i| sizes[assignments[i].unwrap()] > 1)
                .map(|i| (i, squared_distance(&points[i], &centroids[assignments[i].unwrap()])))
                .fold(None::<(usize, f64)>, |best, (i, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                })
                .map(|(i, _)| i)
                .expect("k <= n guarantees a cluster with a spare point");
            sizes[assignments[far].unwrap()] -= 1;
            assignments[far] = Some(empty);
            sizes[empty] = 1;
            centroids[empty] = points[far].clone();
            changed = true;
        }

        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members = points
                .iter()
                .zip(&assignments)
                .filter(|(_, a)| **a == Some(c))
                .map(|(p, _)| p.as_slice());
            if let Some(mean) = mean_vector(members) {
                *centroid = mean;
            }
        }

        let inertia = points
            .iter()
            .zip(&assignments)
            .map(|(p, a)| squared_distance(p, &centroids[a.unwrap()]))
            .sum();
        inertia_history.push(inertia);

        if !changed {
            break;
        }
    }

    Ok(KMeans {
        assignments: assignments.into_iter().map(Option::unwrap).collect(),
        centroids,
        inertia_history,
    })
}
