//! Spherical k-means: k-means on the unit sphere with cosine similarity.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::vector::{dot, normalized};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalKMeans {
    pub k: usize,
    pub n_init: usize,
    pub max_iters: usize,
}

impl Default for SphericalKMeans {
    fn default() -> Self {
        SphericalKMeans {
            k: 2,
            n_init: 10,
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Sum of cosine similarities of points to their centroids.
    pub objective: f64,
    /// Objective after every centroid update of the winning run.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Index of the centroid most similar to `v`; ties go to the lowest index.
pub fn nearest_centroid(centroids: &[Vec<f64>], v: &[f64]) -> usize {
    crate::probmatrix::nearest(centroids, v)
}

impl SphericalKMeans {
    /// Clusters unit vectors into `min(k, points.len())` groups.
    pub fn fit(&self, points: &[Vec<f64>], rng: &mut ChaCha8Rng) -> KMeansFit {
        assert!(!points.is_empty(), "spherical k-means needs points");
        let k = self.k.clamp(1, points.len());
        let mut best: Option<KMeansFit> = None;
        for _ in 0..self.n_init.max(1) {
            let fit = self.run(points, k, rng);
            if best.as_ref().is_none_or(|b| fit.objective > b.objective) {
                best = Some(fit);
            }
        }
        best.expect("at least one run")
    }

    fn run(&self, points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> KMeansFit {
        let mut centroids = seed_plus_plus(points, k, rng);
        let mut labels: Vec<usize> = vec![usize::MAX; points.len()];
        let mut history = Vec::new();
        let mut converged = false;
        for _ in 0..self.max_iters.max(1) {
            let mut next: Vec<usize> = points.iter().map(|p| nearest_centroid(&centroids, p)).collect();
            fill_empty_clusters(points, &centroids, &mut next, k);
            if next == labels {
                converged = true;
                break;
            }
            labels = next;
            centroids = update_centroids(points, &labels, k, &centroids);
            history.push(objective(points, &labels, &centroids));
        }
        let objective = objective(points, &labels, &centroids);
        KMeansFit {
            centroids,
            labels,
            objective,
            history,
            converged,
        }
    }
}

pub fn objective(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| dot(p, &centroids[l])).sum()
}

fn seed_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut chosen = vec![rng.gen_range(0..points.len())];
    while chosen.len() < k {
        let weights: Vec<f64> = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if chosen.contains(&i) {
                    return 0.0;
                }
                let sim = chosen.iter().map(|&c| dot(p, &points[c])).fold(f64::NEG_INFINITY, f64::max);
                (1.0 - sim).max(0.0).powi(2)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = weights.iter().rposition(|&w| w > 0.0).expect("positive weight");
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            let free: Vec<usize> = (0..points.len()).filter(|i| !chosen.contains(i)).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(next);
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Moves the worst-fitting points of multi-member clusters into empty ones.
fn fill_empty_clusters(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = (0..points.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .min_by(|&a, &b| {
                dot(&points[a], &centroids[labels[a]])
                    .total_cmp(&dot(&points[b], &centroids[labels[b]]))
            });
        match donor {
            Some(i) => labels[i] = empty,
            None => return,
        }
    }
}

fn update_centroids(points: &[Vec<f64>], labels: &[usize], k: usize, previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    for (p, &l) in points.iter().zip(labels) {
        for (s, x) in sums[l].iter_mut().zip(p) {
            *s += x;
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(c, s)| normalized(&s).unwrap_or_else(|| previous[c].clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn unit(v: &[f64]) -> Vec<f64> {
        normalized(v).unwrap()
    }

    #[test]
    fn separates_two_directions() {
        let pts: Vec<Vec<f64>> = [
            [1.0, 0.1, 0.0],
            [0.9, 0.0, 0.1],
            [1.0, 0.05, 0.05],
            [0.0, 1.0, 0.1],
            [0.1, 0.9, 0.0],
        ]
        .iter()
        .map(|p| unit(p))
        .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fit = SphericalKMeans::default().fit(&pts, &mut rng);
        assert_eq!(fit.labels[0], fit.labels[1]);
        assert_eq!(fit.labels[0], fit.labels[2]);
        assert_eq!(fit.labels[3], fit.labels[4]);
        assert_ne!(fit.labels[0], fit.labels[3]);
        for c in &fit.centroids {
            assert!((crate::vector::norm(c) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_cluster_centroid_is_normalized_mean() {
        let pts = vec![unit(&[1.0, 0.0]), unit(&[0.0, 1.0])];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fit = SphericalKMeans { k: 1, ..Default::default() }.fit(&pts, &mut rng);
        let s = 0.5f64.sqrt();
        assert!((fit.centroids[0][0] - s).abs() < 1e-12);
        assert!((fit.centroids[0][1] - s).abs() < 1e-12);
    }

    #[test]
    fn empty_clusters_are_refilled() {
        let pts = vec![unit(&[1.0, 0.0]), unit(&[1.0, 0.001]), unit(&[1.0, 0.002])];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fit = SphericalKMeans { k: 3, ..Default::default() }.fit(&pts, &mut rng);
        let mut l = fit.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2]);
    }
}
