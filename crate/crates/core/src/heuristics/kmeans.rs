//! Lloyd's k-means with seeded initialization.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::HeuristicsError;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each assignment step, first entry from the initial centroids.
    pub history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (p, label) in points.iter().zip(labels.iter_mut()) {
        let (best, d) = centroids
            .iter()
            .enumerate()
            .map(|(j, c)| (j, sq_dist(p, c)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("k >= 1");
        *label = best;
        inertia += d;
    }
    inertia
}

/// Clusters `points` into `k` groups.
///
/// Initial centroids are `k` distinct points drawn uniformly with `seed`.
/// Iteration stops once no centroid moves by `tol` or more (Euclidean), or
/// after `max_iters` updates. A cluster that empties is re-seeded with the
/// point farthest from its current centroid.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<KMeans, HeuristicsError> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(HeuristicsError::InvalidK { k, n });
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(HeuristicsError::RaggedPoints);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = sample(&mut rng, n, k).into_vec();
    init.sort_unstable();
    let mut centroids: Vec<Vec<f64>> = init.iter().map(|&i| points[i].clone()).collect();
    let mut labels = vec![0; n];
    let mut inertia = assign(points, &centroids, &mut labels);
    let mut history = vec![inertia];
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut shift: f64 = 0.0;
        let mut next = centroids.clone();
        for j in 0..k {
            if counts[j] > 0 {
                next[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &next[labels[a]])
                            .total_cmp(&sq_dist(&points[b], &next[labels[b]]))
                    })
                    .expect("n >= 1");
                next[j] = points[far].clone();
                labels[far] = j;
            }
        }
        for j in 0..k {
            shift = shift.max(sq_dist(&centroids[j], &next[j]).sqrt());
        }
        centroids = next;
        inertia = assign(points, &centroids, &mut labels);
        history.push(inertia);
        if shift < tol {
            break;
        }
    }

    Ok(KMeans {
        centroids,
        labels,
        inertia,
        history,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_equal_n_has_zero_inertia() {
        let pts = vec![vec![0.0, 1.0], vec![5.0, 5.0], vec![-3.0, 2.0]];
        let r = kmeans(&pts, 3, 1, 100, 1e-9).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut cs = r.centroids.clone();
        cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(cs, vec![vec![-3.0, 2.0], vec![0.0, 1.0], vec![5.0, 5.0]]);
    }

    #[test]
    fn identical_points_have_zero_inertia() {
        let pts = vec![vec![2.0, 2.0]; 6];
        for k in 1..=6 {
            assert_eq!(kmeans(&pts, k, 3, 50, 1e-9).unwrap().inertia, 0.0);
        }
    }

    #[test]
    fn k_larger_than_n_is_an_error() {
        let pts = vec![vec![0.0]; 2];
        assert_eq!(
            kmeans(&pts, 3, 0, 10, 1e-6),
            Err(HeuristicsError::InvalidK { k: 3, n: 2 })
        );
    }
}
