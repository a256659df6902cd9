//! Exhaustive reference implementations for cross-checking the runtime,
//! the data collector and the heuristics on small inputs.

pub mod dataset;
pub mod learning;
pub mod matching;
pub mod resolution;

/// Best total affinity over all `k^n` ways of giving each of `n` components
/// one of `k` instances, with the maximizing labels (first found in
/// lexicographic order).
pub fn best_partition(
    n: usize,
    k: usize,
    affinity: impl Fn(usize, usize) -> f64,
) -> (f64, Vec<usize>) {
    assert!(k > 0, "need at least one instance");
    let mut labels = vec![0; n];
    let mut best = (f64::NEG_INFINITY, labels.clone());
    loop {
        let score: f64 = labels
            .iter()
            .enumerate()
            .map(|(c, &i)| affinity(c, i))
            .sum();
        if score > best.0 {
            best = (score, labels.clone());
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

/// Smallest within-cluster sum of squares over every labeling of `points`
/// into exactly `k` non-empty clusters.
pub fn optimal_inertia(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    assert!(k >= 1 && k <= n, "need 1 <= k <= n");
    let dim = points[0].len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    // canonical labelings only: point i may open at most cluster max(previous)+1
    fn rec(
        i: usize,
        used: usize,
        k: usize,
        labels: &mut [usize],
        points: &[Vec<f64>],
        dim: usize,
        best: &mut f64,
    ) {
        if i == labels.len() {
            if used == k {
                let mut sum = vec![vec![0.0; dim]; k];
                let mut count = vec![0usize; k];
                for (p, &l) in points.iter().zip(labels.iter()) {
                    count[l] += 1;
                    for (s, x) in sum[l].iter_mut().zip(p) {
                        *s += x;
                    }
                }
                let inertia: f64 = points
                    .iter()
                    .zip(labels.iter())
                    .map(|(p, &l)| {
                        p.iter()
                            .zip(&sum[l])
                            .map(|(x, s)| {
                                let d = x - s / count[l] as f64;
                                d * d
                            })
                            .sum::<f64>()
                    })
                    .sum();
                *best = best.min(inertia);
            }
            return;
        }
        if k - used > labels.len() - i {
            return;
        }
        for l in 0..(used + 1).min(k) {
            labels[i] = l;
            rec(i + 1, used.max(l + 1), k, labels, points, dim, best);
        }
    }
    rec(0, 0, k, &mut labels, points, dim, &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_on_a_line() {
        let pos = [1.0, 2.0, 8.0, 9.0];
        let centers: [f64; 2] = [0.0, 10.0];
        let (_, labels) = best_partition(4, 2, |c, i| -(pos[c] - centers[i]).abs());
        assert_eq!(labels, vec![0, 0, 1, 1]);
    }

    #[test]
    fn two_points_two_clusters() {
        assert_eq!(optimal_inertia(&[vec![0.0], vec![4.0]], 2), 0.0);
        assert_eq!(optimal_inertia(&[vec![0.0], vec![4.0]], 1), 8.0);
    }
}
