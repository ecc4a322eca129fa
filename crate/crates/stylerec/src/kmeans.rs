//! Seeded Lloyd k-means and cluster purity, used for style-cluster export
//! and the synthetic-data checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Distance-weighted (k-means++) centroid seeding.
fn seed_centroids<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.gen_range(0..n)].clone()];
    let mut dists: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dists.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in dists.iter().enumerate() {
                u -= d;
                if u <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist(p, centroids.last().unwrap());
            if d < dists[i] {
                dists[i] = d;
            }
        }
    }
    centroids
}

/// Lloyd iterations with seeded k-means++ initialization. Returns the
/// cluster assignment per point. Empty clusters are reseeded to the point
/// farthest from its current centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, max_iters: usize, seed: u64) -> Vec<usize> {
    assert!(k >= 1);
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let dim = points[0].len();
    let k = k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut assign = vec![0usize; n];

    for _ in 0..max_iters {
        let mut changed = false;
        let mut dists = vec![0.0f64; n];
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            dists[i] = best_d;
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assign[i]] += 1;
            for (s, v) in sums[assign[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed from the worst-fit point
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].partial_cmp(&dists[b]).unwrap())
                    .unwrap();
                centroids[c] = points[far].clone();
                changed = true;
            } else {
                for (j, s) in sums[c].iter().enumerate() {
                    centroids[c][j] = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    assign
}

/// Run `kmeans` several times with derived seeds and keep the assignment
/// with the lowest within-cluster sum of squares.
pub fn kmeans_restarts(
    points: &[Vec<f64>],
    k: usize,
    max_iters: usize,
    restarts: usize,
    seed: u64,
) -> Vec<usize> {
    assert!(restarts >= 1);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 0..restarts {
        let assign = kmeans(points, k, max_iters, seed.wrapping_add(r as u64));
        let sse = within_cluster_sse(points, k, &assign);
        if best.as_ref().map_or(true, |(b, _)| sse < *b) {
            best = Some((sse, assign));
        }
    }
    best.expect("at least one restart").1
}

fn within_cluster_sse(points: &[Vec<f64>], k: usize, assign: &[usize]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assign) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    let centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| s.into_iter().map(|v| if c > 0 { v / c as f64 } else { 0.0 }).collect())
        .collect();
    points.iter().zip(assign).map(|(p, &a)| sq_dist(p, &centroids[a])).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fraction of points whose cluster's majority label matches their own.
pub fn purity(assignments: &[usize], labels: &[usize]) -> f64 {
    assert_eq!(assignments.len(), labels.len());
    if assignments.is_empty() {
        return 0.0;
    }
    let n_clusters = assignments.iter().max().unwrap() + 1;
    let n_labels = labels.iter().max().unwrap() + 1;
    let mut table = vec![vec![0usize; n_labels]; n_clusters];
    for (&a, &l) in assignments.iter().zip(labels) {
        table[a][l] += 1;
    }
    let correct: usize = table.iter().map(|row| row.iter().max().copied().unwrap_or(0)).sum();
    correct as f64 / assignments.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn one_cluster_assigns_all_to_zero() {
        let points = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![3.0, 3.0]];
        let assign = kmeans(&points, 1, 10, 0);
        assert!(assign.iter().all(|&a| a == 0));
    }

    #[test]
    fn recovers_well_separated_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3 {
            let center = c as f64 * 20.0;
            for _ in 0..30 {
                points.push(vec![center + rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]);
                labels.push(c);
            }
        }
        let assign = kmeans(&points, 3, 100, 7);
        assert!(purity(&assign, &labels) > 0.99);
    }

    #[test]
    fn same_seed_same_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let points: Vec<Vec<f64>> =
            (0..40).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let a = kmeans(&points, 5, 100, 11);
        let b = kmeans(&points, 5, 100, 11);
        assert_eq!(a, b);
    }

    #[test]
    fn purity_of_perfect_assignment_is_one() {
        let labels = vec![0, 0, 1, 1, 2];
        assert_eq!(purity(&labels, &labels), 1.0);
        assert!((purity(&[0, 0, 0, 0], &[0, 0, 1, 1]) - 0.5).abs() < 1e-12);
    }
}
