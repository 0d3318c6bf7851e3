//! Lloyd iterations over plain point sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ClusterError, Init, KMeansConfig};

/// Outcome of fitting raw points; [`super::kmeans_fit`] wraps this in a model.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFit {
    pub centroids: Vec<Vec<f64>>,
    /// Nearest-centroid label of every input point under the final centroids.
    pub labels: Vec<usize>,
    pub wcss: f64,
    pub iterations_run: usize,
    pub converged: bool,
    /// Seed of the restart that produced this fit.
    pub seed_used: u64,
    pub restart: usize,
    /// WCSS after every assignment+update iteration, then the final
    /// nearest-centroid WCSS. Non-increasing up to rounding.
    pub wcss_trace: Vec<f64>,
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid; ties go to the lowest index.
pub fn nearest(centroids: &[Vec<f64>], point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(c, point);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Sum of squared distances from each point to its nearest centroid.
pub fn wcss_points(centroids: &[Vec<f64>], points: &[Vec<f64>]) -> f64 {
    points.iter().map(|p| nearest(centroids, p).1).sum()
}

pub(crate) fn validate_points(points: &[Vec<f64>], k: usize) -> Result<usize, ClusterError> {
    if points.len() < k {
        return Err(ClusterError::TooFewPoints { n: points.len(), k });
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(ClusterError::MixedLayouts);
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ClusterError::NonFiniteInput);
    }
    Ok(dim)
}

/// Best of `config.restarts` seeded Lloyd runs, lowest WCSS winning and
/// ties going to the lowest restart index. Restart `r` is seeded with
/// `config.seed + r` (wrapping).
pub fn fit_points(points: &[Vec<f64>], config: &KMeansConfig) -> Result<PointFit, ClusterError> {
    config.validate()?;
    validate_points(points, config.k)?;
    let fits: Vec<PointFit> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut fit = lloyd_run(points, config, config.seed.wrapping_add(r as u64));
            fit.restart = r;
            fit
        })
        .collect();
    let best = fits
        .into_iter()
        .reduce(|best, f| if f.wcss.total_cmp(&best.wcss).is_lt() { f } else { best })
        .expect("restarts >= 1");
    Ok(best)
}

/// One Lloyd run from a seeded initialization. Inputs must already be validated.
pub fn lloyd_run(points: &[Vec<f64>], config: &KMeansConfig, seed: u64) -> PointFit {
    let k = config.k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = match config.init {
        Init::RandomPoints => init_random_points(points, k, &mut rng),
        Init::KMeansPlusPlus => init_kmeanspp(points, k, &mut rng),
    };

    let mut labels = vec![0usize; points.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        for (label, p) in labels.iter_mut().zip(points) {
            *label = nearest(&centroids, p).0;
        }
        repair_empty_clusters(points, &centroids, &mut labels, k);
        let updated = cluster_means(points, &labels, k, points[0].len());

        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        trace.push(labels.iter().zip(points).map(|(&l, p)| squared_distance(&centroids[l], p)).sum());

        if shift <= config.tolerance {
            converged = true;
            break;
        }
    }

    for (label, p) in labels.iter_mut().zip(points) {
        *label = nearest(&centroids, p).0;
    }
    let wcss = wcss_points(&centroids, points);
    trace.push(wcss);

    PointFit {
        centroids,
        labels,
        wcss,
        iterations_run: iterations,
        converged,
        seed_used: seed,
        restart: 0,
        wcss_trace: trace,
    }
}

fn init_random_points(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    rand::seq::index::sample(rng, points.len(), k).into_iter().map(|i| points[i].clone()).collect()
}

/// D² sampling. When every remaining point coincides with a chosen centroid,
/// the next centroid is drawn uniformly from the points not yet chosen.
fn init_kmeanspp(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &points[first])).collect();

    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave `target` just past the running sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive weight"))
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Moves each empty cluster onto the point farthest from its current
/// centroid, taking donors only from clusters with at least two members.
fn repair_empty_clusters(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize], k: usize) {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let donor = (0..points.len())
            .filter(|&i| sizes[labels[i]] >= 2)
            .map(|i| (i, squared_distance(&points[i], &centroids[labels[i]])))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        if let Some((i, _)) = donor {
            sizes[labels[i]] -= 1;
            labels[i] = empty;
            sizes[empty] = 1;
        }
    }
}

fn cluster_means(points: &[Vec<f64>], labels: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize) -> KMeansConfig {
        KMeansConfig { k, ..KMeansConfig::default() }
    }

    #[test]
    fn nearest_breaks_ties_low() {
        let c = vec![vec![-1.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(nearest(&c, &[0.0, 0.0]).0, 0);
        assert_eq!(nearest(&c, &[0.5, 0.0]).0, 1);
    }

    #[test]
    fn repair_takes_farthest_point() {
        let points = vec![vec![0.0], vec![1.0], vec![10.0]];
        let centroids = vec![vec![0.0], vec![100.0]];
        let mut labels = vec![0, 0, 0];
        repair_empty_clusters(&points, &centroids, &mut labels, 2);
        assert_eq!(labels, vec![0, 0, 1]);
    }

    #[test]
    fn duplicate_points_with_spare_cluster() {
        let points = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![4.0, 4.0], vec![4.0, 4.0]];
        let fit = fit_points(&points, &cfg(3)).unwrap();
        assert_eq!(fit.centroids.len(), 3);
        assert_eq!(fit.wcss, 0.0);
        assert!(fit.centroids.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn kmeanspp_picks_distinct_points_on_duplicates() {
        let points = vec![vec![1.0]; 5];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = init_kmeanspp(&points, 3, &mut rng);
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn trace_is_non_increasing() {
        let points: Vec<Vec<f64>> = (0..40).map(|i| vec![(i * 7 % 13) as f64, (i * 5 % 11) as f64]).collect();
        let fit = lloyd_run(&points, &KMeansConfig { init: Init::RandomPoints, ..cfg(4) }, 11);
        for w in fit.wcss_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12);
        }
    }
}
