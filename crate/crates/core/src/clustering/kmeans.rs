// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ClusterError, ClusteringResult, KMeansConfig};
use crate::features::{squared_euclidean, FeatureMatrix, FeatureVector};

struct Fit {
    labels: Vec<usize>,
    centers: Vec<Vec<f64>>,
    inertia: f64,
    iterations: usize,
    history: Vec<f64>,
}

/// Lloyd's algorithm from `cfg.restarts` k-means++ starts. Restart `r` is
/// seeded with `cfg.seed + r`; the lowest inertia wins, ties going to the
/// lower restart index. Restarts run in parallel but each is sequential, so
/// the result is the same on any number of threads.
pub fn kmeans_fit(m: &FeatureMatrix, cfg: &KMeansConfig) -> Result<ClusteringResult, ClusterError> {
    let n = m.n_samples();
    if n == 0 || m.width() == 0 {
        return Err(ClusterError::EmptyMatrix);
    }
    if cfg.k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if cfg.k > n {
        return Err(ClusterError::KTooLarge { k: cfg.k, n });
    }
    let restarts = cfg.restarts.max(1);
    let fits: Vec<Fit> = (0..restarts)
        .into_par_iter()
        .map(|r| fit_once(m, cfg, cfg.seed.wrapping_add(r as u64)))
        .collect();
    let (restart, best) = fits
        .into_iter()
        .enumerate()
        .reduce(|a, b| if b.1.inertia < a.1.inertia { b } else { a })
        .expect("at least one restart");
    let scheme = m.scheme();
    Ok(ClusteringResult {
        labels: best.labels,
        centroids: best
            .centers
            .into_iter()
            .map(|c| FeatureVector::new(scheme, c).expect("finite centroid"))
            .collect(),
        inertia: best.inertia,
        iterations_run: best.iterations,
        inertia_history: best.history,
        restart,
    })
}

fn fit_once(m: &FeatureMatrix, cfg: &KMeansConfig, seed: u64) -> Fit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_plus_plus(m, cfg.k, &mut rng);
    let mut labels = assign(m, &centers);
    fill_empty(m, &centers, &mut labels, cfg.k);
    let mut history = Vec::new();
    let mut inertia = 0.0;
    let mut iterations = 0;
    for it in 1..=cfg.max_iterations.max(1) {
        let means = cluster_means(m, &labels, cfg.k);
        let shift = centers
            .iter()
            .zip(&means)
            .map(|(a, b)| squared_euclidean(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = means;
        inertia = sse(m, &labels, &centers);
        history.push(inertia);
        iterations = it;
        if shift < cfg.tolerance {
            break;
        }
        let mut next = assign(m, &centers);
        fill_empty(m, &centers, &mut next, cfg.k);
        if next == labels {
            break;
        }
        labels = next;
    }
    Fit { labels, centers, inertia, iterations, history }
}

/// D²-weighted seeding. Falls back to the first unused sample once every
/// sample coincides with a chosen center.
fn kmeans_plus_plus(m: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = m.n_samples();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = m.rows().map(|r| squared_euclidean(r, m.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(pick);
        for (i, r) in m.rows().enumerate() {
            d2[i] = d2[i].min(squared_euclidean(r, m.row(pick)));
        }
    }
    chosen.into_iter().map(|i| m.row(i).to_vec()).collect()
}

/// Nearest center per sample; ties go to the lower index.
fn assign(m: &FeatureMatrix, centers: &[Vec<f64>]) -> Vec<usize> {
    m.rows()
        .map(|r| {
            let mut best = (0, f64::INFINITY);
            for (c, center) in centers.iter().enumerate() {
                let d = squared_euclidean(r, center);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best.0
        })
        .collect()
}

/// Moves the sample farthest from its center into each empty cluster. Only
/// samples from clusters with more than one member are eligible.
fn fill_empty(m: &FeatureMatrix, centers: &[Vec<f64>], labels: &mut [usize], k: usize) {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in m.rows().enumerate() {
            if sizes[labels[i]] < 2 {
                continue;
            }
            let d = squared_euclidean(r, &centers[labels[i]]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("k <= n leaves a cluster with a spare member");
        sizes[labels[i]] -= 1;
        labels[i] = empty;
        sizes[empty] = 1;
    }
}

fn cluster_means(m: &FeatureMatrix, labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let w = m.width();
    let mut sums = vec![vec![0.0; w]; k];
    let mut counts = vec![0usize; k];
    for (r, &l) in m.rows().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(r) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        debug_assert!(c > 0);
        for v in s.iter_mut() {
            *v /= c as f64;
        }
    }
    sums
}

fn sse(m: &FeatureMatrix, labels: &[usize], centers: &[Vec<f64>]) -> f64 {
    m.rows().zip(labels).map(|(r, &l)| squared_euclidean(r, &centers[l])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    fn blobs(seed: u64) -> (FeatureMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (b, c) in [0.0, 100.0].into_iter().enumerate() {
            for _ in 0..20 {
                rows.push(vec![c + rng.gen_range(-1.0..1.0), c + rng.gen_range(-1.0..1.0)]);
                truth.push(b);
            }
        }
        (FeatureMatrix::raw(ids(40), &rows).unwrap(), truth)
    }

    #[test]
    fn singletons_have_zero_inertia() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let m = FeatureMatrix::raw(ids(5), &rows).unwrap();
        let r = kmeans_fit(&m, &KMeansConfig::new(5, 1)).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut seen = r.labels.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn recovers_blobs_and_nearest_centroid_holds() {
        let (m, truth) = blobs(3);
        let r = kmeans_fit(&m, &KMeansConfig::new(2, 9)).unwrap();
        for (i, &l) in r.labels.iter().enumerate() {
            assert_eq!(l == r.labels[0], truth[i] == truth[0]);
            let d: Vec<f64> = r.centroids.iter().map(|c| squared_euclidean(m.row(i), c.values())).collect();
            assert!(d[l] <= d[1 - l]);
        }
    }

    #[test]
    fn invariants_hold() {
        let (m, _) = blobs(11);
        for k in 1..=6 {
            let r = kmeans_fit(&m, &KMeansConfig::new(k, 5)).unwrap();
            assert!(r.cluster_sizes().iter().all(|&s| s > 0));
            for w in r.inertia_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{w:?}");
            }
            let recomputed: f64 =
                (0..m.n_samples()).map(|i| squared_euclidean(m.row(i), r.centroids[r.labels[i]].values())).sum();
            assert!((recomputed - r.inertia).abs() < 1e-6);
            for c in 0..k {
                let members: Vec<&[f64]> = (0..m.n_samples()).filter(|&i| r.labels[i] == c).map(|i| m.row(i)).collect();
                for j in 0..m.width() {
                    let mean = members.iter().map(|r| r[j]).sum::<f64>() / members.len() as f64;
                    assert!((mean - r.centroids[c].values()[j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn duplicates_still_fill_every_cluster() {
        let rows = vec![vec![1.0]; 6];
        let m = FeatureMatrix::raw(ids(6), &rows).unwrap();
        let r = kmeans_fit(&m, &KMeansConfig::new(4, 0)).unwrap();
        assert!(r.cluster_sizes().iter().all(|&s| s > 0));
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let (m, _) = blobs(21);
        let cfg = KMeansConfig::new(3, 77);
        let a = kmeans_fit(&m, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| kmeans_fit(&m, &cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.inertia.to_bits(), b.inertia.to_bits());
    }

    #[test]
    fn errors() {
        let (m, _) = blobs(1);
        assert_eq!(kmeans_fit(&m, &KMeansConfig::new(41, 0)).unwrap_err(), ClusterError::KTooLarge { k: 41, n: 40 });
        assert_eq!(kmeans_fit(&m, &KMeansConfig::new(0, 0)).unwrap_err(), ClusterError::ZeroK);
    }
}
