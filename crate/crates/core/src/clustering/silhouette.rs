// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{kmeans_fit, ClusterError, KMeansConfig, SilhouetteReport};
use crate::features::{pairwise_matrix, DistanceMatrix, Euclidean, FeatureMatrix};

/// Mean silhouette under Euclidean distance.
pub fn silhouette_mean(m: &FeatureMatrix, labels: &[usize]) -> Result<f64, ClusterError> {
    if labels.len() != m.n_samples() {
        return Err(ClusterError::LabelCount { labels: labels.len(), n: m.n_samples() });
    }
    if m.n_samples() < 2 {
        return Err(ClusterError::SingleCluster);
    }
    let rows: Vec<&[f64]> = m.rows().collect();
    let d = pairwise_matrix(&rows, &Euclidean).expect("rows share a width");
    silhouette_from_distances(&d, labels)
}

/// Mean silhouette over a precomputed distance matrix. Labels may be any
/// integers; members of singleton clusters score 0.
pub fn silhouette_from_distances(d: &DistanceMatrix, labels: &[usize]) -> Result<f64, ClusterError> {
    let n = d.n();
    if labels.len() != n {
        return Err(ClusterError::LabelCount { labels: labels.len(), n });
    }
    let ids: BTreeMap<usize, usize> = {
        let mut distinct: Vec<usize> = labels.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.into_iter().enumerate().map(|(i, l)| (l, i)).collect()
    };
    let k = ids.len();
    if k < 2 {
        return Err(ClusterError::SingleCluster);
    }
    let dense: Vec<usize> = labels.iter().map(|l| ids[l]).collect();
    let mut sizes = vec![0usize; k];
    for &l in &dense {
        sizes[l] += 1;
    }
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = dense[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, &l) in dense.iter().enumerate() {
                if j != i {
                    sums[l] += d.get(i, j);
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / n as f64)
}

/// Fits K-Means for each K in `k_min..=k_max` and scores each fit.
pub fn sweep_k(
    m: &FeatureMatrix,
    k_min: usize,
    k_max: usize,
    template: &KMeansConfig,
) -> Result<SilhouetteReport, ClusterError> {
    let n = m.n_samples();
    if k_min < 2 || k_min > k_max || k_max + 1 > n {
        return Err(ClusterError::InvalidRange { k_min, k_max, n });
    }
    let rows: Vec<&[f64]> = m.rows().collect();
    let d = pairwise_matrix(&rows, &Euclidean).expect("rows share a width");
    let mut per_k = BTreeMap::new();
    for k in k_min..=k_max {
        let fit = kmeans_fit(m, &KMeansConfig { k, ..template.clone() })?;
        per_k.insert(k, silhouette_from_distances(&d, &fit.labels)?);
    }
    Ok(SilhouetteReport::from_scores(per_k).expect("nonempty range"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    /// Silhouette straight from the definition, with no shared code.
    fn naive(rows: &[Vec<f64>], labels: &[usize]) -> f64 {
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let k = labels.iter().max().unwrap() + 1;
        let mut total = 0.0;
        for i in 0..rows.len() {
            let mut per = vec![Vec::new(); k];
            for j in 0..rows.len() {
                if j != i {
                    per[labels[j]].push(dist(&rows[i], &rows[j]));
                }
            }
            if per[labels[i]].is_empty() {
                continue;
            }
            let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
            let a = mean(&per[labels[i]]);
            let b = (0..k).filter(|&c| c != labels[i] && !per[c].is_empty()).map(|c| mean(&per[c])).fold(f64::MAX, f64::min);
            total += (b - a) / a.max(b);
        }
        total / rows.len() as f64
    }

    fn blobs(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (b, c) in [0.0, 100.0].into_iter().enumerate() {
            for _ in 0..15 {
                rows.push(vec![c + rng.gen_range(-1.0..1.0), c + rng.gen_range(-1.0..1.0)]);
                labels.push(b);
            }
        }
        (rows, labels)
    }

    #[test]
    fn far_blobs_score_high() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (rows, labels) = blobs(&mut rng);
        let m = FeatureMatrix::raw(ids(rows.len()), &rows).unwrap();
        let s = silhouette_mean(&m, &labels).unwrap();
        assert!(s > 0.9);
        assert!((s - naive(&rows, &labels)).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_rejected() {
        let m = FeatureMatrix::raw(ids(3), &[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(silhouette_mean(&m, &[4, 4, 4]), Err(ClusterError::SingleCluster));
    }

    #[test]
    fn singletons_score_zero() {
        let rows = vec![vec![0.0], vec![0.5], vec![10.0]];
        let m = FeatureMatrix::raw(ids(3), &rows).unwrap();
        let s = silhouette_mean(&m, &[0, 0, 1]).unwrap();
        assert!((s - naive(&rows, &[0, 0, 1])).abs() < 1e-12);
    }

    #[test]
    fn random_labels_on_one_blob_near_zero() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let rows: Vec<Vec<f64>> =
                (0..200).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0)).collect()).collect();
            let labels: Vec<usize> = (0..200).map(|_| rng.gen_range(0..3)).collect();
            let m = FeatureMatrix::raw(ids(200), &rows).unwrap();
            let s = silhouette_mean(&m, &labels).unwrap();
            assert!(s.abs() < 0.1, "seed {seed}: {s}");
        }
    }

    #[test]
    fn permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0)]).collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 4).collect();
        let m = FeatureMatrix::raw(ids(30), &rows).unwrap();
        let s = silhouette_mean(&m, &labels).unwrap();
        let order: Vec<usize> = (0..30).rev().collect();
        let prow: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
        let plab: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        let p = silhouette_mean(&FeatureMatrix::raw(ids(30), &prow).unwrap(), &plab).unwrap();
        assert!((s - p).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn sweep_picks_two_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (rows, _) = blobs(&mut rng);
        let m = FeatureMatrix::raw(ids(rows.len()), &rows).unwrap();
        let r = sweep_k(&m, 2, 4, &KMeansConfig::new(2, 1)).unwrap();
        assert_eq!(r.best_k, 2);
        assert_eq!(r.per_k.len(), 3);
        let one = sweep_k(&m, 3, 3, &KMeansConfig::new(2, 1)).unwrap();
        assert_eq!((one.per_k.len(), one.best_k), (1, 3));
        assert!(matches!(sweep_k(&m, 1, 3, &KMeansConfig::new(2, 1)), Err(ClusterError::InvalidRange { .. })));
        assert!(matches!(sweep_k(&m, 2, 30, &KMeansConfig::new(2, 1)), Err(ClusterError::InvalidRange { .. })));
    }
}
