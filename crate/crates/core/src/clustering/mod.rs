// SPDX-License-Identifier: Apache-2.0

//! Deterministic K-Means with k-means++ seeding and restarts, silhouette
//! scoring, K sweeps and partition agreement.

mod ari;
mod kmeans;
mod pca;
mod silhouette;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;

pub use ari::adjusted_rand_index;
pub use kmeans::kmeans_fit;
pub use pca::{project_2d, Projection};
pub use silhouette::{silhouette_from_distances, silhouette_mean, sweep_k};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("feature matrix is empty")]
    EmptyMatrix,
    #[error("k = {k} exceeds the {n} available samples")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("silhouette needs at least 2 distinct clusters")]
    SingleCluster,
    #[error("{labels} labels for {n} samples")]
    LabelCount { labels: usize, n: usize },
    #[error("invalid K range {k_min}..={k_max} for {n} samples (need 2 <= k_min <= k_max <= n - 1)")]
    InvalidRange { k_min: usize, k_max: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iterations: usize,
    pub restarts: usize,
    /// Largest centroid shift that counts as converged.
    pub tolerance: f64,
    pub seed: u64,
}

impl KMeansConfig {
    pub const DEFAULT_MAX_ITERATIONS: usize = 300;
    pub const DEFAULT_RESTARTS: usize = 10;
    pub const DEFAULT_TOLERANCE: f64 = 1e-4;

    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
            restarts: Self::DEFAULT_RESTARTS,
            tolerance: Self::DEFAULT_TOLERANCE,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<FeatureVector>,
    /// Sum of squared distances from each sample to its centroid.
    pub inertia: f64,
    pub iterations_run: usize,
    /// Inertia after each centroid update of the winning restart.
    pub inertia_history: Vec<f64>,
    /// Restart index that produced this result.
    pub restart: usize,
}

impl ClusteringResult {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Member count per cluster.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    pub per_k: BTreeMap<usize, f64>,
    pub best_k: usize,
}

impl SilhouetteReport {
    /// Picks the K with the highest score; ties go to the smaller K.
    pub fn from_scores(per_k: BTreeMap<usize, f64>) -> Option<Self> {
        let mut best: Option<(usize, f64)> = None;
        for (&k, &s) in &per_k {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((k, s));
            }
        }
        best.map(|(best_k, _)| Self { per_k, best_k })
    }

    /// `k,mean_silhouette` rows in ascending K.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "mean_silhouette"])?;
        for (k, s) in &self.per_k {
            out.write_record([k.to_string(), s.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}
