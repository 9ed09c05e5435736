// SPDX-License-Identifier: Apache-2.0

//! Fixed-length numeric vectors built from digests, z-score scaling and the
//! two distance metrics used for reporting (Euclidean and Jaccard).

mod matrix;
mod metrics;
mod scale;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pe::ImpHash;
use crate::similarity::{SsdeepDigest, TlshDigest, EFFECTIVE_BUCKETS};

pub use matrix::FeatureMatrix;
pub use metrics::{
    euclidean, jaccard, pairwise_matrix, squared_euclidean, DistanceMatrix, Euclidean, Jaccard, Metric,
    SsdeepScore, TlshDistance,
};
pub use scale::{standardize, ScalingParams};

pub const SSDEEP_WIDTH: usize = 1 + 2 * HISTOGRAM_BINS;
pub const TLSH_WIDTH: usize = 3 + EFFECTIVE_BUCKETS;

const HISTOGRAM_BINS: usize = 64;
const BASE64: &[u8; 64] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("at least 2 samples are required, got {n}")]
    TooFewSamples { n: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("scheme mismatch: {left} vs {right}")]
    SchemeMismatch { left: Scheme, right: Scheme },
    #[error("jaccard index is undefined for two empty sets")]
    BothEmpty,
    #[error("no samples")]
    Empty,
    #[error("{ids} sample ids for {rows} rows")]
    IdCount { ids: usize, rows: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("{scheme} vectors have {expected} dimensions, got {found}")]
    WrongWidth { scheme: Scheme, expected: usize, found: usize },
    #[error("feature csv: {0}")]
    Csv(String),
}

/// Which digest a vector was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Ssdeep,
    Tlsh,
    ImphashOnehot,
    /// Caller-supplied features of any width.
    Raw,
}

impl Scheme {
    /// Required width, or `None` when it depends on the corpus.
    pub fn fixed_width(self) -> Option<usize> {
        match self {
            Self::Ssdeep => Some(SSDEEP_WIDTH),
            Self::Tlsh => Some(TLSH_WIDTH),
            Self::ImphashOnehot | Self::Raw => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ssdeep => "ssdeep",
            Self::Tlsh => "tlsh",
            Self::ImphashOnehot => "imphash-onehot",
            Self::Raw => "raw",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ssdeep" => Ok(Self::Ssdeep),
            "tlsh" => Ok(Self::Tlsh),
            "imphash-onehot" | "imphash" => Ok(Self::ImphashOnehot),
            "raw" => Ok(Self::Raw),
            other => Err(format!("unknown scheme {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    scheme: Scheme,
}

impl FeatureVector {
    pub fn new(scheme: Scheme, values: Vec<f64>) -> Result<Self, FeatureError> {
        if let Some(expected) = scheme.fixed_width() {
            if values.len() != expected {
                return Err(FeatureError::WrongWidth { scheme, expected, found: values.len() });
            }
        }
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite { row: 0, col });
        }
        Ok(Self { values, scheme })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn histogram(sig: &str, out: &mut [f64]) {
    if sig.is_empty() {
        return;
    }
    for b in sig.bytes() {
        if let Some(i) = BASE64.iter().position(|&c| c == b) {
            out[i] += 1.0;
        }
    }
    let n = sig.len() as f64;
    for v in out.iter_mut() {
        *v /= n;
    }
}

/// `[log2(block_size / 3)]` followed by the base64-character histograms of
/// both signatures, each normalized by its signature length.
pub fn vectorize_ssdeep(d: &SsdeepDigest) -> FeatureVector {
    let mut values = vec![0.0; SSDEEP_WIDTH];
    values[0] = (f64::from(d.block_size()) / 3.0).log2();
    histogram(d.sig_coarse(), &mut values[1..1 + HISTOGRAM_BINS]);
    histogram(d.sig_fine(), &mut values[1 + HISTOGRAM_BINS..]);
    FeatureVector { values, scheme: Scheme::Ssdeep }
}

/// Header fields and the 128 body codes. The checksum is left out.
pub fn vectorize_tlsh(d: &TlshDigest) -> FeatureVector {
    let mut values = Vec::with_capacity(TLSH_WIDTH);
    values.extend([d.l_value(), d.q1_ratio(), d.q2_ratio()].map(f64::from));
    values.extend(d.body_codes().map(f64::from));
    FeatureVector { values, scheme: Scheme::Tlsh }
}

/// One-hot encoding with columns in first-seen order.
pub fn vectorize_imphash(sample_ids: Vec<String>, hashes: &[ImpHash]) -> Result<FeatureMatrix, FeatureError> {
    if hashes.is_empty() {
        return Err(FeatureError::Empty);
    }
    let mut columns: Vec<ImpHash> = Vec::new();
    let mut index = Vec::with_capacity(hashes.len());
    for h in hashes {
        let col = match columns.iter().position(|c| c == h) {
            Some(c) => c,
            None => {
                columns.push(*h);
                columns.len() - 1
            }
        };
        index.push(col);
    }
    let width = columns.len();
    let mut data = vec![0.0; hashes.len() * width];
    for (row, col) in index.into_iter().enumerate() {
        data[row * width + col] = 1.0;
    }
    let labels = columns.iter().map(|h| format!("imp_{h}")).collect();
    FeatureMatrix::from_flat(Scheme::ImphashOnehot, labels, sample_ids, data)
}

/// Default column labels for a scheme.
pub fn column_labels(scheme: Scheme, width: usize) -> Vec<String> {
    match scheme {
        Scheme::Ssdeep => std::iter::once("log2_block".to_owned())
            .chain((0..HISTOGRAM_BINS).map(|i| format!("coarse_{i:02}")))
            .chain((0..HISTOGRAM_BINS).map(|i| format!("fine_{i:02}")))
            .collect(),
        Scheme::Tlsh => ["l_value", "q1_ratio", "q2_ratio"]
            .into_iter()
            .map(str::to_owned)
            .chain((0..EFFECTIVE_BUCKETS).map(|i| format!("code_{i:03}")))
            .collect(),
        Scheme::ImphashOnehot => (0..width).map(|i| format!("imp_{i}")).collect(),
        Scheme::Raw => (0..width).map(|i| format!("x{i}")).collect(),
    }
}
