// SPDX-License-Identifier: Apache-2.0

use std::borrow::Borrow;
use std::collections::BTreeSet;

use rayon::prelude::*;

use super::{FeatureError, FeatureVector};
use crate::similarity::{ssdeep_compare, tlsh_distance, SsdeepDigest, TlshDigest};

/// Squared Euclidean distance between equal-length slices.
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum()
}

pub fn euclidean(p: &FeatureVector, q: &FeatureVector) -> Result<f64, FeatureError> {
    if p.scheme() != q.scheme() {
        return Err(FeatureError::SchemeMismatch { left: p.scheme(), right: q.scheme() });
    }
    if p.len() != q.len() {
        return Err(FeatureError::DimensionMismatch { left: p.len(), right: q.len() });
    }
    Ok(squared_euclidean(p.values(), q.values()).sqrt())
}

/// `|X ∩ Y| / |X ∪ Y|`.
pub fn jaccard<T: Ord>(x: &BTreeSet<T>, y: &BTreeSet<T>) -> Result<f64, FeatureError> {
    if x.is_empty() && y.is_empty() {
        return Err(FeatureError::BothEmpty);
    }
    let inter = x.intersection(y).count();
    let union = x.len() + y.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// A pairwise score over some sample representation.
pub trait Metric: Sync {
    type Item: ?Sized + Sync;

    fn eval(&self, a: &Self::Item, b: &Self::Item) -> Result<f64, FeatureError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl Metric for Euclidean {
    type Item = [f64];

    fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64, FeatureError> {
        if a.len() != b.len() {
            return Err(FeatureError::DimensionMismatch { left: a.len(), right: b.len() });
        }
        Ok(squared_euclidean(a, b).sqrt())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Jaccard;

impl Metric for Jaccard {
    type Item = BTreeSet<String>;

    fn eval(&self, a: &Self::Item, b: &Self::Item) -> Result<f64, FeatureError> {
        jaccard(a, b)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TlshDistance;

impl Metric for TlshDistance {
    type Item = TlshDigest;

    fn eval(&self, a: &TlshDigest, b: &TlshDigest) -> Result<f64, FeatureError> {
        Ok(f64::from(tlsh_distance(a, b)))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SsdeepScore;

impl Metric for SsdeepScore {
    type Item = SsdeepDigest;

    fn eval(&self, a: &SsdeepDigest, b: &SsdeepDigest) -> Result<f64, FeatureError> {
        Ok(f64::from(ssdeep_compare(a, b)))
    }
}

/// Dense symmetric matrix of pairwise scores.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j).to_bits() == self.get(j, i).to_bits()))
    }

    /// `(i, j, value)` for every `i < j`.
    pub fn upper_triangle(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j, self.get(i, j))))
    }
}

/// Evaluates `metric` on every pair. The diagonal holds each sample's
/// self-score. Rows are computed in parallel; every cell is evaluated
/// exactly once, so the result does not depend on the thread count.
pub fn pairwise_matrix<M, S>(samples: &[S], metric: &M) -> Result<DistanceMatrix, FeatureError>
where
    M: Metric,
    S: Borrow<M::Item> + Sync,
{
    let n = samples.len();
    if n < 2 {
        return Err(FeatureError::TooFewSamples { n });
    }
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = samples[i].borrow();
            (i..n).map(|j| metric.eval(a, samples[j].borrow())).collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut data = vec![0.0; n * n];
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    Ok(DistanceMatrix { n, data })
}
