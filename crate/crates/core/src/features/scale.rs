// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureMatrix};

/// Per-column mean and population standard deviation. A zero `std` marks a
/// constant column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalingParams {
    /// Scales another matrix with these parameters.
    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
        if m.width() != self.mean.len() {
            return Err(FeatureError::DimensionMismatch { left: self.mean.len(), right: m.width() });
        }
        let w = m.width();
        let data = m
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let j = i % w;
                if self.std[j] == 0.0 {
                    0.0
                } else {
                    (x - self.mean[j]) / self.std[j]
                }
            })
            .collect();
        Ok(m.with_data(data))
    }
}

/// Z-score scaling per column. Constant columns become zero.
pub fn standardize(m: &FeatureMatrix) -> Result<(FeatureMatrix, ScalingParams), FeatureError> {
    let n = m.n_samples();
    if n < 2 {
        return Err(FeatureError::TooFewSamples { n });
    }
    let w = m.width();
    let mut mean = vec![0.0; w];
    let mut std = vec![0.0; w];
    for j in 0..w {
        let first = m.get(0, j);
        // Exact check: a rounded mean would otherwise turn a constant column
        // into noise divided by a tiny std.
        if m.rows().all(|r| r[j] == first) {
            mean[j] = first;
            continue;
        }
        let mu = m.rows().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = m.rows().map(|r| (r[j] - mu) * (r[j] - mu)).sum::<f64>() / n as f64;
        mean[j] = mu;
        std[j] = var.sqrt();
    }
    let params = ScalingParams { mean, std };
    Ok((params.apply(m)?, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn simple_columns() {
        let m = FeatureMatrix::raw(ids(2), &[vec![1.0, 0.1], vec![3.0, 0.1]]).unwrap();
        let (s, p) = standardize(&m).unwrap();
        assert_eq!(s.row(0), &[-1.0, 0.0]);
        assert_eq!(s.row(1), &[1.0, 0.0]);
        assert_eq!(p.mean, vec![2.0, 0.1]);
        assert_eq!(p.std, vec![1.0, 0.0]);
    }

    #[test]
    fn needs_two_samples() {
        let m = FeatureMatrix::raw(ids(1), &[vec![1.0]]).unwrap();
        assert_eq!(standardize(&m).unwrap_err(), FeatureError::TooFewSamples { n: 1 });
    }

    #[test]
    fn seeded_matrix_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..8).map(|j| if j == 3 { 4.2 } else { rng.gen_range(-50.0..50.0) * (j + 1) as f64 }).collect())
            .collect();
        let (s, _) = standardize(&FeatureMatrix::raw(ids(50), &rows).unwrap()).unwrap();
        for j in 0..8 {
            let mu = s.rows().map(|r| r[j]).sum::<f64>() / 50.0;
            let sd = (s.rows().map(|r| (r[j] - mu).powi(2)).sum::<f64>() / 50.0).sqrt();
            assert!(mu.abs() < 1e-9);
            let target = if j == 3 { 0.0 } else { 1.0 };
            assert!((sd - target).abs() < 1e-9, "col {j}: {sd}");
        }
    }

    proptest! {
        #[test]
        fn idempotent(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 3..20)) {
            let m = FeatureMatrix::raw(ids(rows.len()), &rows).unwrap();
            let (once, _) = standardize(&m).unwrap();
            let (twice, _) = standardize(&once).unwrap();
            for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
