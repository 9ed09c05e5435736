// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;

const MAX_POWER_ITERATIONS: usize = 1000;
const POWER_TOLERANCE: f64 = 1e-12;

/// First two principal axes and the samples projected onto them. Used only
/// for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub axes: [Vec<f64>; 2],
    /// Variance along each axis.
    pub variance: [f64; 2],
    pub points: Vec<[f64; 2]>,
}

fn mat_vec(c: &[f64], d: usize, v: &[f64]) -> Vec<f64> {
    (0..d).map(|i| c[i * d..(i + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dominant unit eigenvector of `c` orthogonal to `against`, with its
/// eigenvalue. A zero vector is returned when no variance remains.
fn power_iteration(c: &[f64], d: usize, against: Option<&[f64]>) -> (Vec<f64>, f64) {
    let project_out = |v: &mut Vec<f64>| {
        if let Some(u) = against {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= dot * y;
            }
        }
    };
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 / (i + 1) as f64).collect();
    project_out(&mut v);
    let n0 = norm(&v);
    if n0 == 0.0 {
        return (vec![0.0; d], 0.0);
    }
    v.iter_mut().for_each(|x| *x /= n0);
    let mut lambda = 0.0;
    for _ in 0..MAX_POWER_ITERATIONS {
        let mut w = mat_vec(c, d, &v);
        project_out(&mut w);
        lambda = norm(&w);
        if lambda == 0.0 {
            return (vec![0.0; d], 0.0);
        }
        w.iter_mut().for_each(|x| *x /= lambda);
        let delta = norm(&w.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
        v = w;
        if delta < POWER_TOLERANCE {
            break;
        }
    }
    // Largest-magnitude component positive, so the sign is reproducible.
    let pivot = v.iter().enumerate().fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    (v, lambda)
}

/// Projects centered rows onto the top two covariance eigenvectors.
pub fn project_2d(m: &FeatureMatrix) -> Projection {
    let (n, d) = (m.n_samples(), m.width());
    let mean: Vec<f64> = (0..d).map(|j| m.rows().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centered: Vec<Vec<f64>> = m.rows().map(|r| r.iter().zip(&mean).map(|(x, mu)| x - mu).collect()).collect();
    let mut cov = vec![0.0; d * d];
    for r in &centered {
        for i in 0..d {
            if r[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                cov[i * d + j] += r[i] * r[j];
            }
        }
    }
    cov.iter_mut().for_each(|x| *x /= n as f64);
    let (a1, l1) = power_iteration(&cov, d, None);
    let (a2, l2) = power_iteration(&cov, d, Some(&a1));
    let dot = |r: &[f64], a: &[f64]| r.iter().zip(a).map(|(x, y)| x * y).sum::<f64>();
    let points = centered.iter().map(|r| [dot(r, &a1), dot(r, &a2)]).collect();
    Projection { axes: [a1, a2], variance: [l1, l2], points }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn recovers_axis_aligned_spread() {
        let rows = vec![vec![-3.0, 0.0, 1.0], vec![3.0, 0.0, 1.0], vec![0.0, -1.0, 1.0], vec![0.0, 1.0, 1.0]];
        let p = project_2d(&FeatureMatrix::raw(ids(4), &rows).unwrap());
        assert!((p.axes[0][0] - 1.0).abs() < 1e-9);
        assert!((p.axes[1][1] - 1.0).abs() < 1e-9);
        assert!((p.variance[0] - 4.5).abs() < 1e-9);
        assert!((p.variance[1] - 0.5).abs() < 1e-9);
        assert!((p.points[1][0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn constant_matrix_projects_to_origin() {
        let p = project_2d(&FeatureMatrix::raw(ids(3), &vec![vec![2.0, 2.0]; 3]).unwrap());
        assert!(p.points.iter().all(|q| *q == [0.0, 0.0]));
    }

    #[test]
    fn axes_orthonormal() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| {
            let t = i as f64;
            vec![t, 0.5 * t + (t * 1.7).sin(), (t * 0.3).cos()]
        }).collect();
        let p = project_2d(&FeatureMatrix::raw(ids(20), &rows).unwrap());
        let dot: f64 = p.axes[0].iter().zip(&p.axes[1]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-9);
        assert!((norm(&p.axes[0]) - 1.0).abs() < 1e-9 && (norm(&p.axes[1]) - 1.0).abs() < 1e-9);
        assert!(p.variance[0] >= p.variance[1]);
    }
}
