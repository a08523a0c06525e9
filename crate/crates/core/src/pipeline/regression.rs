//! Task inference: ridge least squares for `r ≈ Φ w`.

use alloc::vec;
use alloc::vec::Vec;

use crate::features::{TaskOrigin, TaskVector};
use crate::linalg::{cholesky_solve, dot};
use crate::{Error, Result};

/// Solves `min_w ‖Φw − r‖² + λ‖w‖²` through the normal equations.
///
/// Needs at least `feature_dim` rows. With `lambda = 0` a rank-deficient `Φ`
/// is reported as [`Error::RankDeficient`].
pub fn solve_w(features: &[Vec<f64>], rewards: &[f64], lambda: f64) -> Result<TaskVector> {
    if features.len() != rewards.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            actual: rewards.len(),
        });
    }
    let d = features.first().map_or(0, Vec::len);
    if d == 0 || features.len() < d {
        return Err(Error::NotEnoughSamples {
            needed: d.max(1),
            got: features.len(),
        });
    }
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    for (row, &r) in features.iter().zip(rewards) {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: row.len(),
            });
        }
        for i in 0..d {
            rhs[i] += row[i] * r;
            for j in 0..=i {
                gram[i * d + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[j * d + i] = gram[i * d + j];
        }
        gram[i * d + i] += lambda;
    }
    let w = cholesky_solve(&gram, &rhs, d)?;
    Ok(TaskVector {
        w,
        origin: TaskOrigin::Regressed,
    })
}

/// Coefficient of determination of `Φw` against `r`.
pub fn r_squared(features: &[Vec<f64>], rewards: &[f64], w: &[f64]) -> f64 {
    let n = rewards.len().max(1) as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (row, &r) in features.iter().zip(rewards) {
        let e = r - dot(row, w);
        ss_res += e * e;
        ss_tot += (r - mean) * (r - mean);
    }
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}
