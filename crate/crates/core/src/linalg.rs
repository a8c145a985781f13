//! Dense helpers shared by the base-learners and the likelihood engines.

use nalgebra::{DMatrix, DVector};

use crate::{BoostError, Result};

/// Ridge added to the diagonal when a Cholesky factorization fails.
pub const RIDGE_FALLBACK: f64 = 1e-10;

/// Solves `a * x = b` for a symmetric positive (semi-)definite `a`.
///
/// Returns the solution and whether the ridge fallback was needed.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok((chol.solve(b), false));
    }
    let scale = a.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let mut ridged = a.clone();
    for i in 0..ridged.nrows() {
        ridged[(i, i)] += RIDGE_FALLBACK * scale;
    }
    ridged
        .cholesky()
        .map(|c| (c.solve(b), true))
        .ok_or_else(|| BoostError::Singular("penalized normal equations".into()))
}

/// `Xᵀ diag(w) X` for a dense design.
pub fn weighted_gram(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut xw = x.clone();
    for (i, wi) in w.iter().enumerate() {
        xw.row_mut(i).scale_mut(*wi);
    }
    x.transpose() * xw
}

/// `Xᵀ diag(w)` as a dense matrix.
pub fn weighted_transpose(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut xt = x.transpose();
    for (j, wj) in w.iter().enumerate() {
        xt.column_mut(j).scale_mut(*wj);
    }
    xt
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Weighted median; with uniform weights this matches [`median`].
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| (*v, *w))
        .collect();
    if pairs.is_empty() {
        return f64::NAN;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let half = 0.5 * total;
    let mut acc = 0.0;
    for (k, (v, w)) in pairs.iter().enumerate() {
        acc += w;
        if (acc - half).abs() <= 1e-12 * total {
            // exactly half the mass below: average with the next value
            return match pairs.get(k + 1) {
                Some(next) => 0.5 * (v + next.0),
                None => *v,
            };
        }
        if acc > half {
            return *v;
        }
    }
    pairs[pairs.len() - 1].0
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_median_matches_plain_median_for_uniform_weights() {
        let v = [5.0, 1.0, 3.0, 100.0];
        assert_eq!(weighted_median(&v, &[1.0; 4]), median(&v));
        let v = [1.0, 2.0, 100.0];
        assert_eq!(weighted_median(&v, &[2.0; 3]), 2.0);
    }

    #[test]
    fn weighted_median_respects_mass() {
        assert_eq!(weighted_median(&[1.0, 2.0, 3.0], &[1.0, 1.0, 5.0]), 3.0);
        assert_eq!(weighted_median(&[1.0, 2.0, 3.0], &[0.0, 0.0, 1.0]), 3.0);
    }

    #[test]
    fn spd_solve_falls_back_on_singular_input() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let (x, ridged) = spd_solve(&a, &b).unwrap();
        assert!(ridged);
        assert!(x.iter().all(|v| v.is_finite()));
    }
}
