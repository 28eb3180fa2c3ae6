//! Rotation-invariant comparisons between loading matrices.

use crate::error::{mismatch, Result};
use crate::tensor::Matrix;

fn orthonormal_basis(a: &Matrix) -> nalgebra::DMatrix<f64> {
    a.to_nalgebra().qr().q()
}

fn spectral_norm(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.singular_values().iter().fold(0.0, |acc, &s| acc.max(s))
}

/// Sine of the largest principal angle between the column spaces of `a` and `b`.
///
/// Computed as `‖(I − QₐQₐᵀ)Q_b‖₂`, which stays accurate for tiny angles.
pub fn principal_angle_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(mismatch(format!(
            "subspaces {}x{} and {}x{} are not comparable",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let qa = orthonormal_basis(a);
    let qb = orthonormal_basis(b);
    let residual = &qb - &qa * (qa.transpose() * &qb);
    Ok(spectral_norm(&residual).min(1.0))
}

/// `(1/√n) · min_H ‖estimate − truth·H‖_F` over orthogonal `H`.
pub fn procrustes_distance(estimate: &Matrix, truth: &Matrix) -> Result<f64> {
    if estimate.rows() != truth.rows() || estimate.cols() != truth.cols() {
        return Err(mismatch("loading matrices differ in shape"));
    }
    let e = estimate.to_nalgebra();
    let t = truth.to_nalgebra();
    let svd = (t.transpose() * &e).svd(true, true);
    let h = svd.u.expect("u requested") * svd.v_t.expect("v requested");
    let diff = e - t * h;
    Ok(diff.norm() / (estimate.rows() as f64).sqrt())
}
