use super::Matrix;
use crate::error::{invalid, mismatch, Error, Result};

/// Relative asymmetry tolerated before a matrix is rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

const MAX_SWEEPS: usize = 10_000;

/// Full eigendecomposition of a symmetric matrix.
///
/// Eigenvalues come back in descending order. Each eigenvector column is
/// scaled so its largest-magnitude entry is positive (first one on ties).
pub fn symmetric_eigen(s: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let n = s.rows();
    if n != s.cols() {
        return Err(mismatch(format!("eigendecomposition of {}x{} matrix", n, s.cols())));
    }
    let scale = s.max_abs();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((s.get(i, j) - s.get(j, i)).abs());
        }
    }
    if scale > 0.0 && asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric(asym / scale));
    }
    if !s.data().iter().all(|v| v.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }

    let sym = s.to_nalgebra();
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::EigenNoConvergence)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Matrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    for j in 0..n {
        fix_sign(&mut vectors, j);
    }
    Ok((vectors, values))
}

/// The `k` leading eigenpairs of a symmetric matrix.
pub fn top_eigenvectors(s: &Matrix, k: usize) -> Result<(Matrix, Vec<f64>)> {
    if k == 0 || k > s.rows() {
        return Err(invalid(format!(
            "requested {k} eigenvectors of a {}x{} matrix",
            s.rows(),
            s.cols()
        )));
    }
    let (vectors, mut values) = symmetric_eigen(s)?;
    values.truncate(k);
    Ok((vectors.leading_columns(k), values))
}

fn fix_sign(v: &mut Matrix, j: usize) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for i in 0..v.rows() {
        let x = v.get(i, j);
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.negate_column(j);
    }
}
