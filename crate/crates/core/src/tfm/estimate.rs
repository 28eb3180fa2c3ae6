use rayon::prelude::*;

use super::{FactorSeries, LoadingSet, Ranks};
use crate::error::{invalid, mismatch, Error, Result};
use crate::panel::Standardization;
use crate::tensor::{top_eigenvectors, DenseTensor, Matrix};

/// First-pass loading estimates: `B̂` spans the joint seasonal space and
/// `Γ̂⁽ʲ⁾` the complement of each seasonal mode.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialLoadings {
    /// `S × ∏K_j`, scaled by `√S`.
    pub b_hat: Matrix,
    /// `(N·S₋ⱼ) × (R·K₋ⱼ)`, scaled by `√(N·S₋ⱼ)`.
    pub gamma_hat: Vec<Matrix>,
}

struct Shape {
    n: usize,
    periods: Vec<usize>,
    s: usize,
    t: usize,
}

impl Shape {
    fn of(xs: &[DenseTensor]) -> Result<Self> {
        let first = xs.first().ok_or_else(|| invalid("no observations"))?;
        if first.order() < 2 {
            return Err(mismatch("observations need a provider mode and at least one seasonal mode"));
        }
        if xs.iter().any(|x| x.dims() != first.dims()) {
            return Err(mismatch("observation tensors differ in dims"));
        }
        Ok(Self {
            n: first.dims()[0],
            periods: first.dims()[1..].to_vec(),
            s: first.dims()[1..].iter().product(),
            t: xs.len(),
        })
    }

    fn s_minus(&self, j: usize) -> usize {
        self.s / self.periods[j]
    }

    fn norm(&self) -> f64 {
        (self.t * self.n * self.s) as f64
    }
}

/// `Σ_t f(x_t)`, accumulated in chunk order so the result is reproducible.
fn accumulate(
    xs: &[DenseTensor],
    size: usize,
    f: impl Fn(&DenseTensor) -> Result<Matrix> + Sync,
) -> Result<Matrix> {
    let partials: Vec<Matrix> = xs
        .par_chunks(16)
        .map(|chunk| {
            let mut acc = Matrix::zeros(size, size);
            for x in chunk {
                acc.add_assign(&f(x)?)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = Matrix::zeros(size, size);
    for p in &partials {
        total.add_assign(p)?;
    }
    Ok(total)
}

fn check_nonzero(cov: &Matrix, what: &str) -> Result<()> {
    if cov.max_abs() == 0.0 {
        return Err(Error::DegenerateCovariance(format!("{what} covariance is identically zero")));
    }
    Ok(())
}

pub fn initial_loadings(xs: &[DenseTensor], ranks: &Ranks) -> Result<InitialLoadings> {
    let shape = Shape::of(xs)?;
    ranks.validate(xs[0].dims())?;
    let norm = shape.norm();

    let k_all = ranks.k_product();
    let cov = accumulate(xs, shape.s, |x| {
        let m = x.unfold(0)?;
        m.t_matmul(&m)
    })?
    .scale(1.0 / norm);
    check_nonzero(&cov, "mode-1")?;
    let (vecs, _) = top_eigenvectors(&cov, k_all)?;
    let b_hat = vecs.scale((shape.s as f64).sqrt());

    let mut gamma_hat = Vec::with_capacity(shape.periods.len());
    for j in 0..shape.periods.len() {
        let width = shape.n * shape.s_minus(j);
        let count = ranks.r * ranks.k_product_except(j);
        let cov = accumulate(xs, width, |x| {
            let m = x.unfold(j + 1)?;
            m.t_matmul(&m)
        })?
        .scale(1.0 / norm);
        check_nonzero(&cov, &format!("mode-{}", j + 2))?;
        let (vecs, _) = top_eigenvectors(&cov, count)?;
        gamma_hat.push(vecs.scale((width as f64).sqrt()));
    }
    Ok(InitialLoadings { b_hat, gamma_hat })
}

/// The matrices diagonalized by the projection pass, one per mode:
/// `N × N` for the cross-section, then `S_j × S_j` for each seasonal mode.
pub fn projected_covariances(xs: &[DenseTensor], init: &InitialLoadings) -> Result<Vec<Matrix>> {
    let shape = Shape::of(xs)?;
    let norm = shape.norm();
    if init.b_hat.rows() != shape.s || init.gamma_hat.len() != shape.periods.len() {
        return Err(mismatch("initial loadings do not conform to the data"));
    }
    let mut out = Vec::with_capacity(shape.periods.len() + 1);
    let cov0 = accumulate(xs, shape.n, |x| Ok(x.unfold(0)?.matmul(&init.b_hat)?.gram_rows()))?
        .scale(1.0 / (norm * shape.s as f64));
    out.push(cov0);
    for (j, gamma) in init.gamma_hat.iter().enumerate() {
        if gamma.rows() != shape.n * shape.s_minus(j) {
            return Err(mismatch(format!("Γ̂ for seasonal mode {j} has wrong row count")));
        }
        let sj = shape.periods[j];
        let cov = accumulate(xs, sj, |x| Ok(x.unfold(j + 1)?.matmul(gamma)?.gram_rows()))?
            .scale(1.0 / (norm * shape.s_minus(j) as f64));
        out.push(cov);
    }
    Ok(out)
}

pub fn projected_loadings(
    xs: &[DenseTensor],
    init: &InitialLoadings,
    ranks: &Ranks,
) -> Result<LoadingSet> {
    ranks.validate(xs.first().ok_or_else(|| invalid("no observations"))?.dims())?;
    if init.b_hat.cols() != ranks.k_product()
        || init
            .gamma_hat
            .iter()
            .enumerate()
            .any(|(j, g)| g.cols() != ranks.r * ranks.k_product_except(j))
    {
        return Err(mismatch("initial loadings do not conform to the ranks"));
    }
    let covs = projected_covariances(xs, init)?;
    check_nonzero(&covs[0], "projected mode-1")?;
    let n = covs[0].rows();
    let (lam, _) = top_eigenvectors(&covs[0], ranks.r)?;
    let lambda = lam.scale((n as f64).sqrt());
    let mut b = Vec::with_capacity(ranks.k.len());
    for (j, cov) in covs.iter().enumerate().skip(1) {
        check_nonzero(cov, &format!("projected mode-{}", j + 1))?;
        let (vecs, _) = top_eigenvectors(cov, ranks.k[j - 1])?;
        b.push(vecs.scale((cov.rows() as f64).sqrt()));
    }
    Ok(LoadingSet { lambda, b })
}

/// `ℱ_t = (1/(N·S)) · 𝒳_t ×₁ Λᵀ ×₂ B⁽¹⁾ᵀ ⋯ ×_{M+1} B⁽ᴹ⁾ᵀ`.
pub fn extract_factors(xs: &[DenseTensor], l: &LoadingSet) -> Result<FactorSeries> {
    let first = xs.first().ok_or_else(|| invalid("no observations"))?;
    l.check_dims(first.dims())?;
    let transposed: Vec<Matrix> = l.matrices().map(Matrix::transpose).collect();
    let refs: Vec<&Matrix> = transposed.iter().collect();
    let scale = 1.0 / first.len() as f64;
    let tensors = xs
        .iter()
        .map(|x| Ok(x.multi_mode_product(&refs)?.scale(scale)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FactorSeries { tensors })
}

/// Common component `ℱ ×₁ Λ ×₂ B⁽¹⁾ ⋯ ×_{M+1} B⁽ᴹ⁾` in standardized units.
pub fn common_component(f: &DenseTensor, l: &LoadingSet) -> Result<DenseTensor> {
    let refs: Vec<&Matrix> = l.matrices().collect();
    if f.dims() != l.factor_dims().as_slice() {
        return Err(mismatch(format!(
            "factor dims {:?} do not match loadings {:?}",
            f.dims(),
            l.factor_dims()
        )));
    }
    f.multi_mode_product(&refs)
}

/// `𝒴_t = ℳ + 𝒮 ⊙ common_component(ℱ_t)`, shared by fitting and forecasting.
pub fn reconstruct(f: &DenseTensor, l: &LoadingSet, z: &Standardization) -> Result<DenseTensor> {
    let c = common_component(f, l)?;
    if c.dims() != z.dims() {
        return Err(mismatch("loadings and standardization dims differ"));
    }
    z.invert(&c)
}

pub fn fitted_values(
    f: &FactorSeries,
    l: &LoadingSet,
    z: &Standardization,
) -> Result<Vec<DenseTensor>> {
    f.tensors.iter().map(|ft| reconstruct(ft, l, z)).collect()
}

/// Mean squared entrywise difference over all cells and periods.
pub fn in_sample_mse(y: &[DenseTensor], y_fit: &[DenseTensor]) -> Result<f64> {
    if y.len() != y_fit.len() || y.is_empty() {
        return Err(mismatch("series lengths differ or are empty"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, b) in y.iter().zip(y_fit) {
        if a.dims() != b.dims() {
            return Err(mismatch("tensor dims differ"));
        }
        sum += a
            .data()
            .iter()
            .zip(b.data())
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>();
        count += a.len();
    }
    Ok(sum / count as f64)
}
