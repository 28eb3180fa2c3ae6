//! Tensor factor model `𝒳_t = ℱ_t ×₁ Λ ×₂ B⁽¹⁾ ⋯ ×_{M+1} B⁽ᴹ⁾ + ℰ_t`.
//!
//! Loadings are estimated with a two-pass projected eigen-estimator: an
//! initial pass on each mode's unfolded second moments, then a pass on the
//! data projected onto the complementary loading spaces. Loadings are scaled
//! so that `ΛᵀΛ = N·I` and `B⁽ʲ⁾ᵀB⁽ʲ⁾ = S_j·I`; factors are recovered by
//! linear projection.

mod estimate;
mod ranks;
pub mod subspace;

use serde::{Deserialize, Serialize};

pub use estimate::{
    common_component, extract_factors, fitted_values, in_sample_mse, initial_loadings,
    projected_covariances, projected_loadings, reconstruct, InitialLoadings,
};
pub use ranks::{select_ranks, RankSelection};

use crate::error::{invalid, mismatch, Result};
use crate::panel::{estimate_standardization, standardize, Standardization, TensorSeries};
use crate::tensor::{DenseTensor, Matrix};

/// Cross-sectional factor count `R` and seasonal factor counts `K_j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ranks {
    pub r: usize,
    pub k: Vec<usize>,
}

impl Ranks {
    pub fn new(r: usize, k: Vec<usize>) -> Self {
        Self { r, k }
    }

    /// Checks `1 ≤ R ≤ N` and `1 ≤ K_j ≤ S_j` against tensor dims `(N, S…)`.
    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        if dims.len() != self.k.len() + 1 {
            return Err(mismatch(format!(
                "ranks {self} need {} seasonal modes, data has {}",
                self.k.len(),
                dims.len().saturating_sub(1)
            )));
        }
        if self.r == 0 || self.r > dims[0] {
            return Err(invalid(format!("R={} outside 1..={}", self.r, dims[0])));
        }
        for (j, (&k, &s)) in self.k.iter().zip(&dims[1..]).enumerate() {
            if k == 0 || k > s {
                return Err(invalid(format!("K{}={k} outside 1..={s}", j + 1)));
            }
        }
        Ok(())
    }

    pub fn k_product(&self) -> usize {
        self.k.iter().product()
    }

    pub fn k_product_except(&self, j: usize) -> usize {
        self.k
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j)
            .map(|(_, k)| k)
            .product()
    }

    /// `(R, K₁, …, K_M)`.
    pub fn factor_dims(&self) -> Vec<usize> {
        std::iter::once(self.r).chain(self.k.iter().copied()).collect()
    }
}

impl std::fmt::Display for Ranks {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}", self.r)?;
        for k in &self.k {
            write!(f, ",{k}")?;
        }
        write!(f, ")")
    }
}

/// Cross-sectional loadings `Λ` (N×R) and seasonal loadings `B⁽ʲ⁾` (S_j×K_j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingSet {
    pub lambda: Matrix,
    pub b: Vec<Matrix>,
}

impl LoadingSet {
    /// `Λ, B⁽¹⁾, …, B⁽ᴹ⁾` in mode order.
    pub fn matrices(&self) -> impl Iterator<Item = &Matrix> {
        std::iter::once(&self.lambda).chain(self.b.iter())
    }

    pub fn ranks(&self) -> Ranks {
        Ranks::new(self.lambda.cols(), self.b.iter().map(Matrix::cols).collect())
    }

    pub fn factor_dims(&self) -> Vec<usize> {
        self.matrices().map(Matrix::cols).collect()
    }

    pub fn data_dims(&self) -> Vec<usize> {
        self.matrices().map(Matrix::rows).collect()
    }

    pub fn check_dims(&self, dims: &[usize]) -> Result<()> {
        if self.data_dims() != dims {
            return Err(mismatch(format!(
                "loadings fit dims {:?}, data has {dims:?}",
                self.data_dims()
            )));
        }
        Ok(())
    }

    /// Largest deviation of `AᵀA / rows(A)` from the identity over all loadings.
    pub fn scale_deviation(&self) -> f64 {
        self.matrices()
            .map(|m| {
                let g = m.t_matmul(m).expect("square gram").scale(1.0 / m.rows() as f64);
                g.sub(&Matrix::identity(m.cols())).expect("same shape").max_abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Length-T sequence of `R × K₁ × … × K_M` factor tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSeries {
    pub tensors: Vec<DenseTensor>,
}

impl FactorSeries {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Scalar series of the factor coordinate at canonical offset `coord`.
    pub fn coordinate(&self, coord: usize) -> Vec<f64> {
        self.tensors.iter().map(|f| f.data()[coord]).collect()
    }
}

/// A fitted model: standardization, loadings and in-sample factors.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFactorModel {
    pub ranks: Ranks,
    pub standardization: Standardization,
    pub loadings: LoadingSet,
    pub factors: FactorSeries,
    pub clamped_cells: usize,
}

impl TensorFactorModel {
    /// Standardizes `ys`, estimates loadings and extracts factors.
    pub fn fit(ys: &TensorSeries, ranks: &Ranks) -> Result<Self> {
        let fit = estimate_standardization(ys)?;
        Self::fit_with(ys, ranks, fit.standardization, fit.clamped_cells)
    }

    pub fn fit_with(
        ys: &TensorSeries,
        ranks: &Ranks,
        standardization: Standardization,
        clamped_cells: usize,
    ) -> Result<Self> {
        ranks.validate(ys.dims())?;
        let xs = standardize(ys, &standardization)?;
        let init = initial_loadings(&xs.tensors, ranks)?;
        let loadings = projected_loadings(&xs.tensors, &init, ranks)?;
        let factors = extract_factors(&xs.tensors, &loadings)?;
        Ok(Self {
            ranks: ranks.clone(),
            standardization,
            loadings,
            factors,
            clamped_cells,
        })
    }

    pub fn fitted(&self) -> Result<Vec<DenseTensor>> {
        fitted_values(&self.factors, &self.loadings, &self.standardization)
    }

    pub fn in_sample_mse(&self, ys: &TensorSeries) -> Result<f64> {
        in_sample_mse(&ys.tensors, &self.fitted()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_validation() {
        let dims = [9, 7, 24];
        assert!(Ranks::new(1, vec![1, 2]).validate(&dims).is_ok());
        assert!(Ranks::new(0, vec![1, 2]).validate(&dims).is_err());
        assert!(Ranks::new(10, vec![1, 2]).validate(&dims).is_err());
        assert!(Ranks::new(1, vec![8, 2]).validate(&dims).is_err());
        assert!(Ranks::new(1, vec![1]).validate(&dims).is_err());
        let r = Ranks::new(2, vec![3, 4, 5]);
        assert_eq!(r.k_product(), 60);
        assert_eq!(r.k_product_except(1), 15);
        assert_eq!(r.factor_dims(), vec![2, 3, 4, 5]);
        assert_eq!(r.to_string(), "(2,3,4,5)");
    }
}
