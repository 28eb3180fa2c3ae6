use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{tensor_to_matrix, BenchmarkForecast, BenchmarkKind, ProviderMatrixSeries};
use crate::error::{invalid, mismatch, Error, Result};
use crate::panel::{estimate_standardization, Standardization, TensorSeries};
use crate::seasonal::{forecast_score_series, ScoreModel, DEFAULT_FACTOR_PERIOD};
use crate::tensor::{top_eigenvectors, DenseTensor, Matrix};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VfmConfig {
    pub factors: usize,
    pub period: usize,
    /// Fit one model on all providers' cells jointly instead of per provider.
    pub stacked: bool,
}

impl Default for VfmConfig {
    fn default() -> Self {
        Self {
            factors: 2,
            period: DEFAULT_FACTOR_PERIOD,
            stacked: false,
        }
    }
}

/// `x_t = L s_t + e_t` on the vectorized standardized tensors, with
/// `LᵀL = c·I` and scores `s_t = Lᵀx_t / c`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFactorModel {
    pub standardization: Standardization,
    pub loadings: Matrix,
    pub norm: f64,
    /// `scores[t][k]`.
    pub scores: Vec<Vec<f64>>,
}

fn standardized_rows(ts: &TensorSeries, z: &Standardization) -> Result<DMatrix<f64>> {
    let p = ts.tensors[0].len();
    let mut x = DMatrix::zeros(ts.len(), p);
    for (t, y) in ts.tensors.iter().enumerate() {
        let s = z.apply(y)?;
        for (c, v) in s.data().iter().enumerate() {
            x[(t, c)] = *v;
        }
    }
    Ok(x)
}

impl VectorFactorModel {
    /// Principal components of the standardized sample second-moment matrix.
    pub fn fit_pca(ts: &TensorSeries, r: usize) -> Result<Self> {
        let p = ts.tensors.first().map_or(0, DenseTensor::len);
        if r == 0 || r > p {
            return Err(invalid(format!("VFM factor count {r} outside 1..={p}")));
        }
        if ts.len() <= r {
            return Err(invalid(format!("VFM with {r} factors needs T > {r}, got {}", ts.len())));
        }
        let fit = estimate_standardization(ts)?;
        if fit.clamped_cells == p {
            return Err(Error::DegenerateCovariance("PCA on data without variation".into()));
        }
        let x = standardized_rows(ts, &fit.standardization)?;
        let cov = Matrix::from_nalgebra(&(x.tr_mul(&x) / ts.len() as f64));
        let (v, _) = top_eigenvectors(&cov, r)?;
        Self::with_rows(fit.standardization, v, 1.0, &x)
    }

    /// Fixed loadings whose columns are orthogonal with a common squared norm.
    pub fn fit_with_loadings(ts: &TensorSeries, z: Standardization, loadings: Matrix) -> Result<Self> {
        let p = ts.tensors.first().map_or(0, DenseTensor::len);
        if loadings.rows() != p || z.mu.len() != p {
            return Err(mismatch(format!("loadings have {} rows for {p} cells", loadings.rows())));
        }
        let g = loadings.t_matmul(&loadings)?;
        let c = g.get(0, 0);
        let dev = g.sub(&Matrix::identity(g.rows()).scale(c))?.max_abs();
        if !(c > 0.0) || dev > 1e-8 * c {
            return Err(invalid("loading columns must be orthogonal with equal norms"));
        }
        let x = standardized_rows(ts, &z)?;
        Self::with_rows(z, loadings, c, &x)
    }

    fn with_rows(z: Standardization, loadings: Matrix, norm: f64, x: &DMatrix<f64>) -> Result<Self> {
        let l = loadings.to_nalgebra();
        let s = x * l / norm;
        let scores = (0..s.nrows())
            .map(|t| s.row(t).iter().copied().collect())
            .collect();
        Ok(Self {
            standardization: z,
            loadings,
            norm,
            scores,
        })
    }

    pub fn factors(&self) -> usize {
        self.loadings.cols()
    }

    fn reconstruct(&self, s: &[f64]) -> Result<DenseTensor> {
        let x: Vec<f64> = (0..self.loadings.rows())
            .map(|c| self.loadings.row(c).iter().zip(s).map(|(a, b)| a * b).sum())
            .collect();
        let x = DenseTensor::new(self.standardization.dims().to_vec(), x)?;
        self.standardization.invert(&x)
    }

    pub fn fitted(&self) -> Result<Vec<DenseTensor>> {
        self.scores.iter().map(|s| self.reconstruct(s)).collect()
    }

    /// Forecasts every score series through the shared seasonal path.
    pub fn forecast(&self, n: usize, period: usize, model: ScoreModel) -> Result<Vec<DenseTensor>> {
        let paths: Vec<Vec<f64>> = (0..self.factors())
            .map(|k| {
                let series: Vec<f64> = self.scores.iter().map(|s| s[k]).collect();
                forecast_score_series(&series, period, n, model)
            })
            .collect::<Result<_>>()?;
        (0..n)
            .map(|h| {
                let s: Vec<f64> = paths.iter().map(|p| p[h]).collect();
                self.reconstruct(&s)
            })
            .collect()
    }
}

/// Per-provider PCA on the vectorized weekly matrices (day index fastest).
pub fn vfm_forecast(ms: &ProviderMatrixSeries, n: usize, cfg: &VfmConfig) -> Result<Vec<Matrix>> {
    let ts = ms.to_tensor_series()?;
    VectorFactorModel::fit_pca(&ts, cfg.factors)?
        .forecast(n, cfg.period, ScoreModel::Ar1)?
        .iter()
        .map(tensor_to_matrix)
        .collect()
}

pub(super) fn stacked_forecast(
    ts: &TensorSeries,
    n: usize,
    cfg: &VfmConfig,
    kind: BenchmarkKind,
) -> Result<BenchmarkForecast> {
    let joint = VectorFactorModel::fit_pca(ts, cfg.factors)?.forecast(n, cfg.period, ScoreModel::Ar1)?;
    let forecasts = (0..ts.n_providers())
        .map(|i| {
            joint
                .iter()
                .map(|y| {
                    let s = y.slice_first(i)?;
                    Ok(Matrix::from_fn(s.dims()[0], s.dims()[1], |a, b| s.get(&[a, b])))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(BenchmarkForecast {
        model: kind,
        providers: ts.providers.clone(),
        forecasts,
    })
}
