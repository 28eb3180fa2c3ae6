//! Comparison forecasters run per provider on the `S₁ × S₂` weekly matrices:
//! a matrix factor model, a vector factor model on the vectorized weeks, and
//! a functional PCA forecaster on the daily curves. All three see the same
//! per-cell standardized inputs as the tensor model and forecast their
//! scores through [`forecast_score_series`](crate::seasonal::forecast_score_series).

mod fpca;
mod mfm;
mod vfm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fpca::{fpca_fitted, fpca_forecast, ComponentCount, CurvePca, FpcaConfig};
pub use mfm::{mfm_forecast, MfmConfig};
pub use vfm::{vfm_forecast, VectorFactorModel, VfmConfig};

use crate::error::{mismatch, Result};
use crate::eval::{Forecaster, Window};
use crate::panel::TensorSeries;
use crate::tensor::{DenseTensor, Matrix};

/// One provider's weekly `S₁ × S₂` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderMatrixSeries {
    pub provider: String,
    pub matrices: Vec<Matrix>,
}

impl ProviderMatrixSeries {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// As a one-provider `1 × S₁ × S₂` tensor series.
    pub fn to_tensor_series(&self) -> Result<TensorSeries> {
        let tensors = self.matrices.iter().map(matrix_to_tensor).collect();
        let mut ts = TensorSeries::unlabeled(tensors)?;
        ts.providers = vec![self.provider.clone()];
        Ok(ts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BenchmarkKind {
    Mfm,
    Vfm,
    Fpca,
}

impl BenchmarkKind {
    pub fn tag(self) -> &'static str {
        match self {
            BenchmarkKind::Mfm => "MFM",
            BenchmarkKind::Vfm => "VFM",
            BenchmarkKind::Fpca => "FTS",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkForecast {
    pub model: BenchmarkKind,
    pub providers: Vec<String>,
    /// `forecasts[i][h]` is provider `i`'s step-`h+1` matrix.
    pub forecasts: Vec<Vec<Matrix>>,
}

pub(crate) fn matrix_to_tensor(m: &Matrix) -> DenseTensor {
    DenseTensor::from_fn(&[1, m.rows(), m.cols()], |i| m.get(i[1], i[2]))
}

pub(crate) fn tensor_to_matrix(t: &DenseTensor) -> Result<Matrix> {
    match t.dims() {
        &[1, r, c] => Ok(Matrix::from_fn(r, c, |a, b| t.get(&[0, a, b]))),
        d => Err(mismatch(format!("expected a 1×S₁×S₂ tensor, got {d:?}"))),
    }
}

/// Splits a three-mode series into per-provider matrix series.
pub fn provider_matrices(ts: &TensorSeries) -> Result<Vec<ProviderMatrixSeries>> {
    if ts.dims().len() != 3 {
        return Err(mismatch(format!(
            "benchmarks need N × S₁ × S₂ tensors, got dims {:?}",
            ts.dims()
        )));
    }
    ts.providers
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let matrices = ts
                .tensors
                .iter()
                .map(|y| {
                    let s = y.slice_first(i)?;
                    Ok(Matrix::from_fn(s.dims()[0], s.dims()[1], |a, b| s.get(&[a, b])))
                })
                .collect::<Result<_>>()?;
            Ok(ProviderMatrixSeries {
                provider: p.clone(),
                matrices,
            })
        })
        .collect()
}

/// Benchmark choice with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Benchmark {
    Mfm(MfmConfig),
    Vfm(VfmConfig),
    Fpca(FpcaConfig),
}

impl Benchmark {
    pub fn kind(&self) -> BenchmarkKind {
        match self {
            Benchmark::Mfm(_) => BenchmarkKind::Mfm,
            Benchmark::Vfm(_) => BenchmarkKind::Vfm,
            Benchmark::Fpca(_) => BenchmarkKind::Fpca,
        }
    }

    /// Per-provider forecasts, run in parallel and assembled in provider order.
    pub fn forecast_all(&self, ts: &TensorSeries, n: usize) -> Result<BenchmarkForecast> {
        if let Benchmark::Vfm(cfg) = self {
            if cfg.stacked {
                return vfm::stacked_forecast(ts, n, cfg, self.kind());
            }
        }
        let series = provider_matrices(ts)?;
        let forecasts = series
            .par_iter()
            .map(|ms| match self {
                Benchmark::Mfm(c) => mfm_forecast(ms, n, c),
                Benchmark::Vfm(c) => vfm_forecast(ms, n, c),
                Benchmark::Fpca(c) => fpca_forecast(ms, n, c),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BenchmarkForecast {
            model: self.kind(),
            providers: ts.providers.clone(),
            forecasts,
        })
    }
}

/// Stacks per-provider forecasts back into `N × S₁ × S₂` tensors.
pub fn stack_forecast(bf: &BenchmarkForecast) -> Result<Vec<DenseTensor>> {
    let first = bf.forecasts.first().ok_or_else(|| mismatch("no providers"))?;
    let n = first.len();
    if bf.forecasts.iter().any(|f| f.len() != n) {
        return Err(mismatch("providers have different forecast lengths"));
    }
    let (r, c) = first.first().map(Matrix::shape).unwrap_or((0, 0));
    (0..n)
        .map(|h| {
            Ok(DenseTensor::from_fn(&[bf.forecasts.len(), r, c], |i| {
                bf.forecasts[i[0]][h].get(i[1], i[2])
            }))
        })
        .collect()
}

/// A benchmark usable by the rolling evaluator.
#[derive(Debug, Clone)]
pub struct BenchmarkForecaster {
    pub label: String,
    pub benchmark: Benchmark,
}

impl BenchmarkForecaster {
    pub fn new(benchmark: Benchmark) -> Self {
        Self {
            label: benchmark.kind().tag().to_string(),
            benchmark,
        }
    }
}

impl Forecaster for BenchmarkForecaster {
    fn name(&self) -> &str {
        &self.label
    }

    fn forecast(&self, window: &Window<'_>, n: usize) -> Result<Vec<DenseTensor>> {
        let bf = self.benchmark.forecast_all(&window.training()?, n)?;
        stack_forecast(&bf)
    }
}
