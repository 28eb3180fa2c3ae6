//! Factor-series forecasting: classical additive decomposition, an
//! autoregression on the seasonally adjusted series, and seasonal
//! re-composition of the recursive forecasts.

mod ar;
mod decompose;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ar::{fit_ar, fit_ar1, fit_ar_aic, forecast_ar1, Ar1Fit, ArFit};
pub use decompose::{classical_decompose, SeasonalDecomp};

use crate::error::{invalid, mismatch, Error, Result};
use crate::panel::Standardization;
use crate::tensor::DenseTensor;
use crate::tfm::{reconstruct, FactorSeries, LoadingSet};

/// Default seasonal period for weekly factor series.
pub const DEFAULT_FACTOR_PERIOD: usize = 52;

/// Dynamics fitted to a seasonally adjusted score series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreModel {
    Ar1,
    /// AR(p) with `1 ≤ p ≤ max_order` chosen by AIC.
    AutoAr { max_order: usize },
}

/// `ℱ̃_{T+h|T}` for `h = 1..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorForecast {
    pub horizon: usize,
    pub tensors: Vec<DenseTensor>,
}

/// Forecasts one scalar score series `n` steps ahead.
///
/// Removes the classical seasonal component with period `m`, fits `model`
/// to the adjusted series (trend kept), forecasts recursively and adds the
/// seasonal index of each future position back. An adjusted series with
/// no variation is forecast flat at its mean.
pub fn forecast_score_series(x: &[f64], m: usize, n: usize, model: ScoreModel) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    let dec = classical_decompose(x, m)?;
    let adjusted: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(t, v)| v - dec.seasonal[t % m])
        .collect();
    let t_len = x.len();

    let mean = adjusted.iter().sum::<f64>() / t_len as f64;
    let spread: f64 = adjusted.iter().map(|v| (v - mean) * (v - mean)).sum();
    let scale: f64 = x.iter().map(|v| v * v).sum();
    let flat = || vec![mean; n];
    let path = if spread <= 1e-20 * scale {
        flat()
    } else {
        let fitted = match model {
            ScoreModel::Ar1 => fit_ar1(&adjusted).map(|fit| forecast_ar1(&fit, adjusted[t_len - 1], n)),
            ScoreModel::AutoAr { max_order } => {
                fit_ar_aic(&adjusted, max_order).map(|fit| fit.forecast(&adjusted, n))
            }
        };
        match fitted {
            Ok(p) => p,
            Err(Error::ConstantSeries) => flat(),
            Err(e) => return Err(e),
        }
    };
    Ok(path
        .into_iter()
        .enumerate()
        .map(|(h, v)| v + dec.seasonal[(t_len + h) % m])
        .collect())
}

/// Forecasts every factor coordinate with a common period `m` and AR(1).
pub fn forecast_factors(f: &FactorSeries, m: usize, n: usize) -> Result<FactorForecast> {
    let coords = f.tensors.first().map_or(0, DenseTensor::len);
    forecast_factors_with(f, &vec![m; coords], n, ScoreModel::Ar1)
}

/// Per-coordinate seasonal periods, indexed by canonical factor offset.
pub fn forecast_factors_with(
    f: &FactorSeries,
    periods: &[usize],
    n: usize,
    model: ScoreModel,
) -> Result<FactorForecast> {
    let first = f.tensors.first().ok_or_else(|| invalid("empty factor series"))?;
    if periods.len() != first.len() {
        return Err(mismatch(format!(
            "{} periods for {} factor coordinates",
            periods.len(),
            first.len()
        )));
    }
    let paths: Vec<Vec<f64>> = (0..first.len())
        .into_par_iter()
        .map(|c| forecast_score_series(&f.coordinate(c), periods[c], n, model))
        .collect::<Result<_>>()?;
    let tensors = (0..n)
        .map(|h| {
            DenseTensor::new(
                first.dims().to_vec(),
                paths.iter().map(|p| p[h]).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FactorForecast { horizon: n, tensors })
}

/// Observation-space forecasts through the same reconstruction as fitted values.
pub fn forecast_observations(
    ff: &FactorForecast,
    l: &LoadingSet,
    z: &Standardization,
) -> Result<Vec<DenseTensor>> {
    ff.tensors.iter().map(|f| reconstruct(f, l, z)).collect()
}
