use serde::{Deserialize, Serialize};

use super::{tensor_to_matrix, ProviderMatrixSeries};
use crate::error::Result;
use crate::eval::{forecast_tensor_model, FactorPeriods};
use crate::seasonal::{ScoreModel, DEFAULT_FACTOR_PERIOD};
use crate::tensor::Matrix;
use crate::tfm::Ranks;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfmConfig {
    pub k_day: usize,
    pub k_hour: usize,
    pub period: usize,
}

impl Default for MfmConfig {
    fn default() -> Self {
        Self {
            k_day: 1,
            k_hour: 2,
            period: DEFAULT_FACTOR_PERIOD,
        }
    }
}

/// Matrix factor model `X_t = B⁽¹⁾ F_t B⁽²⁾ᵀ + E_t` for one provider: the
/// tensor estimator with a single, unit cross-sectional mode.
pub fn mfm_forecast(ms: &ProviderMatrixSeries, n: usize, cfg: &MfmConfig) -> Result<Vec<Matrix>> {
    let ts = ms.to_tensor_series()?;
    let ranks = Ranks::new(1, vec![cfg.k_day, cfg.k_hour]);
    forecast_tensor_model(&ts, &ranks, &FactorPeriods::uniform(cfg.period), ScoreModel::Ar1, n)?
        .iter()
        .map(tensor_to_matrix)
        .collect()
}
