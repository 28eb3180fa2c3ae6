//! Rolling-window pseudo-out-of-sample evaluation.
//!
//! Window `w` trains on tensors `w .. w + T_train` and is scored on the
//! tensor `n` steps after its end, for `w < T_test − n`. The provider's
//! squared Frobenius error is averaged over windows and cells, then divided
//! by the average per-window variance of the out-of-sample cells.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::panel::TensorSeries;
use crate::seasonal::{forecast_factors_with, forecast_observations, ScoreModel, DEFAULT_FACTOR_PERIOD};
use crate::tensor::DenseTensor;
use crate::tfm::{Ranks, TensorFactorModel};

/// One week, month, quarter and semester ahead.
pub const DEFAULT_HORIZONS: [usize; 4] = [1, 4, 13, 26];

/// A training window over an immutable series.
#[derive(Debug, Clone)]
pub struct Window<'a> {
    pub series: &'a TensorSeries,
    pub train: Range<usize>,
}

impl Window<'_> {
    pub fn training(&self) -> Result<TensorSeries> {
        self.series.slice(self.train.clone())
    }
}

/// Anything that produces `n` observation-space forecasts from a window.
pub trait Forecaster: Send + Sync {
    fn name(&self) -> &str;
    fn forecast(&self, window: &Window<'_>, n: usize) -> Result<Vec<DenseTensor>>;
}

/// Seasonal period per factor coordinate: a default plus explicit overrides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorPeriods {
    pub default: usize,
    /// `(canonical factor offset, period)` pairs.
    #[serde(default)]
    pub overrides: Vec<(usize, usize)>,
}

impl Default for FactorPeriods {
    fn default() -> Self {
        Self {
            default: DEFAULT_FACTOR_PERIOD,
            overrides: Vec::new(),
        }
    }
}

impl FactorPeriods {
    pub fn uniform(m: usize) -> Self {
        Self {
            default: m,
            overrides: Vec::new(),
        }
    }

    pub fn for_coords(&self, coords: usize) -> Result<Vec<usize>> {
        let mut out = vec![self.default; coords];
        for &(c, m) in &self.overrides {
            *out.get_mut(c)
                .ok_or_else(|| invalid(format!("period override for factor {c} of {coords}")))? = m;
        }
        Ok(out)
    }

    pub fn max(&self) -> usize {
        self.overrides.iter().map(|o| o.1).fold(self.default, usize::max)
    }
}

/// The tensor factor model: fit on the window, forecast factors, reconstruct.
#[derive(Debug, Clone)]
pub struct TfmForecaster {
    pub label: String,
    pub ranks: Ranks,
    pub periods: FactorPeriods,
    pub score_model: ScoreModel,
}

impl TfmForecaster {
    pub fn new(ranks: Ranks, periods: FactorPeriods) -> Self {
        Self {
            label: "TFM".into(),
            ranks,
            periods,
            score_model: ScoreModel::Ar1,
        }
    }
}

/// Fits a tensor factor model and forecasts `n` steps; data with no
/// variation around the cell means is forecast as the means.
pub fn forecast_tensor_model(
    train: &TensorSeries,
    ranks: &Ranks,
    periods: &FactorPeriods,
    score_model: ScoreModel,
    n: usize,
) -> Result<Vec<DenseTensor>> {
    let model = match TensorFactorModel::fit(train, ranks) {
        Ok(m) => m,
        Err(Error::DegenerateCovariance(_)) => {
            let fit = crate::panel::estimate_standardization(train)?;
            return Ok(vec![fit.standardization.mu; n]);
        }
        Err(e) => return Err(e),
    };
    let coords = ranks.factor_dims().iter().product();
    let ff = forecast_factors_with(&model.factors, &periods.for_coords(coords)?, n, score_model)?;
    forecast_observations(&ff, &model.loadings, &model.standardization)
}

impl Forecaster for TfmForecaster {
    fn name(&self) -> &str {
        &self.label
    }

    fn forecast(&self, window: &Window<'_>, n: usize) -> Result<Vec<DenseTensor>> {
        forecast_tensor_model(&window.training()?, &self.ranks, &self.periods, self.score_model, n)
    }
}

/// Divide the MSE by the out-of-sample variance or standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    #[default]
    Variance,
    StdDev,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingPlan {
    pub train_length: usize,
    pub horizons: Vec<usize>,
    #[serde(default)]
    pub normalizer: Normalizer,
}

impl RollingPlan {
    pub fn new(train_length: usize, horizons: Vec<usize>) -> Self {
        Self {
            train_length,
            horizons,
            normalizer: Normalizer::Variance,
        }
    }

    pub fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(0)
    }

    /// Requires at least one scored window for the longest horizon.
    pub fn validate(&self, t_len: usize) -> Result<()> {
        if self.train_length < 2 {
            return Err(invalid("training window must hold at least 2 periods"));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(invalid("horizons must be non-empty and >= 1"));
        }
        if self.train_length + self.max_horizon() >= t_len {
            return Err(invalid(format!(
                "train length {} + horizon {} leaves no window in T={t_len}",
                self.train_length,
                self.max_horizon()
            )));
        }
        Ok(())
    }

    pub fn test_length(&self, t_len: usize) -> usize {
        t_len - self.train_length
    }

    /// Number of scored windows `W = T_test − n`.
    pub fn windows(&self, t_len: usize, n: usize) -> usize {
        self.test_length(t_len).saturating_sub(n)
    }

    /// Index of the tensor scored for window `w` at horizon `n`.
    pub fn target(&self, w: usize, n: usize) -> usize {
        w + self.train_length + n - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub ranks: String,
    pub config_hash: String,
    pub span: String,
    pub train_length: usize,
    pub test_length: usize,
    pub horizons: Vec<usize>,
    pub normalizer: Normalizer,
}

/// One (model, horizon, provider) entry; failed cells carry the error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub model: String,
    pub horizon: usize,
    pub provider: String,
    pub relative_mse: Option<f64>,
    pub mse: Option<f64>,
    pub normalizer: Option<f64>,
    pub windows: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub model: String,
    pub horizon: usize,
    pub provider: String,
    pub window: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: ReportMetadata,
    pub cells: Vec<ReportCell>,
    pub traces: Vec<TraceRow>,
}

impl EvalReport {
    pub fn cell(&self, model: &str, horizon: usize, provider: &str) -> Option<&ReportCell> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.horizon == horizon && c.provider == provider)
    }

    pub fn models(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.model) {
                out.push(c.model.clone());
            }
        }
        out
    }
}

/// `Σ (y − ŷ)²` over provider `i`'s cells.
pub fn provider_squared_error(y: &DenseTensor, y_hat: &DenseTensor, i: usize) -> Result<f64> {
    if y.dims() != y_hat.dims() {
        return Err(mismatch(format!(
            "forecast dims {:?} differ from data {:?}",
            y_hat.dims(),
            y.dims()
        )));
    }
    let a = y.slice_first(i)?;
    let b = y_hat.slice_first(i)?;
    Ok(a.data().iter().zip(b.data()).map(|(p, q)| (p - q) * (p - q)).sum())
}

/// Per-cell population moments of provider `i` over `range`, averaged over cells.
fn out_of_sample_spread(ts: &TensorSeries, i: usize, range: Range<usize>, norm: Normalizer) -> Result<f64> {
    let slices: Vec<DenseTensor> = ts.tensors[range]
        .iter()
        .map(|y| y.slice_first(i))
        .collect::<Result<_>>()?;
    let cells = slices[0].len();
    let count = slices.len() as f64;
    let mut total = 0.0;
    for c in 0..cells {
        let mean = slices.iter().map(|s| s.data()[c]).sum::<f64>() / count;
        let var = slices.iter().map(|s| (s.data()[c] - mean).powi(2)).sum::<f64>() / count;
        total += match norm {
            Normalizer::Variance => var,
            Normalizer::StdDev => var.sqrt(),
        };
    }
    Ok(total / cells as f64)
}

struct WindowResult {
    forecasts: std::result::Result<Vec<DenseTensor>, String>,
}

/// Evaluates every model over every window and horizon of `plan`.
pub fn rolling_evaluate(
    models: &[&dyn Forecaster],
    ts: &TensorSeries,
    plan: &RollingPlan,
    metadata: ReportMetadata,
) -> Result<EvalReport> {
    let t_len = ts.len();
    plan.validate(t_len)?;
    let t_test = plan.test_length(t_len);
    let min_h = plan.horizons.iter().copied().min().expect("validated non-empty");
    let n_windows = t_test - min_h;
    let n_providers = ts.n_providers();

    let mut horizons = plan.horizons.clone();
    horizons.sort_unstable();
    horizons.dedup();

    // Normalizer per (provider, window) depends only on the data.
    let spread: Vec<Vec<f64>> = (0..n_providers)
        .map(|i| {
            (0..n_windows)
                .into_par_iter()
                .map(|w| out_of_sample_spread(ts, i, w + plan.train_length..t_len, plan.normalizer))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    let mut traces = Vec::new();
    for model in models {
        let results: Vec<WindowResult> = (0..n_windows)
            .into_par_iter()
            .map(|w| {
                let steps = horizons
                    .iter()
                    .copied()
                    .filter(|&n| w < t_test - n.min(t_test))
                    .max()
                    .unwrap_or(min_h);
                let window = Window {
                    series: ts,
                    train: w..w + plan.train_length,
                };
                let forecasts = model
                    .forecast(&window, steps)
                    .and_then(|f| {
                        if f.len() < steps {
                            Err(mismatch(format!("{} forecasts for horizon {steps}", f.len())))
                        } else {
                            Ok(f)
                        }
                    })
                    .map_err(|e| format!("window {w}: {e}"));
                WindowResult { forecasts }
            })
            .collect();

        for &n in &horizons {
            let w_count = plan.windows(t_len, n);
            let failure = results[..w_count]
                .iter()
                .find_map(|r| r.forecasts.as_ref().err().cloned());
            for (i, provider) in ts.providers.iter().enumerate() {
                let mut cell = ReportCell {
                    model: model.name().to_string(),
                    horizon: n,
                    provider: provider.clone(),
                    relative_mse: None,
                    mse: None,
                    normalizer: None,
                    windows: w_count,
                    error: failure.clone(),
                };
                if failure.is_none() {
                    match score_cell(ts, plan, &results, &spread[i], i, n, w_count) {
                        Ok((sq, mse, norm)) => {
                            let cells_per_provider = (ts.tensors[0].len() / n_providers) as f64;
                            traces.extend(sq.iter().enumerate().map(|(w, e)| TraceRow {
                                model: cell.model.clone(),
                                horizon: n,
                                provider: provider.clone(),
                                window: w,
                                mse: e / cells_per_provider,
                            }));
                            cell.mse = Some(mse);
                            cell.normalizer = Some(norm);
                            if norm > 0.0 {
                                cell.relative_mse = Some(mse / norm);
                            } else {
                                cell.error = Some("out-of-sample variance is zero".into());
                            }
                        }
                        Err(e) => cell.error = Some(e.to_string()),
                    }
                }
                cells.push(cell);
            }
        }
    }
    Ok(EvalReport {
        metadata,
        cells,
        traces,
    })
}

fn score_cell(
    ts: &TensorSeries,
    plan: &RollingPlan,
    results: &[WindowResult],
    spread: &[f64],
    i: usize,
    n: usize,
    w_count: usize,
) -> Result<(Vec<f64>, f64, f64)> {
    let cells = (ts.tensors[0].len() / ts.n_providers()) as f64;
    let mut sq = Vec::with_capacity(w_count);
    for (w, r) in results[..w_count].iter().enumerate() {
        let f = r.forecasts.as_ref().expect("checked for failures");
        let y = &ts.tensors[plan.target(w, n)];
        let e = provider_squared_error(y, &f[n - 1], i)?;
        if !e.is_finite() {
            return Err(invalid(format!("non-finite forecast error in window {w}")));
        }
        sq.push(e);
    }
    let mse = sq.iter().sum::<f64>() / (w_count as f64 * cells);
    let norm = spread[..w_count].iter().sum::<f64>() / w_count as f64;
    Ok((sq, mse, norm))
}
