use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ProviderMatrixSeries;
use crate::error::{invalid, Result};
use crate::panel::estimate_standardization;
use crate::seasonal::{forecast_score_series, ScoreModel, DEFAULT_FACTOR_PERIOD};
use crate::tensor::{symmetric_eigen, DenseTensor, Matrix};

/// Share of curve variance the automatic component count must explain.
pub const AUTO_VARIANCE_SHARE: f64 = 0.95;
pub const AUTO_MAX_COMPONENTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentCount {
    /// Smallest count explaining the target variance share, capped.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpcaConfig {
    pub components: ComponentCount,
    pub period: usize,
    pub max_ar_order: usize,
}

impl Default for FpcaConfig {
    fn default() -> Self {
        Self {
            components: ComponentCount::Auto,
            period: DEFAULT_FACTOR_PERIOD,
            max_ar_order: 5,
        }
    }
}

/// Principal components of a set of curves on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePca {
    pub mean: Vec<f64>,
    /// Grid points × components, orthonormal columns.
    pub components: Matrix,
    /// `scores[t][k]`.
    pub scores: Vec<Vec<f64>>,
}

impl CurvePca {
    pub fn fit(curves: &[Vec<f64>], count: ComponentCount) -> Result<Self> {
        let t_len = curves.len();
        let grid = curves.first().map_or(0, Vec::len);
        if t_len < 2 || grid == 0 {
            return Err(invalid("curve PCA needs at least two non-empty curves"));
        }
        let mut mean = vec![0.0; grid];
        for c in curves {
            for (m, v) in mean.iter_mut().zip(c) {
                *m += v / t_len as f64;
            }
        }
        let centered: Vec<Vec<f64>> = curves
            .iter()
            .map(|c| c.iter().zip(&mean).map(|(v, m)| v - m).collect())
            .collect();
        let cov = Matrix::from_fn(grid, grid, |a, b| {
            centered.iter().map(|c| c[a] * c[b]).sum::<f64>() / t_len as f64
        });
        let (vecs, vals) = symmetric_eigen(&cov)?;
        let total: f64 = vals.iter().map(|v| v.max(0.0)).sum();
        let level = mean.iter().map(|m| m * m).sum::<f64>() / grid as f64;
        let flat = total <= 1e-20 * level.max(f64::MIN_POSITIVE);
        let k = match count {
            ComponentCount::Fixed(k) if k > grid => {
                return Err(invalid(format!("{k} components on a {grid}-point grid")))
            }
            ComponentCount::Fixed(k) => k,
            ComponentCount::Auto if flat => 0,
            ComponentCount::Auto => {
                let mut acc = 0.0;
                let mut k = 0;
                for v in &vals {
                    acc += v.max(0.0);
                    k += 1;
                    if acc >= AUTO_VARIANCE_SHARE * total {
                        break;
                    }
                }
                k.min(AUTO_MAX_COMPONENTS)
            }
        };
        let components = vecs.leading_columns(k);
        let scores = centered
            .iter()
            .map(|c| {
                (0..k)
                    .map(|j| (0..grid).map(|g| components.get(g, j) * c[g]).sum())
                    .collect()
            })
            .collect();
        Ok(Self {
            mean,
            components,
            scores,
        })
    }

    pub fn curve(&self, scores: &[f64]) -> Vec<f64> {
        self.mean
            .iter()
            .enumerate()
            .map(|(g, m)| {
                m + scores
                    .iter()
                    .enumerate()
                    .map(|(j, s)| self.components.get(g, j) * s)
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn fitted(&self) -> Vec<Vec<f64>> {
        self.scores.iter().map(|s| self.curve(s)).collect()
    }

    pub fn forecast(&self, n: usize, period: usize, model: ScoreModel) -> Result<Vec<Vec<f64>>> {
        let k = self.components.cols();
        let paths: Vec<Vec<f64>> = (0..k)
            .map(|j| {
                let s: Vec<f64> = self.scores.iter().map(|row| row[j]).collect();
                forecast_score_series(&s, period, n, model)
            })
            .collect::<Result<_>>()?;
        Ok((0..n)
            .map(|h| self.curve(&paths.iter().map(|p| p[h]).collect::<Vec<_>>()))
            .collect())
    }
}

/// Standardized daily curves: `out[d][t]` is row `d` of week `t`.
fn daily_curves(ms: &ProviderMatrixSeries, z_mu: &DenseTensor, z_sigma: &DenseTensor) -> Vec<Vec<Vec<f64>>> {
    let (days, hours) = ms.matrices[0].shape();
    (0..days)
        .map(|d| {
            ms.matrices
                .iter()
                .map(|m| {
                    (0..hours)
                        .map(|h| (m.get(d, h) - z_mu.get(&[0, d, h])) / z_sigma.get(&[0, d, h]))
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Fitted in-sample week matrices, one curve model per row.
pub fn fpca_fitted(ms: &ProviderMatrixSeries, count: ComponentCount) -> Result<Vec<Matrix>> {
    let ts = ms.to_tensor_series()?;
    let z = estimate_standardization(&ts)?.standardization;
    let curves = daily_curves(ms, &z.mu, &z.sigma);
    let fits: Vec<Vec<Vec<f64>>> = curves
        .iter()
        .map(|c| CurvePca::fit(c, count).map(|p| p.fitted()))
        .collect::<Result<_>>()?;
    Ok(assemble(&fits, &z.mu, &z.sigma, ms.len()))
}

fn assemble(rows: &[Vec<Vec<f64>>], mu: &DenseTensor, sigma: &DenseTensor, n: usize) -> Vec<Matrix> {
    let hours = mu.dims()[2];
    (0..n)
        .map(|t| {
            Matrix::from_fn(rows.len(), hours, |d, h| {
                mu.get(&[0, d, h]) + sigma.get(&[0, d, h]) * rows[d][t][h]
            })
        })
        .collect()
}

/// Per day-of-week curve PCA with AIC-selected AR scores; day `d`'s
/// forecast curve becomes row `d` of each forecast week.
pub fn fpca_forecast(ms: &ProviderMatrixSeries, n: usize, cfg: &FpcaConfig) -> Result<Vec<Matrix>> {
    let ts = ms.to_tensor_series()?;
    let z = estimate_standardization(&ts)?.standardization;
    let curves = daily_curves(ms, &z.mu, &z.sigma);
    let model = ScoreModel::AutoAr {
        max_order: cfg.max_ar_order,
    };
    let rows: Vec<Vec<Vec<f64>>> = curves
        .par_iter()
        .map(|c| CurvePca::fit(c, cfg.components)?.forecast(n, cfg.period, model))
        .collect::<Result<_>>()?;
    Ok(assemble(&rows, &z.mu, &z.sigma, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_count_covers_variance() {
        let curves: Vec<Vec<f64>> = (0..40)
            .map(|t| {
                let a = (t as f64 * 0.7).sin();
                let b = 0.01 * (t as f64 * 1.3).cos();
                (0..5).map(|g| a * (g as f64 + 1.0) + b * (g as f64 - 2.0)).collect()
            })
            .collect();
        let p = CurvePca::fit(&curves, ComponentCount::Auto).unwrap();
        assert_eq!(p.components.cols(), 1);
        let all = CurvePca::fit(&curves, ComponentCount::Fixed(5)).unwrap();
        for (f, c) in all.fitted().iter().zip(&curves) {
            for (a, b) in f.iter().zip(c) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        assert!(CurvePca::fit(&curves, ComponentCount::Fixed(6)).is_err());
    }

    #[test]
    fn constant_curves_forecast_mean() {
        let curves = vec![vec![1.0, 2.0, 3.0]; 110];
        let p = CurvePca::fit(&curves, ComponentCount::Auto).unwrap();
        assert_eq!(p.components.cols(), 0);
        let f = p.forecast(2, 52, ScoreModel::AutoAr { max_order: 5 }).unwrap();
        for curve in &f {
            for (a, b) in curve.iter().zip([1.0, 2.0, 3.0]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
