use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// `x_t = c + φ·x_{t−1} + e_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Fit {
    pub intercept: f64,
    pub coefficient: f64,
    /// Residual mean square.
    pub variance: f64,
}

/// Conditional least squares of `x_t` on `(1, x_{t−1})`.
pub fn fit_ar1(x: &[f64]) -> Result<Ar1Fit> {
    if x.len() < 3 {
        return Err(invalid(format!("AR(1) needs at least 3 points, got {}", x.len())));
    }
    let lagged = &x[..x.len() - 1];
    let target = &x[1..];
    let n = lagged.len() as f64;
    let mx = lagged.iter().sum::<f64>() / n;
    let my = target.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in lagged.iter().zip(target) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let scale: f64 = lagged.iter().map(|v| v * v).sum();
    if sxx <= 1e-20 * scale {
        return Err(Error::ConstantSeries);
    }
    let coefficient = sxy / sxx;
    let intercept = my - coefficient * mx;
    let rss: f64 = lagged
        .iter()
        .zip(target)
        .map(|(a, b)| {
            let e = b - intercept - coefficient * a;
            e * e
        })
        .sum();
    Ok(Ar1Fit {
        intercept,
        coefficient,
        variance: rss / n,
    })
}

/// Recursive forecasts `x̂_h = c + φ·x̂_{h−1}` starting from `last`.
pub fn forecast_ar1(fit: &Ar1Fit, last: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut prev = last;
    for _ in 0..n {
        prev = fit.intercept + fit.coefficient * prev;
        out.push(prev);
    }
    out
}

/// `x_t = c + Σ_i a_i·x_{t−i} + e_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub variance: f64,
    pub aic: f64,
}

impl ArFit {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// Recursive forecasts continuing `history`.
    pub fn forecast(&self, history: &[f64], n: usize) -> Vec<f64> {
        let p = self.order();
        let mut buf: Vec<f64> = history[history.len().saturating_sub(p)..].to_vec();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let v = self.intercept
                + self
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a * buf[buf.len() - 1 - i])
                    .sum::<f64>();
            buf.push(v);
            out.push(v);
        }
        out
    }
}

/// Least-squares AR(p) with intercept on targets `x[first..]`.
fn fit_on(x: &[f64], p: usize, first: usize) -> Result<ArFit> {
    let rows = x.len() - first;
    let design = DMatrix::from_fn(rows, p + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            x[first + r - c]
        }
    });
    let target = DVector::from_fn(rows, |r, _| x[first + r]);
    let svd = design.clone().svd(true, true);
    let top = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let beta = svd
        .solve(&target, 1e-12 * top)
        .map_err(|e| invalid(format!("AR({p}) least squares failed: {e}")))?;
    let resid = target - design * &beta;
    let rss = resid.norm_squared();
    let variance = rss / rows as f64;
    let mean_sq = x[first..].iter().map(|v| v * v).sum::<f64>() / rows as f64;
    let floored = variance.max(1e-20 * mean_sq).max(f64::MIN_POSITIVE);
    let aic = rows as f64 * floored.ln() + 2.0 * (p + 1) as f64;
    Ok(ArFit {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        variance,
        aic,
    })
}

/// AR(p) by least squares with intercept on all available targets.
pub fn fit_ar(x: &[f64], p: usize) -> Result<ArFit> {
    if p == 0 {
        return Err(invalid("AR order must be at least 1"));
    }
    if x.len() < 2 * p + 2 {
        return Err(invalid(format!("AR({p}) needs at least {} points", 2 * p + 2)));
    }
    check_variation(x)?;
    fit_on(x, p, p)
}

/// Chooses `1 ≤ p ≤ max_order` by AIC on a common estimation sample.
/// Ties go to the lower order.
pub fn fit_ar_aic(x: &[f64], max_order: usize) -> Result<ArFit> {
    if max_order == 0 {
        return Err(invalid("maximal AR order must be at least 1"));
    }
    if x.len() < 4 {
        return Err(invalid(format!("AR selection needs at least 4 points, got {}", x.len())));
    }
    check_variation(x)?;
    let cap = max_order.min((x.len() - 2) / 2).max(1);
    let mut best: Option<ArFit> = None;
    for p in 1..=cap {
        let fit = fit_on(x, p, cap)?;
        if best.as_ref().is_none_or(|b| fit.aic < b.aic) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one order tried"))
}

fn check_variation(x: &[f64]) -> Result<()> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let spread: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let scale: f64 = x.iter().map(|v| v * v).sum();
    if spread <= 1e-20 * scale {
        return Err(Error::ConstantSeries);
    }
    Ok(())
}
