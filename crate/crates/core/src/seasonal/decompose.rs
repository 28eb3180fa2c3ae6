use std::ops::Range;

use crate::error::{invalid, Result};

/// Classical additive decomposition `x = trend + seasonal + remainder`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalDecomp {
    pub period: usize,
    /// One index per position in the cycle, summing to zero.
    pub seasonal: Vec<f64>,
    /// Centered moving average, edges filled with the nearest defined value.
    pub trend: Vec<f64>,
    pub remainder: Vec<f64>,
    /// Positions where the moving average is defined.
    pub interior: Range<usize>,
}

/// Centered moving average trend (2×m for even m), positionwise mean of the
/// detrended series as seasonal index, re-centered to sum to zero.
pub fn classical_decompose(x: &[f64], m: usize) -> Result<SeasonalDecomp> {
    if m < 2 {
        return Err(invalid(format!("seasonal period must be >= 2, got {m}")));
    }
    let t_len = x.len();
    if t_len < 2 * m {
        return Err(invalid(format!(
            "decomposition with period {m} needs at least {} points, got {t_len}",
            2 * m
        )));
    }
    let half = m / 2;
    let interior = half..t_len - half;
    let mut trend = vec![0.0; t_len];
    for t in interior.clone() {
        trend[t] = if m % 2 == 1 {
            x[t - half..=t + half].iter().sum::<f64>() / m as f64
        } else {
            let inner: f64 = x[t + 1 - half..t + half].iter().sum();
            (0.5 * x[t - half] + inner + 0.5 * x[t + half]) / m as f64
        };
    }

    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for t in interior.clone() {
        sums[t % m] += x[t] - trend[t];
        counts[t % m] += 1;
    }
    let mut seasonal: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let center = seasonal.iter().sum::<f64>() / m as f64;
    for s in &mut seasonal {
        *s -= center;
    }

    let (lo, hi) = (trend[interior.start], trend[interior.end - 1]);
    trend[..interior.start].fill(lo);
    trend[interior.end..].fill(hi);
    let remainder = x
        .iter()
        .enumerate()
        .map(|(t, v)| v - trend[t] - seasonal[t % m])
        .collect();
    Ok(SeasonalDecomp {
        period: m,
        seasonal,
        trend,
        remainder,
        interior,
    })
}
