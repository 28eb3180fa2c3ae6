use log::warn;
use serde::{Deserialize, Serialize};

use super::TensorSeries;
use crate::error::{invalid, mismatch, Result};
use crate::tensor::DenseTensor;

/// Relative floor applied to per-cell scale estimates.
pub const SIGMA_RELATIVE_FLOOR: f64 = 1e-8;
/// Absolute floor used when the cell mean is zero.
pub const SIGMA_ABSOLUTE_FLOOR: f64 = 1e-12;

/// Per-cell location and scale, both with dims `(N, S₁, …, S_M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mu: DenseTensor,
    pub sigma: DenseTensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationFit {
    pub standardization: Standardization,
    /// Cells whose scale was raised to the floor.
    pub clamped_cells: usize,
}

impl Standardization {
    pub fn new(mu: DenseTensor, sigma: DenseTensor) -> Result<Self> {
        if mu.dims() != sigma.dims() {
            return Err(mismatch("mu and sigma dims differ"));
        }
        if !mu.is_finite() || sigma.data().iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid("mu must be finite and sigma strictly positive"));
        }
        Ok(Self { mu, sigma })
    }

    /// Location 0, scale 1.
    pub fn identity(dims: &[usize]) -> Self {
        Self {
            mu: DenseTensor::zeros(dims),
            sigma: DenseTensor::filled(dims, 1.0),
        }
    }

    pub fn dims(&self) -> &[usize] {
        self.mu.dims()
    }

    /// `(y − μ) / σ` for one tensor.
    pub fn apply(&self, y: &DenseTensor) -> Result<DenseTensor> {
        let centered = y.sub(&self.mu)?;
        centered.zip_with(&self.sigma, |c, s| c / s)
    }

    /// `μ + σ ⊙ x` for one tensor.
    pub fn invert(&self, x: &DenseTensor) -> Result<DenseTensor> {
        self.mu.add(&self.sigma.hadamard(x)?)
    }

    /// Restricts to one provider's cells, keeping a unit leading mode.
    pub fn provider(&self, i: usize) -> Result<Standardization> {
        let one = |t: &DenseTensor| -> Result<DenseTensor> {
            let s = t.slice_first(i)?;
            let mut dims = vec![1];
            dims.extend_from_slice(s.dims());
            DenseTensor::new(dims, s.into_data())
        };
        Ok(Standardization {
            mu: one(&self.mu)?,
            sigma: one(&self.sigma)?,
        })
    }
}

/// Per-cell sample mean and (population) standard deviation over time.
pub fn estimate_standardization(ts: &TensorSeries) -> Result<StandardizationFit> {
    let t_len = ts.len();
    if t_len < 2 {
        return Err(invalid(format!("standardization needs T >= 2, got {t_len}")));
    }
    let dims = ts.dims().to_vec();
    let cells = ts.tensors[0].len();
    let mut mu = vec![0.0; cells];
    for x in &ts.tensors {
        for (m, v) in mu.iter_mut().zip(x.data()) {
            *m += v;
        }
    }
    for m in &mut mu {
        *m /= t_len as f64;
    }
    let mut var = vec![0.0; cells];
    for x in &ts.tensors {
        for ((s, v), m) in var.iter_mut().zip(x.data()).zip(&mu) {
            *s += (v - m) * (v - m);
        }
    }
    let mut clamped = 0;
    let sigma: Vec<f64> = var
        .iter()
        .zip(&mu)
        .map(|(v, m)| {
            let sd = (v / t_len as f64).sqrt();
            let floor = (SIGMA_RELATIVE_FLOOR * m.abs()).max(SIGMA_ABSOLUTE_FLOOR);
            if sd < floor {
                clamped += 1;
                floor
            } else {
                sd
            }
        })
        .collect();
    if clamped > 0 {
        warn!("{clamped} cell(s) have near-zero variance; scale clamped to floor");
    }
    Ok(StandardizationFit {
        standardization: Standardization {
            mu: DenseTensor::new(dims.clone(), mu)?,
            sigma: DenseTensor::new(dims, sigma)?,
        },
        clamped_cells: clamped,
    })
}

pub fn standardize(ts: &TensorSeries, z: &Standardization) -> Result<TensorSeries> {
    map_series(ts, |x| z.apply(x))
}

pub fn destandardize(ts: &TensorSeries, z: &Standardization) -> Result<TensorSeries> {
    map_series(ts, |x| z.invert(x))
}

fn map_series(
    ts: &TensorSeries,
    f: impl Fn(&DenseTensor) -> Result<DenseTensor>,
) -> Result<TensorSeries> {
    let tensors = ts.tensors.iter().map(f).collect::<Result<Vec<_>>>()?;
    Ok(TensorSeries {
        providers: ts.providers.clone(),
        tensors,
        period_starts: ts.period_starts.clone(),
    })
}
