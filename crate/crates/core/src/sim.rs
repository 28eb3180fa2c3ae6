//! Synthetic multi-level factor panels with known ground truth.
//!
//! Core factors are seasonal sinusoids plus an AR(1) component. Each seasonal
//! level `j` maps the factor through `B⁽ʲ⁾` and adds its own shock `η⁽ʲ⁾`;
//! the cross-section then applies `Λ` and idiosyncratic noise `ν`, and the
//! result is placed on the per-cell location/scale `μ + σ ⊙ ε`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::panel::{Standardization, TensorSeries};
use crate::tensor::{DenseTensor, Matrix};
use crate::tfm::{FactorSeries, LoadingSet, Ranks};

/// Temporal process of each core factor coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactorProcess {
    pub level: f64,
    pub ar_coefficient: f64,
    pub innovation_sd: f64,
    pub seasonal_amplitudes: Vec<f64>,
    pub seasonal_periods: Vec<f64>,
}

impl Default for FactorProcess {
    fn default() -> Self {
        Self {
            level: 0.0,
            ar_coefficient: 0.5,
            innovation_sd: 1.0,
            seasonal_amplitudes: vec![2.0],
            seasonal_periods: vec![52.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    /// `(N, S₁, …, S_M)`.
    pub dims: Vec<usize>,
    pub ranks: Ranks,
    pub periods: usize,
    #[serde(default)]
    pub factor: FactorProcess,
    /// Standard deviation of the idiosyncratic noise ν.
    #[serde(default)]
    pub noise_sd: f64,
    /// Standard deviation of η⁽ʲ⁾ per seasonal level; empty means all zero.
    #[serde(default)]
    pub level_sd: Vec<f64>,
    #[serde(default)]
    pub mu: f64,
    /// Half-width of the uniform spread of μ across cells.
    #[serde(default)]
    pub mu_spread: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    /// σ across cells is `sigma · (1 + sigma_spread · U[0,1))`.
    #[serde(default)]
    pub sigma_spread: f64,
    #[serde(default)]
    pub seed: u64,
    /// Fixed true loadings; drawn from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loadings: Option<LoadingSet>,
}

fn one() -> f64 {
    1.0
}

impl SimSpec {
    pub fn new(dims: Vec<usize>, ranks: Ranks, periods: usize) -> Self {
        Self {
            dims,
            ranks,
            periods,
            factor: FactorProcess::default(),
            noise_sd: 0.0,
            level_sd: Vec::new(),
            mu: 0.0,
            mu_spread: 0.0,
            sigma: 1.0,
            sigma_spread: 0.0,
            seed: 0,
            loadings: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 || self.dims.contains(&0) {
            return Err(invalid(format!("simulation dims {:?} invalid", self.dims)));
        }
        self.ranks.validate(&self.dims)?;
        if self.periods == 0 {
            return Err(invalid("simulation needs at least one period"));
        }
        let m = self.dims.len() - 1;
        if !self.level_sd.is_empty() && self.level_sd.len() != m {
            return Err(invalid(format!("level_sd needs {m} entries")));
        }
        let sds = [self.noise_sd, self.factor.innovation_sd]
            .into_iter()
            .chain(self.level_sd.iter().copied());
        for sd in sds {
            if !(sd >= 0.0 && sd.is_finite()) {
                return Err(invalid("noise standard deviations must be finite and >= 0"));
            }
        }
        if !(self.sigma > 0.0 && self.sigma_spread >= 0.0) {
            return Err(invalid("sigma must be > 0 and sigma_spread >= 0"));
        }
        let f = &self.factor;
        if f.seasonal_amplitudes.len() != f.seasonal_periods.len()
            || f.seasonal_periods.iter().any(|p| !(*p > 0.0))
        {
            return Err(invalid("seasonal amplitudes and positive periods must pair up"));
        }
        if let Some(l) = &self.loadings {
            l.check_dims(&self.dims)?;
            if l.ranks() != self.ranks {
                return Err(invalid("given loadings disagree with ranks"));
            }
        }
        Ok(())
    }

    fn level_sd(&self, j: usize) -> f64 {
        self.level_sd.get(j).copied().unwrap_or(0.0)
    }
}

/// Every random ingredient of one simulation, before assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDraw {
    pub loadings: LoadingSet,
    pub standardization: Standardization,
    pub factors: FactorSeries,
    /// `eta[t][j]` is the level-`j` shock with dims `(R, S₁…S_{j+1}, K_{j+2}…K_M)`.
    pub eta: Vec<Vec<DenseTensor>>,
    pub nu: Vec<DenseTensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub loadings: LoadingSet,
    pub standardization: Standardization,
    pub factors: FactorSeries,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Gaussian matrix with orthogonal columns scaled so `AᵀA = rows·I`.
pub fn random_loading(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let g = nalgebra::DMatrix::from_fn(rows, cols, |_, _| normal(rng));
    let q = g.qr().q();
    Matrix::from_fn(rows, cols, |i, j| q[(i, j)] * (rows as f64).sqrt())
}

fn noise(dims: &[usize], sd: f64, rng: &mut ChaCha8Rng) -> DenseTensor {
    if sd == 0.0 {
        return DenseTensor::zeros(dims);
    }
    DenseTensor::from_fn(dims, |_| sd * normal(rng))
}

/// Draws loadings, location/scale, factors and all shocks from the seed.
pub fn draw(spec: &SimSpec) -> Result<SimDraw> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dims = &spec.dims;
    let m = dims.len() - 1;

    let loadings = match &spec.loadings {
        Some(l) => l.clone(),
        None => LoadingSet {
            lambda: random_loading(dims[0], spec.ranks.r, &mut rng),
            b: (0..m)
                .map(|j| random_loading(dims[j + 1], spec.ranks.k[j], &mut rng))
                .collect(),
        },
    };

    let mu = DenseTensor::from_fn(dims, |_| {
        spec.mu + spec.mu_spread * rng.random_range(-1.0..=1.0)
    });
    let sigma = DenseTensor::from_fn(dims, |_| {
        spec.sigma * (1.0 + spec.sigma_spread * rng.random_range(0.0..1.0))
    });

    let fdims = spec.ranks.factor_dims();
    let coords: usize = fdims.iter().product();
    let fp = &spec.factor;
    let phases: Vec<Vec<f64>> = (0..coords)
        .map(|_| {
            fp.seasonal_periods
                .iter()
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect()
        })
        .collect();
    let mut ar_state: Vec<f64> = vec![0.0; coords];

    let mut factors = Vec::with_capacity(spec.periods);
    let mut eta = Vec::with_capacity(spec.periods);
    let mut nu = Vec::with_capacity(spec.periods);
    for t in 0..spec.periods {
        let mut f = Vec::with_capacity(coords);
        for c in 0..coords {
            let e = if fp.innovation_sd == 0.0 { 0.0 } else { fp.innovation_sd * normal(&mut rng) };
            ar_state[c] = fp.ar_coefficient * ar_state[c] + e;
            let seasonal: f64 = fp
                .seasonal_amplitudes
                .iter()
                .zip(&fp.seasonal_periods)
                .zip(&phases[c])
                .map(|((a, p), ph)| a * (std::f64::consts::TAU * t as f64 / p + ph).sin())
                .sum();
            f.push(fp.level + seasonal + ar_state[c]);
        }
        factors.push(DenseTensor::new(fdims.clone(), f)?);

        let mut level_dims = fdims.clone();
        let mut shocks = Vec::with_capacity(m);
        for j in 0..m {
            level_dims[j + 1] = dims[j + 1];
            shocks.push(noise(&level_dims, spec.level_sd(j), &mut rng));
        }
        eta.push(shocks);
        nu.push(noise(dims, spec.noise_sd, &mut rng));
    }

    Ok(SimDraw {
        loadings,
        standardization: Standardization::new(mu, sigma)?,
        factors: FactorSeries { tensors: factors },
        eta,
        nu,
    })
}

/// Builds observations level by level, adding each layer's shock as it goes.
pub fn assemble(d: &SimDraw) -> Result<Vec<DenseTensor>> {
    d.factors
        .tensors
        .iter()
        .zip(&d.eta)
        .zip(&d.nu)
        .map(|((f, eta), nu)| {
            let mut g = f.clone();
            for (j, (b, shock)) in d.loadings.b.iter().zip(eta).enumerate() {
                g = g.mode_product(b, j + 1)?.add(shock)?;
            }
            let eps = g.mode_product(&d.loadings.lambda, 0)?.add(nu)?;
            d.standardization.invert(&eps)
        })
        .collect()
}

/// Simulates a panel; returns the observations and the ground truth.
pub fn simulate(spec: &SimSpec) -> Result<(TensorSeries, SimTruth)> {
    let d = draw(spec)?;
    let ys = assemble(&d)?;
    let ts = TensorSeries::unlabeled(ys)?;
    Ok((
        ts,
        SimTruth {
            loadings: d.loadings,
            standardization: d.standardization,
            factors: d.factors,
        },
    ))
}
