use super::{initial_loadings, projected_covariances, Ranks};
use crate::error::{invalid, Error, Result};
use crate::tensor::{symmetric_eigen, DenseTensor};

/// Eigenvalues below this fraction of the leading one count as zero.
const ZERO_EIGENVALUE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RankSelection {
    pub ranks: Ranks,
    /// Descending eigenvalues of each mode's projected covariance.
    pub eigenvalues: Vec<Vec<f64>>,
    /// `λ_i / λ_{i+1}` for each candidate `i`; `None` when undefined.
    pub ratios: Vec<Vec<Option<f64>>>,
}

/// Eigenvalue-ratio rank selection on the projected covariances.
///
/// The projection uses initial loadings at the maximal candidate ranks.
/// For each mode the chosen rank is `argmax_i λ_i/λ_{i+1}` over
/// `1 ≤ i ≤ max`, ties going to the smaller rank. A ratio whose denominator
/// is numerically zero is infinite; one whose numerator is zero is undefined.
pub fn select_ranks(xs: &[DenseTensor], r_max: usize, k_max: &[usize]) -> Result<RankSelection> {
    let dims = xs.first().ok_or_else(|| invalid("no observations"))?.dims();
    let maxes: Vec<usize> = std::iter::once(r_max).chain(k_max.iter().copied()).collect();
    if maxes.len() != dims.len() {
        return Err(invalid(format!(
            "{} maximal ranks for {} modes",
            maxes.len(),
            dims.len()
        )));
    }
    for (m, (&cap, &d)) in maxes.iter().zip(dims).enumerate() {
        if cap == 0 || cap >= d {
            return Err(invalid(format!(
                "maximal rank {cap} on mode {m} must be in 1..{d}"
            )));
        }
    }
    let probe = Ranks::new(r_max, k_max.to_vec());
    let init = initial_loadings(xs, &probe)?;
    let covs = projected_covariances(xs, &init)?;

    let mut chosen = Vec::with_capacity(covs.len());
    let mut eigenvalues = Vec::with_capacity(covs.len());
    let mut ratios = Vec::with_capacity(covs.len());
    for (mode, (cov, &cap)) in covs.iter().zip(&maxes).enumerate() {
        let (_, vals) = symmetric_eigen(cov)?;
        let lead = vals[0].max(0.0);
        let is_zero = |v: f64| v <= ZERO_EIGENVALUE * lead;
        let mode_ratios: Vec<Option<f64>> = (0..cap)
            .map(|i| {
                if lead == 0.0 || is_zero(vals[i]) {
                    None
                } else if is_zero(vals[i + 1]) {
                    Some(f64::INFINITY)
                } else {
                    Some(vals[i] / vals[i + 1])
                }
            })
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in mode_ratios.iter().enumerate() {
            if let Some(r) = *r {
                if best.is_none_or(|(_, b)| r > b) {
                    best = Some((i + 1, r));
                }
            }
        }
        let (rank, _) = best.ok_or(Error::UndefinedRatios(mode))?;
        chosen.push(rank);
        eigenvalues.push(vals);
        ratios.push(mode_ratios);
    }
    Ok(RankSelection {
        ranks: Ranks::new(chosen[0], chosen[1..].to_vec()),
        eigenvalues,
        ratios,
    })
}
