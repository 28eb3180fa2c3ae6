use stfm_core::benchmarks::{
    fpca_fitted, fpca_forecast, mfm_forecast, provider_matrices, vfm_forecast, ComponentCount,
    FpcaConfig, MfmConfig, ProviderMatrixSeries, VectorFactorModel, VfmConfig,
};
use stfm_core::eval::{forecast_tensor_model, FactorPeriods};
use stfm_core::seasonal::{forecast_factors, forecast_observations, ScoreModel};
use stfm_core::sim::{simulate, FactorProcess, SimSpec};
use stfm_core::tensor::kron_all;
use stfm_core::tfm::TensorFactorModel;
use stfm_core::{Matrix, Ranks};

const TAU: f64 = std::f64::consts::TAU;

fn periodic(t: usize, phase: f64) -> f64 {
    (TAU * t as f64 / 52.0 + phase).sin() + 0.5 * (TAU * t as f64 / 26.0 + 2.0 * phase).cos()
}

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm()
}

/// Weeks `a + Σ_k u_k s_k(t)` on a 7×24 grid with the given score paths.
fn low_rank_weeks(t_len: usize, scores: &[fn(usize) -> f64]) -> Vec<Matrix> {
    (0..t_len)
        .map(|t| {
            Matrix::from_fn(7, 24, |d, h| {
                let base = 1000.0 + 30.0 * d as f64 + 5.0 * h as f64;
                scores
                    .iter()
                    .enumerate()
                    .map(|(k, s)| {
                        let u = ((d * 24 + h) as f64 * (0.37 + k as f64)).sin() + 0.2 * (k + 1) as f64;
                        40.0 * u * s(t)
                    })
                    .sum::<f64>()
                    + base
            })
        })
        .collect()
}

#[test]
fn mfm_on_noiseless_periodic_matrices() {
    let t_len = 156;
    let b1: Vec<f64> = (0..7).map(|d| 1.0 + 0.1 * d as f64).collect();
    let b2 = |h: usize, k: usize| ((h + 1) as f64 * (0.3 + 0.5 * k as f64)).cos();
    let week = |t: usize| {
        let f = [periodic(t, 0.3), periodic(t, 1.9)];
        Matrix::from_fn(7, 24, |d, h| 500.0 + b1[d] * (b2(h, 0) * f[0] + b2(h, 1) * f[1]) * 50.0)
    };
    let ms = ProviderMatrixSeries {
        provider: "A".into(),
        matrices: (0..t_len).map(week).collect(),
    };
    let f = mfm_forecast(&ms, 4, &MfmConfig::default()).unwrap();
    for (h, fh) in f.iter().enumerate() {
        let truth = week(t_len + h);
        assert!(rel(fh, &truth) < 1e-6, "step {}: {}", h + 1, rel(fh, &truth));
    }
}

#[test]
fn mfm_equals_tfm_with_one_provider() {
    let mut spec = SimSpec::new(vec![1, 7, 24], Ranks::new(1, vec![1, 2]), 120);
    spec.noise_sd = 0.2;
    spec.mu = 100.0;
    spec.seed = 12;
    let (ts, _) = simulate(&spec).unwrap();
    let ms = &provider_matrices(&ts).unwrap()[0];
    let mfm = mfm_forecast(ms, 6, &MfmConfig::default()).unwrap();
    let tfm = forecast_tensor_model(&ts, &spec.ranks, &FactorPeriods::uniform(52), ScoreModel::Ar1, 6).unwrap();
    for (a, b) in mfm.iter().zip(&tfm) {
        let b = provider_matrices(&stfm_core::TensorSeries::unlabeled(vec![b.clone()]).unwrap()).unwrap();
        assert!(rel(a, &b[0].matrices[0]) < 1e-4);
    }
}

#[test]
fn vfm_on_affine_two_dimensional_weeks() {
    let t_len = 130;
    let s0: fn(usize) -> f64 = |t| periodic(t, 0.1);
    let s1: fn(usize) -> f64 = |t| periodic(t, 2.2) * 0.7;
    let all = low_rank_weeks(t_len + 3, &[s0, s1]);
    let ms = ProviderMatrixSeries {
        provider: "A".into(),
        matrices: all[..t_len].to_vec(),
    };
    let f = vfm_forecast(&ms, 3, &VfmConfig::default()).unwrap();
    for (h, fh) in f.iter().enumerate() {
        assert!(rel(fh, &all[t_len + h]) < 1e-6);
    }
}

#[test]
fn fpca_on_one_component_curves() {
    let t_len = 120;
    // Unit-root AR(1) with drift plus a period-52 season.
    let s: fn(usize) -> f64 = |t| 0.02 * t as f64 + periodic(t, 0.8);
    let all = low_rank_weeks(t_len + 4, &[s]);
    let ms = ProviderMatrixSeries {
        provider: "A".into(),
        matrices: all[..t_len].to_vec(),
    };
    let f = fpca_forecast(&ms, 4, &FpcaConfig::default()).unwrap();
    for (h, fh) in f.iter().enumerate() {
        let err = fh.sub(&all[t_len + h]).unwrap().max_abs() / all[t_len + h].max_abs();
        assert!(err < 1e-5, "step {}: {err}", h + 1);
    }
}

#[test]
fn full_bases_reconstruct_exactly() {
    let mut spec = SimSpec::new(vec![1, 7, 24], Ranks::new(1, vec![2, 3]), 200);
    spec.noise_sd = 1.0;
    spec.seed = 3;
    let (ts, _) = simulate(&spec).unwrap();
    let ms = &provider_matrices(&ts).unwrap()[0];
    let vfm = VectorFactorModel::fit_pca(&ts, 168).unwrap();
    for (a, b) in vfm.fitted().unwrap().iter().zip(&ts.tensors) {
        assert!(a.sub(b).unwrap().frobenius_norm() < 1e-8 * b.frobenius_norm());
    }
    let fp = fpca_fitted(ms, ComponentCount::Fixed(24)).unwrap();
    for (a, b) in fp.iter().zip(&ms.matrices) {
        assert!(rel(a, b) < 1e-8);
    }
}

#[test]
fn fpca_day_rows_follow_day_curves() {
    // Day d is constant at 100·(d+1) plus a periodic wiggle on hour 0 only.
    let t_len = 110;
    let week = |t: usize| Matrix::from_fn(7, 24, |d, h| 100.0 * (d + 1) as f64 + if h == 0 { periodic(t, d as f64) } else { 0.0 });
    let ms = ProviderMatrixSeries {
        provider: "A".into(),
        matrices: (0..t_len).map(week).collect(),
    };
    let f = fpca_forecast(&ms, 1, &FpcaConfig::default()).unwrap();
    let truth = week(t_len);
    for d in 0..7 {
        for h in 0..24 {
            assert!((f[0].get(d, h) - truth.get(d, h)).abs() < 1e-6, "day {d} hour {h}");
        }
    }
}

#[test]
fn constrained_vfm_reproduces_mfm() {
    let mut spec = SimSpec::new(vec![1, 7, 24], Ranks::new(1, vec![1, 2]), 150);
    spec.noise_sd = 0.5;
    spec.mu = 50.0;
    spec.sigma_spread = 1.0;
    spec.factor = FactorProcess::default();
    let (ts, _) = simulate(&spec).unwrap();
    let mfm = TensorFactorModel::fit(&ts, &spec.ranks).unwrap();
    let l = kron_all([&mfm.loadings.b[1], &mfm.loadings.b[0], &mfm.loadings.lambda]).unwrap();
    let vfm = VectorFactorModel::fit_with_loadings(&ts, mfm.standardization.clone(), l).unwrap();
    for (a, b) in vfm.fitted().unwrap().iter().zip(mfm.fitted().unwrap()) {
        assert!(a.sub(&b).unwrap().frobenius_norm() <= 1e-10 * b.frobenius_norm());
    }
    let mf = forecast_observations(&forecast_factors(&mfm.factors, 52, 8).unwrap(), &mfm.loadings, &mfm.standardization).unwrap();
    let vf = vfm.forecast(8, 52, ScoreModel::Ar1).unwrap();
    for (a, b) in vf.iter().zip(&mf) {
        assert!(a.sub(b).unwrap().frobenius_norm() <= 1e-10 * b.frobenius_norm());
    }
}
