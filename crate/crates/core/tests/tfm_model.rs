use stfm_core::panel::{standardize, Standardization};
use stfm_core::sim::{simulate, SimSpec, SimTruth};
use stfm_core::tfm::subspace::principal_angle_distance;
use stfm_core::tfm::{
    common_component, extract_factors, initial_loadings, projected_loadings, select_ranks,
    TensorFactorModel,
};
use stfm_core::{DenseTensor, Matrix, Ranks, TensorSeries};

fn spec(dims: Vec<usize>, ranks: Ranks, t: usize, noise: f64, seed: u64) -> SimSpec {
    let mut s = SimSpec::new(dims, ranks, t);
    s.noise_sd = noise;
    s.seed = seed;
    s
}

fn rel(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm()
}

fn max_angle(fit: &TensorFactorModel, truth: &SimTruth) -> f64 {
    fit.loadings
        .matrices()
        .zip(truth.loadings.matrices())
        .map(|(a, b)| principal_angle_distance(a, b).unwrap())
        .fold(0.0, f64::max)
}

#[test]
fn noiseless_standardized_data_recovers_loading_spans() {
    let ranks = Ranks::new(2, vec![1, 3]);
    let (ts, truth) = simulate(&spec(vec![6, 5, 8], ranks.clone(), 80, 0.0, 3)).unwrap();
    let z = Standardization::identity(ts.dims());
    let fit = TensorFactorModel::fit_with(&ts, &ranks, z, 0).unwrap();
    assert!(max_angle(&fit, &truth) < 1e-8);
    for (a, b) in fit.fitted().unwrap().iter().zip(&ts.tensors) {
        assert!(rel(a, b) < 1e-8);
    }
    assert!(fit.loadings.scale_deviation() < 1e-10);
}

#[test]
fn noiseless_raw_data_is_reproduced_after_standardization() {
    let ranks = Ranks::new(1, vec![1, 2]);
    let mut s = spec(vec![4, 7, 24], ranks.clone(), 60, 0.0, 8);
    s.mu = 500.0;
    s.mu_spread = 100.0;
    s.sigma = 20.0;
    s.sigma_spread = 1.0;
    let (ts, _) = simulate(&s).unwrap();
    let fit = TensorFactorModel::fit(&ts, &ranks).unwrap();
    assert!(fit.in_sample_mse(&ts).unwrap() < 1e-16 * 500.0 * 500.0);
}

#[test]
fn common_component_is_rotation_and_sign_invariant() {
    let ranks = Ranks::new(2, vec![2, 2]);
    let (ts, _) = simulate(&spec(vec![5, 4, 6], ranks.clone(), 40, 0.3, 11)).unwrap();
    let fit = TensorFactorModel::fit(&ts, &ranks).unwrap();
    let f = &fit.factors.tensors[7];
    let base = common_component(f, &fit.loadings).unwrap();

    let (c, s) = (0.6, 0.8);
    let h = Matrix::new(2, 2, vec![c, -s, s, c]).unwrap();
    let mut rotated = fit.loadings.clone();
    rotated.b[1] = rotated.b[1].matmul(&h).unwrap();
    let f_rot = f.mode_product(&h.transpose(), 2).unwrap();
    assert!(rel(&common_component(&f_rot, &rotated).unwrap(), &base) < 1e-10);

    let mut flipped = fit.loadings.clone();
    flipped.lambda.negate_column(1);
    let f_flip = DenseTensor::from_fn(f.dims(), |i| if i[0] == 1 { -f.get(i) } else { f.get(i) });
    assert!(rel(&common_component(&f_flip, &flipped).unwrap(), &base) < 1e-12);
}

#[test]
fn refitting_the_common_component_keeps_the_spans() {
    let ranks = Ranks::new(1, vec![2, 2]);
    let (ts, _) = simulate(&spec(vec![6, 5, 7], ranks.clone(), 50, 0.5, 21)).unwrap();
    let fit = TensorFactorModel::fit(&ts, &ranks).unwrap();
    let cc: Vec<DenseTensor> = fit
        .factors
        .tensors
        .iter()
        .map(|f| common_component(f, &fit.loadings).unwrap())
        .collect();
    let init = initial_loadings(&cc, &ranks).unwrap();
    let again = projected_loadings(&cc, &init, &ranks).unwrap();
    for (a, b) in again.matrices().zip(fit.loadings.matrices()) {
        assert!(principal_angle_distance(a, b).unwrap() < 1e-8);
    }
    let f2 = extract_factors(&cc, &again).unwrap();
    for (t, f) in f2.tensors.iter().enumerate() {
        assert!(rel(&common_component(f, &again).unwrap(), &cc[t]) < 1e-8);
    }
}

#[test]
fn richer_ranks_fit_better_in_sample() {
    let truth = Ranks::new(1, vec![1, 2]);
    let (ts, _) = simulate(&spec(vec![5, 7, 24], truth, 80, 0.4, 5)).unwrap();
    let one = TensorFactorModel::fit(&ts, &Ranks::new(1, vec![1, 1])).unwrap();
    let two = TensorFactorModel::fit(&ts, &Ranks::new(1, vec![1, 2])).unwrap();
    assert!(two.in_sample_mse(&ts).unwrap() < one.in_sample_mse(&ts).unwrap());
}

#[test]
fn eigenvalue_ratio_finds_strong_structure() {
    let truth = Ranks::new(1, vec![1, 2]);
    let mut s = spec(vec![8, 7, 24], truth.clone(), 120, 0.05, 9);
    s.factor.seasonal_amplitudes = vec![3.0];
    s.factor.ar_coefficient = 0.3;
    let (ts, _) = simulate(&s).unwrap();
    let xs = standardize(&ts, &Standardization::identity(ts.dims())).unwrap();
    let sel = select_ranks(&xs.tensors, 4, &[4, 5]).unwrap();
    assert_eq!(sel.ranks, truth, "{:?}", sel.ratios);
}

#[test]
fn fit_rejects_bad_ranks() {
    let ts = TensorSeries::unlabeled(vec![DenseTensor::filled(&[2, 3, 4], 1.0); 5]).unwrap();
    assert!(TensorFactorModel::fit(&ts, &Ranks::new(3, vec![1, 1])).is_err());
    assert!(TensorFactorModel::fit(&ts, &Ranks::new(1, vec![1])).is_err());
}
