#![no_main]
use libfuzzer_sys::fuzz_target;
use stfm_core::archive::ModelArchive;
use stfm_core::seasonal::{forecast_factors_with, forecast_observations, ScoreModel};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(model) = ModelArchive::from_json(text) else { return };
    assert_eq!(ModelArchive::from_json(&model.to_json().unwrap()).unwrap(), model);
    if let Ok(ff) = forecast_factors_with(&model.factors, &model.factor_periods, 2, ScoreModel::Ar1) {
        let _ = forecast_observations(&ff, &model.loadings, &model.standardization);
    }
});
