use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::Duration;
use log::{info, warn};
use stfm_core::archive::{encode_tensor_series, read_tensor_archive, ModelArchive, MODEL_FORMAT};
use stfm_core::benchmarks::{Benchmark, BenchmarkForecaster};
use stfm_core::eval::{rolling_evaluate, EvalReport, Forecaster, ReportMetadata, RollingPlan, TfmForecaster};
use stfm_core::panel::{estimate_standardization, fold, ingest_csv, standardize, TIMESTAMP_FORMAT};
use stfm_core::report::{parse_report_json, report_csv, report_json, report_markdown, trace_csv};
use stfm_core::seasonal::{forecast_factors_with, forecast_observations};
use stfm_core::sim::simulate;
use stfm_core::tfm::{fitted_values, in_sample_mse, select_ranks, RankSelection, TensorFactorModel};
use stfm_core::{
    CalendarSpec, DenseTensor, Error, FactorSeries, LoadingSet, Matrix, Ranks, Standardization, TensorSeries,
};

use crate::config::RunConfig;
use crate::CliError;

pub const SERIES_FILE: &str = "series.stfm";
pub const MODEL_FILE: &str = "model.json";
pub const RANKS_FILE: &str = "ranks.json";
pub const TRUTH_FILE: &str = "truth.json";
pub const FORECAST_CSV: &str = "forecast.csv";
pub const FORECAST_ARCHIVE: &str = "forecast.stfm";
pub const REPORT_FILES: [&str; 4] = ["report.csv", "report.json", "report.md", "trace.csv"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Ranks,
    Fit,
    Forecast,
    Backtest,
    Simulate,
    Report,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(h) = self.horizon {
            cfg.forecast.horizon = h;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} not found: {}", path.display())))
    }
}

/// Checks config and input-file preconditions, then runs `cmd`.
/// Returns the human-readable summary.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<String, CliError> {
    cfg.validate()?;
    let out = &cfg.output.dir;
    match cmd {
        Command::Ingest => {
            if cfg.data.paths.is_empty() {
                return Err(usage("ingest needs data.paths"));
            }
            cfg.data.paths.iter().try_for_each(|p| require_file(p, "data file"))?;
        }
        Command::Ranks | Command::Fit | Command::Backtest => {
            series_source(cfg).check()?;
        }
        Command::Forecast => require_file(&out.join(MODEL_FILE), "model archive")?,
        Command::Simulate => {
            cfg.sim_spec()?;
        }
        Command::Report => require_file(&out.join("report.json"), "report")?,
    }
    match cmd {
        Command::Ingest => cmd_ingest(cfg),
        Command::Ranks => cmd_ranks(cfg),
        Command::Fit => cmd_fit(cfg),
        Command::Forecast => cmd_forecast(cfg),
        Command::Backtest => cmd_backtest(cfg),
        Command::Simulate => cmd_simulate(cfg),
        Command::Report => cmd_report(cfg),
    }
}

enum SeriesSource {
    Archive(PathBuf),
    Csv(Vec<PathBuf>),
}

/// An explicit archive wins; otherwise CSVs; otherwise the ingest output.
fn series_source(cfg: &RunConfig) -> SeriesSource {
    match &cfg.data.archive {
        Some(a) => SeriesSource::Archive(a.clone()),
        None if !cfg.data.paths.is_empty() => SeriesSource::Csv(cfg.data.paths.clone()),
        None => SeriesSource::Archive(cfg.output.dir.join(SERIES_FILE)),
    }
}

impl SeriesSource {
    fn check(&self) -> Result<(), CliError> {
        match self {
            SeriesSource::Archive(p) => require_file(p, "tensor archive"),
            SeriesSource::Csv(ps) => ps.iter().try_for_each(|p| require_file(p, "data file")),
        }
    }
}

fn calendar(cfg: &RunConfig, first: chrono::NaiveDateTime) -> Result<CalendarSpec, CliError> {
    if cfg.calendar.anchor.is_empty() {
        Ok(CalendarSpec::weekly_hourly(first))
    } else {
        CalendarSpec::new(cfg.calendar.periods.clone(), cfg.calendar.anchor.clone()).map_err(|e| usage(e.to_string()))
    }
}

fn ingest(cfg: &RunConfig, paths: &[PathBuf]) -> Result<(TensorSeries, String), CliError> {
    let (panel, report) = ingest_csv(paths, cfg.span()?)?;
    let ts = fold(&panel, &calendar(cfg, panel.timestamps[0])?)?;
    let mut s = String::new();
    writeln!(s, "providers N = {} ({})", ts.n_providers(), ts.providers.join(", ")).unwrap();
    writeln!(s, "hours = {}", panel.len()).unwrap();
    writeln!(s, "periods T = {}", ts.len()).unwrap();
    writeln!(
        s,
        "repaired cells = {} (duplicates averaged {:?}, interpolated {:?}), trimmed hours = {}",
        report.repaired_cells(),
        report.duplicates_averaged,
        report.interpolated,
        report.trimmed_hours
    )
    .unwrap();
    Ok((ts, s))
}

fn load_series(cfg: &RunConfig) -> Result<TensorSeries, CliError> {
    let ts = match series_source(cfg) {
        SeriesSource::Archive(p) => read_tensor_archive(&p).map_err(|e| CliError::Compute(format!("{}: {e}", p.display())))?,
        SeriesSource::Csv(ps) => ingest(cfg, &ps)?.0,
    };
    if ts.periods() != cfg.calendar.periods {
        return Err(usage(format!(
            "series has seasonal dims {:?}, config calendar.periods is {:?}",
            ts.periods(),
            cfg.calendar.periods
        )));
    }
    Ok(ts)
}

/// Writes every file under `dir` or none of them.
fn commit(dir: &Path, files: Vec<(&str, Vec<u8>)>) -> Result<Vec<PathBuf>, CliError> {
    let io = |e: std::io::Error| CliError::Compute(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut staged = Vec::new();
    for (name, bytes) in &files {
        let tmp = dir.join(format!(".{name}.partial"));
        if let Err(e) = std::fs::write(&tmp, bytes) {
            for (t, _) in &staged {
                let _ = std::fs::remove_file(t);
            }
            return Err(io(e));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dest) in &staged {
        std::fs::rename(tmp, dest).map_err(io)?;
    }
    Ok(staged.into_iter().map(|(_, d)| d).collect())
}

fn standardization_for(cfg: &RunConfig, ts: &TensorSeries) -> Result<(Standardization, usize), CliError> {
    if cfg.model.standardize {
        let fit = estimate_standardization(ts)?;
        Ok((fit.standardization, fit.clamped_cells))
    } else {
        Ok((Standardization::identity(ts.dims()), 0))
    }
}

fn check_ranks(ranks: &Ranks, ts: &TensorSeries) -> Result<(), CliError> {
    ranks.validate(ts.dims()).map_err(|e| usage(format!("model.ranks {ranks} vs data {:?}: {e}", ts.dims())))
}

fn choose_ranks(cfg: &RunConfig, ts: &TensorSeries) -> Result<(Ranks, Option<RankSelection>), CliError> {
    if let Some(r) = cfg.fixed_ranks() {
        check_ranks(&r, ts)?;
        return Ok((r, None));
    }
    let caps = &cfg.model.rank_max;
    if let Some((m, (&c, &d))) = caps.iter().zip(ts.dims()).enumerate().find(|(_, (&c, &d))| c >= d) {
        return Err(usage(format!("model.rank_max[{m}] = {c} must be below the mode size {d}")));
    }
    let (z, _) = standardization_for(cfg, ts)?;
    let xs = standardize(ts, &z)?;
    let sel = select_ranks(&xs.tensors, caps[0], &caps[1..])?;
    Ok((sel.ranks.clone(), Some(sel)))
}

fn cmd_ingest(cfg: &RunConfig) -> Result<String, CliError> {
    let (ts, summary) = ingest(cfg, &cfg.data.paths)?;
    let written = commit(&cfg.output.dir, vec![(SERIES_FILE, encode_tensor_series(&ts))])?;
    Ok(format!("{summary}archive = {}\n", written[0].display()))
}

fn json_ratio(r: Option<f64>) -> serde_json::Value {
    match r {
        Some(v) if v.is_finite() => v.into(),
        Some(_) => "inf".into(),
        None => serde_json::Value::Null,
    }
}

fn cmd_ranks(cfg: &RunConfig) -> Result<String, CliError> {
    let ts = load_series(cfg)?;
    let mut c = cfg.clone();
    c.model.ranks = crate::config::RankSetting::Auto("auto".into());
    let (ranks, sel) = choose_ranks(&c, &ts)?;
    let sel = sel.expect("auto selection");
    let doc = serde_json::json!({
        "ranks": ranks.factor_dims(),
        "rank_max": cfg.model.rank_max,
        "eigenvalues": sel.eigenvalues,
        "ratios": sel.ratios.iter().map(|m| m.iter().map(|&r| json_ratio(r)).collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    let body = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Compute(e.to_string()))?;
    commit(&cfg.output.dir, vec![(RANKS_FILE, body)])?;
    let mut s = format!("selected ranks {ranks}\n");
    for (mode, rs) in sel.ratios.iter().enumerate() {
        let shown: Vec<String> = rs.iter().map(|r| r.map_or("undefined".into(), |v| format!("{v:.3}"))).collect();
        writeln!(s, "mode {mode} eigenvalue ratios: {}", shown.join(", ")).unwrap();
    }
    Ok(s)
}

fn scaled_unit_columns(rows: usize, cols: usize) -> Matrix {
    let s = (rows as f64).sqrt();
    Matrix::from_fn(rows, cols, |i, j| if i == j { s } else { 0.0 })
}

/// Fits the configured model; data with no variation around its cell
/// means yields zero factors so forecasts reduce to the means.
pub fn fit_model(cfg: &RunConfig, ts: &TensorSeries) -> Result<(ModelArchive, Option<RankSelection>), CliError> {
    let (ranks, sel) = choose_ranks(cfg, ts)?;
    let (z, clamped) = standardization_for(cfg, ts)?;
    let (loadings, factors) = match TensorFactorModel::fit_with(ts, &ranks, z.clone(), clamped) {
        Ok(m) => (m.loadings, m.factors),
        Err(Error::DegenerateCovariance(why)) => {
            warn!("degenerate covariance ({why}); writing a zero-factor model");
            let dims = ts.dims();
            let lambda = scaled_unit_columns(dims[0], ranks.r);
            let b = ranks.k.iter().zip(&dims[1..]).map(|(&k, &s)| scaled_unit_columns(s, k)).collect();
            let zero = DenseTensor::zeros(&ranks.factor_dims());
            (LoadingSet { lambda, b }, FactorSeries { tensors: vec![zero; ts.len()] })
        }
        Err(e) => return Err(e.into()),
    };
    let fitted = fitted_values(&factors, &loadings, &z)?;
    let mse = in_sample_mse(&ts.tensors, &fitted)?;
    let coords = ranks.factor_dims().iter().product();
    let cycle: usize = ts.periods().iter().product();
    let archive = ModelArchive {
        format: MODEL_FORMAT.into(),
        providers: ts.providers.clone(),
        ranks,
        loadings,
        standardization: z,
        factors,
        next_period_start: ts.period_starts[ts.len() - 1] + Duration::hours(cycle as i64),
        factor_periods: cfg.factor_periods().for_coords(coords)?,
        in_sample_mse: mse,
        clamped_cells: clamped,
        config_hash: cfg.hash(),
    };
    archive.validate()?;
    Ok((archive, sel))
}

fn cmd_fit(cfg: &RunConfig) -> Result<String, CliError> {
    let ts = load_series(cfg)?;
    let (model, sel) = fit_model(cfg, &ts)?;
    let json = model.to_json()?;
    let written = commit(&cfg.output.dir, vec![(MODEL_FILE, json.into_bytes())])?;
    let mut s = String::new();
    if sel.is_some() {
        writeln!(s, "auto-selected ranks {}", model.ranks).unwrap();
    }
    writeln!(s, "ranks = {}", model.ranks).unwrap();
    writeln!(s, "in-sample MSE = {:.6e}", model.in_sample_mse).unwrap();
    writeln!(s, "clamped standard deviations = {}", model.clamped_cells).unwrap();
    let names = std::iter::once("Lambda".to_string()).chain((1..=model.ranks.k.len()).map(|j| format!("B{j}")));
    for (name, m) in names.zip(model.loadings.matrices()) {
        let g = m.t_matmul(m)?.scale(1.0 / m.rows() as f64);
        let dev = g.sub(&Matrix::identity(m.cols()))?.max_abs();
        writeln!(s, "{name}: {}x{}, max |A'A/rows - I| = {dev:.2e}", m.rows(), m.cols()).unwrap();
    }
    writeln!(s, "model = {}", written[0].display()).unwrap();
    Ok(s)
}

/// `n`-step forecasts from a stored model, labelled with period starts.
pub fn forecast_model(cfg: &RunConfig, model: &ModelArchive, n: usize) -> Result<TensorSeries, CliError> {
    let ff = forecast_factors_with(&model.factors, &model.factor_periods, n, cfg.score_model())?;
    let ys = forecast_observations(&ff, &model.loadings, &model.standardization)?;
    let cycle: usize = model.standardization.dims()[1..].iter().product();
    let starts = (0..n).map(|h| model.next_period_start + Duration::hours((h * cycle) as i64)).collect();
    Ok(TensorSeries::new(model.providers.clone(), ys, starts)?)
}

fn forecast_csv(ts: &TensorSeries) -> Vec<u8> {
    let m = ts.dims().len() - 1;
    let mut s = String::from("step,period_start,provider");
    for j in 1..=m {
        write!(s, ",s{j}").unwrap();
    }
    s.push_str(",value\n");
    for (h, (y, start)) in ts.tensors.iter().zip(&ts.period_starts).enumerate() {
        let dims = y.dims();
        let mut idx = vec![0usize; dims.len()];
        for v in y.to_row_major() {
            write!(s, "{},{},{}", h + 1, start.format(TIMESTAMP_FORMAT), ts.providers[idx[0]]).unwrap();
            for i in &idx[1..] {
                write!(s, ",{}", i + 1).unwrap();
            }
            writeln!(s, ",{v}").unwrap();
            for k in (0..dims.len()).rev() {
                idx[k] += 1;
                if idx[k] < dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
    s.into_bytes()
}

fn cmd_forecast(cfg: &RunConfig) -> Result<String, CliError> {
    let path = cfg.output.dir.join(MODEL_FILE);
    let model = ModelArchive::read(&path).map_err(|e| CliError::Compute(format!("{}: {e}", path.display())))?;
    let n = cfg.forecast.horizon;
    let fc = forecast_model(cfg, &model, n)?;
    commit(
        &cfg.output.dir,
        vec![(FORECAST_CSV, forecast_csv(&fc)), (FORECAST_ARCHIVE, encode_tensor_series(&fc))],
    )?;
    Ok(format!(
        "{n}-step forecast from {} written to {}\n",
        model.next_period_start.format(TIMESTAMP_FORMAT),
        cfg.output.dir.display()
    ))
}

fn span_label(ts: &TensorSeries) -> String {
    let cycle: usize = ts.periods().iter().product();
    let last = ts.period_starts[ts.len() - 1] + Duration::hours(cycle as i64 - 1);
    format!("{}..{}", ts.period_starts[0].format(TIMESTAMP_FORMAT), last.format(TIMESTAMP_FORMAT))
}

/// Rolling evaluation of `models` under the config's plan.
pub fn run_backtest(cfg: &RunConfig, ts: &TensorSeries, models: &[&dyn Forecaster], ranks: &Ranks) -> Result<EvalReport, CliError> {
    let b = &cfg.backtest;
    let train = if b.train_length == 0 { ts.len() / 2 } else { b.train_length };
    let mut plan = RollingPlan::new(train, b.horizons.clone());
    plan.normalizer = b.normalizer;
    plan.validate(ts.len()).map_err(|e| usage(format!("backtest split: {e}")))?;
    let meta = ReportMetadata {
        ranks: ranks.to_string(),
        config_hash: cfg.hash(),
        span: span_label(ts),
        train_length: train,
        test_length: ts.len() - train,
        horizons: plan.horizons.clone(),
        normalizer: plan.normalizer,
    };
    Ok(rolling_evaluate(models, ts, &plan, meta)?)
}

/// The TFM plus enabled benchmarks. With `ranks = "auto"` the ranks are
/// chosen once on the first training window.
pub fn configured_models(cfg: &RunConfig, ts: &TensorSeries) -> Result<(Ranks, Vec<Box<dyn Forecaster>>), CliError> {
    let train = if cfg.backtest.train_length == 0 { ts.len() / 2 } else { cfg.backtest.train_length };
    let head = ts.slice(0..train.clamp(1, ts.len()))?;
    let (ranks, _) = choose_ranks(cfg, &head)?;
    let b = &cfg.backtest;
    let mut models: Vec<Box<dyn Forecaster>> = Vec::new();
    if b.tfm {
        let mut tfm = TfmForecaster::new(ranks.clone(), cfg.factor_periods());
        tfm.score_model = cfg.score_model();
        models.push(Box::new(tfm));
    }
    if b.mfm {
        models.push(Box::new(BenchmarkForecaster::new(Benchmark::Mfm(cfg.mfm_config()))));
    }
    if b.vfm {
        models.push(Box::new(BenchmarkForecaster::new(Benchmark::Vfm(cfg.vfm_config()))));
    }
    if b.fts {
        models.push(Box::new(BenchmarkForecaster::new(Benchmark::Fpca(cfg.fpca_config()))));
    }
    Ok((ranks, models))
}

fn report_files(r: &EvalReport) -> Result<Vec<(&'static str, Vec<u8>)>, CliError> {
    Ok(vec![
        (REPORT_FILES[0], report_csv(r)?.into_bytes()),
        (REPORT_FILES[1], report_json(r)?.into_bytes()),
        (REPORT_FILES[2], report_markdown(r).into_bytes()),
        (REPORT_FILES[3], trace_csv(r)?.into_bytes()),
    ])
}

fn cmd_backtest(cfg: &RunConfig) -> Result<String, CliError> {
    let ts = load_series(cfg)?;
    let (ranks, models) = configured_models(cfg, &ts)?;
    let refs: Vec<&dyn Forecaster> = models.iter().map(|m| m.as_ref()).collect();
    info!("backtesting {} models on T = {}", refs.len(), ts.len());
    let report = run_backtest(cfg, &ts, &refs, &ranks)?;
    commit(&cfg.output.dir, report_files(&report)?)?;
    let failed = report.cells.iter().filter(|c| c.error.is_some()).count();
    let mut s = report_markdown(&report);
    if failed > 0 {
        writeln!(s, "\n{failed} cells failed; see report.csv").unwrap();
    }
    Ok(s)
}

fn cmd_simulate(cfg: &RunConfig) -> Result<String, CliError> {
    let spec = cfg.sim_spec()?;
    let (ts, truth) = simulate(&spec)?;
    let truth_json = serde_json::to_vec_pretty(&truth).map_err(|e| CliError::Compute(e.to_string()))?;
    let bytes = encode_tensor_series(&ts);
    commit(&cfg.output.dir, vec![(SERIES_FILE, bytes), (TRUTH_FILE, truth_json)])?;
    Ok(format!(
        "simulated dims {:?}, T = {}, ranks {} (seed {})\n",
        ts.dims(),
        ts.len(),
        spec.ranks,
        spec.seed
    ))
}

fn cmd_report(cfg: &RunConfig) -> Result<String, CliError> {
    let path = cfg.output.dir.join("report.json");
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Compute(format!("{}: {e}", path.display())))?;
    let report = parse_report_json(&text)?;
    let md = report_markdown(&report);
    commit(&cfg.output.dir, vec![(REPORT_FILES[2], md.clone().into_bytes())])?;
    Ok(md)
}
