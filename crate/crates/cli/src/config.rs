//! `RunConfig`: the TOML file every subcommand reads.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stfm_core::benchmarks::{ComponentCount, FpcaConfig, MfmConfig, VfmConfig};
use stfm_core::eval::{FactorPeriods, Normalizer, DEFAULT_HORIZONS};
use stfm_core::panel::{parse_timestamp, Span};
use stfm_core::seasonal::ScoreModel;
use stfm_core::sim::{FactorProcess, SimSpec};
use stfm_core::Ranks;

use crate::CliError;

/// Printed by `--help`.
pub const SCHEMA: &str = r#"CONFIGURATION (TOML; unknown keys are rejected)

seed = 0                          # single source of randomness

[data]
paths = []                        # provider CSVs, `Datetime,<NAME>_MW`
# archive = "out/series.stfm"     # folded archive to read instead of paths
# start = "2012-01-02 00:00:00"   # optional inclusive span
# end = "2018-07-29 23:00:00"

[calendar]
periods = [7, 24]                 # nested seasonal periods, outermost first
anchor = []                       # position of the first hour; derived for [7, 24]

[model]
ranks = [1, 1, 2]                 # (R, K1, ..., KM) or "auto"
rank_max = [3, 3, 3]              # candidate caps for "auto"
standardize = true                # per-cell mean/sd before estimation
period = 52                       # seasonal period of factor series
period_overrides = []             # [[coordinate, period], ...]
score_model = "ar1"               # "ar1" or "auto_ar"
max_ar_order = 5                  # for "auto_ar"

[forecast]
horizon = 26

[backtest]
train_length = 0                  # 0 means floor(T / 2)
horizons = [1, 4, 13, 26]
normalizer = "variance"           # "variance" or "std_dev"
tfm = true
mfm = true
mfm_ranks = [1, 2]
vfm = true
vfm_factors = 2
vfm_stacked = false
fts = true
fts_components = "auto"           # "auto" or an integer
fts_max_ar_order = 5

[simulate]                        # required by `simulate`
dims = [9, 7, 24]
ranks = [1, 1, 2]
periods = 342
noise_sd = 0.0
level_sd = []
mu = 0.0
mu_spread = 0.0
sigma = 1.0
sigma_spread = 0.0
[simulate.factor]
level = 0.0
ar_coefficient = 0.5
innovation_sd = 1.0
seasonal_amplitudes = [2.0]
seasonal_periods = [52.0]

[output]
dir = "out"
"#;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataSection,
    pub calendar: CalendarSection,
    pub model: ModelSection,
    pub forecast: ForecastSection,
    pub backtest: BacktestSection,
    pub simulate: Option<SimulateSection>,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub paths: Vec<PathBuf>,
    pub archive: Option<PathBuf>,
    pub start: Option<String>,
    pub end: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalendarSection {
    pub periods: Vec<usize>,
    pub anchor: Vec<usize>,
}

impl Default for CalendarSection {
    fn default() -> Self {
        Self {
            periods: vec![7, 24],
            anchor: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RankSetting {
    Fixed(Vec<usize>),
    Auto(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreModelName {
    Ar1,
    AutoAr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub ranks: RankSetting,
    pub rank_max: Vec<usize>,
    pub standardize: bool,
    pub period: usize,
    pub period_overrides: Vec<(usize, usize)>,
    pub score_model: ScoreModelName,
    pub max_ar_order: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            ranks: RankSetting::Fixed(vec![1, 1, 2]),
            rank_max: vec![3, 3, 3],
            standardize: true,
            period: 52,
            period_overrides: Vec::new(),
            score_model: ScoreModelName::Ar1,
            max_ar_order: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastSection {
    pub horizon: usize,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self { horizon: 26 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComponentSetting {
    Fixed(usize),
    Auto(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestSection {
    pub train_length: usize,
    pub horizons: Vec<usize>,
    pub normalizer: Normalizer,
    pub tfm: bool,
    pub mfm: bool,
    pub mfm_ranks: [usize; 2],
    pub vfm: bool,
    pub vfm_factors: usize,
    pub vfm_stacked: bool,
    pub fts: bool,
    pub fts_components: ComponentSetting,
    pub fts_max_ar_order: usize,
}

impl Default for BacktestSection {
    fn default() -> Self {
        Self {
            train_length: 0,
            horizons: DEFAULT_HORIZONS.to_vec(),
            normalizer: Normalizer::Variance,
            tfm: true,
            mfm: true,
            mfm_ranks: [1, 2],
            vfm: true,
            vfm_factors: 2,
            vfm_stacked: false,
            fts: true,
            fts_components: ComponentSetting::Auto("auto".into()),
            fts_max_ar_order: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub periods: usize,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub level_sd: Vec<f64>,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub mu_spread: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub sigma_spread: f64,
    #[serde(default)]
    pub factor: FactorProcess,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn ranks_from(v: &[usize], what: &str) -> Result<Ranks, CliError> {
    match v {
        [r, k @ ..] if !k.is_empty() => Ok(Ranks::new(*r, k.to_vec())),
        _ => Err(usage(format!("{what} needs at least two entries (R, K1, ...), got {v:?}"))),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    /// `(N, S₁, …)` minus the provider count, which only the data knows.
    fn seasonal_modes(&self) -> usize {
        self.calendar.periods.len()
    }

    /// Checks everything that does not depend on data contents.
    pub fn validate(&self) -> Result<(), CliError> {
        let cal = &self.calendar;
        if cal.periods.is_empty() || cal.periods.iter().any(|&s| s < 2) {
            return Err(usage(format!("calendar.periods must all be >= 2, got {:?}", cal.periods)));
        }
        if !cal.anchor.is_empty()
            && (cal.anchor.len() != cal.periods.len() || cal.anchor.iter().zip(&cal.periods).any(|(a, s)| a >= s))
        {
            return Err(usage(format!("calendar.anchor {:?} does not fit periods {:?}", cal.anchor, cal.periods)));
        }
        if cal.anchor.is_empty() && cal.periods != [7, 24] {
            return Err(usage("calendar.anchor is required unless periods = [7, 24]"));
        }

        let m = &self.model;
        match &m.ranks {
            RankSetting::Auto(s) if s == "auto" => {
                if m.rank_max.len() != self.seasonal_modes() + 1 || m.rank_max.contains(&0) {
                    return Err(usage(format!(
                        "model.rank_max needs {} positive entries, got {:?}",
                        self.seasonal_modes() + 1,
                        m.rank_max
                    )));
                }
            }
            RankSetting::Auto(s) => return Err(usage(format!("model.ranks must be a list or \"auto\", got {s:?}"))),
            RankSetting::Fixed(v) => {
                let r = ranks_from(v, "model.ranks")?;
                r.validate(&self.model_dims_hint()).map_err(|e| usage(format!("model.ranks: {e}")))?;
            }
        }
        if m.period < 2 || m.period_overrides.iter().any(|&(_, p)| p < 2) {
            return Err(usage("factor seasonal periods must be >= 2"));
        }
        if m.score_model == ScoreModelName::AutoAr && m.max_ar_order == 0 {
            return Err(usage("model.max_ar_order must be >= 1"));
        }
        if self.forecast.horizon == 0 {
            return Err(usage("forecast.horizon must be >= 1"));
        }

        let b = &self.backtest;
        if b.horizons.is_empty() || b.horizons.contains(&0) {
            return Err(usage(format!("backtest.horizons must be non-empty and >= 1, got {:?}", b.horizons)));
        }
        if b.train_length == 1 {
            return Err(usage("backtest.train_length must be 0 (half of T) or >= 2"));
        }
        if !(b.tfm || b.mfm || b.vfm || b.fts) {
            return Err(usage("backtest enables no models"));
        }
        if b.mfm && self.seasonal_modes() != 2 {
            return Err(usage("the MFM benchmark needs exactly two calendar levels"));
        }
        if b.mfm && (b.mfm_ranks[0] == 0 || b.mfm_ranks[1] == 0) {
            return Err(usage("backtest.mfm_ranks must be positive"));
        }
        if b.vfm && b.vfm_factors == 0 {
            return Err(usage("backtest.vfm_factors must be >= 1"));
        }
        if b.fts && self.seasonal_modes() != 2 {
            return Err(usage("the FTS benchmark needs exactly two calendar levels"));
        }
        if let ComponentSetting::Auto(s) = &b.fts_components {
            if s != "auto" {
                return Err(usage(format!("backtest.fts_components must be an integer or \"auto\", got {s:?}")));
            }
        }
        if b.fts_components == ComponentSetting::Fixed(0) || b.fts_max_ar_order == 0 {
            return Err(usage("backtest FTS settings must be positive"));
        }

        self.span()?;
        if let Some(s) = &self.simulate {
            self.sim_spec_from(s)?;
        }
        Ok(())
    }

    /// Upper bounds for rank checks before the data is read; mode 0 is
    /// checked against the real provider count later.
    fn model_dims_hint(&self) -> Vec<usize> {
        std::iter::once(usize::MAX).chain(self.calendar.periods.iter().copied()).collect()
    }

    pub fn span(&self) -> Result<Option<Span>, CliError> {
        let parse = |s: &Option<String>, key: &str| -> Result<Option<chrono::NaiveDateTime>, CliError> {
            s.as_deref()
                .map(|v| parse_timestamp(v).ok_or_else(|| usage(format!("data.{key}: cannot parse {v:?}"))))
                .transpose()
        };
        match (parse(&self.data.start, "start")?, parse(&self.data.end, "end")?) {
            (Some(start), Some(end)) if start <= end => Ok(Some(Span { start, end })),
            (Some(_), Some(_)) => Err(usage("data.start is after data.end")),
            (None, None) => Ok(None),
            _ => Err(usage("data.start and data.end must be given together")),
        }
    }

    pub fn fixed_ranks(&self) -> Option<Ranks> {
        match &self.model.ranks {
            RankSetting::Fixed(v) => ranks_from(v, "model.ranks").ok(),
            RankSetting::Auto(_) => None,
        }
    }

    pub fn factor_periods(&self) -> FactorPeriods {
        FactorPeriods {
            default: self.model.period,
            overrides: self.model.period_overrides.clone(),
        }
    }

    pub fn score_model(&self) -> ScoreModel {
        match self.model.score_model {
            ScoreModelName::Ar1 => ScoreModel::Ar1,
            ScoreModelName::AutoAr => ScoreModel::AutoAr {
                max_order: self.model.max_ar_order,
            },
        }
    }

    pub fn mfm_config(&self) -> MfmConfig {
        MfmConfig {
            k_day: self.backtest.mfm_ranks[0],
            k_hour: self.backtest.mfm_ranks[1],
            period: self.model.period,
        }
    }

    pub fn vfm_config(&self) -> VfmConfig {
        VfmConfig {
            factors: self.backtest.vfm_factors,
            period: self.model.period,
            stacked: self.backtest.vfm_stacked,
        }
    }

    pub fn fpca_config(&self) -> FpcaConfig {
        FpcaConfig {
            components: match self.backtest.fts_components {
                ComponentSetting::Fixed(k) => ComponentCount::Fixed(k),
                ComponentSetting::Auto(_) => ComponentCount::Auto,
            },
            period: self.model.period,
            max_ar_order: self.backtest.fts_max_ar_order,
        }
    }

    fn sim_spec_from(&self, s: &SimulateSection) -> Result<SimSpec, CliError> {
        let mut spec = SimSpec::new(s.dims.clone(), ranks_from(&s.ranks, "simulate.ranks")?, s.periods);
        spec.factor = s.factor.clone();
        spec.noise_sd = s.noise_sd;
        spec.level_sd = s.level_sd.clone();
        spec.mu = s.mu;
        spec.mu_spread = s.mu_spread;
        spec.sigma = s.sigma;
        spec.sigma_spread = s.sigma_spread;
        spec.seed = self.seed;
        spec.validate().map_err(|e| usage(format!("simulate: {e}")))?;
        if s.dims.len() != self.seasonal_modes() + 1 || s.dims[1..] != self.calendar.periods[..] {
            return Err(usage(format!(
                "simulate.dims {:?} must be (N, {:?})",
                s.dims, self.calendar.periods
            )));
        }
        Ok(spec)
    }

    pub fn sim_spec(&self) -> Result<SimSpec, CliError> {
        let s = self.simulate.as_ref().ok_or_else(|| usage("config has no [simulate] section"))?;
        self.sim_spec_from(s)
    }

    /// Digest of the settings that influence results; file locations are
    /// excluded so the same analysis hashes identically wherever it runs.
    pub fn hash(&self) -> String {
        let mut view = self.clone();
        view.data.paths.clear();
        view.data.archive = None;
        view.output = OutputSection::default();
        let json = serde_json::to_vec(&view).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c.fixed_ranks(), Some(Ranks::new(1, vec![1, 2])));
        assert_eq!(c.backtest.horizons, vec![1, 4, 13, 26]);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[model]\nrank = [1,1,1]\n").is_err());
        assert!(RunConfig::from_toml("colour = 1\n").is_err());
    }

    #[test]
    fn auto_ranks_parse_and_other_strings_fail() {
        let c = RunConfig::from_toml("[model]\nranks = \"auto\"\n").unwrap();
        c.validate().unwrap();
        assert_eq!(c.fixed_ranks(), None);
        let bad = RunConfig::from_toml("[model]\nranks = \"best\"\n").unwrap();
        assert!(matches!(bad.validate(), Err(CliError::Usage(_))));
    }

    #[test]
    fn rank_exceeding_calendar_is_a_usage_error() {
        let c = RunConfig::from_toml("[model]\nranks = [1, 8, 2]\n").unwrap();
        assert!(matches!(c.validate(), Err(CliError::Usage(_))));
    }

    #[test]
    fn hash_ignores_locations_but_not_settings() {
        let a = RunConfig::from_toml("[output]\ndir = \"a\"\n").unwrap();
        let b = RunConfig::from_toml("[output]\ndir = \"b\"\n[data]\narchive = \"x\"\n").unwrap();
        let c = RunConfig::from_toml("seed = 3\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn half_span_is_rejected() {
        let c = RunConfig::from_toml("[data]\nstart = \"2012-01-02 00:00:00\"\n").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn schema_text_parses_as_defaults() {
        let mut c = RunConfig::from_toml(SCHEMA.split_once('\n').unwrap().1).unwrap();
        assert!(c.simulate.is_some());
        c.simulate = None;
        assert_eq!(c, RunConfig::default());
    }
}
