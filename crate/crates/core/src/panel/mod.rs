//! Raw hourly panels, calendar folding into per-period tensors, and
//! per-cell standardization.

mod csv;
mod standardize;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};

pub use self::csv::{
    align, ingest_csv, parse_provider_csv, parse_timestamp, IngestReport, RawSeries, Span,
    MAX_INTERPOLATED_GAP, MAX_MISSING_FRACTION, TIMESTAMP_FORMAT,
};
pub use standardize::{
    destandardize, estimate_standardization, standardize, Standardization, StandardizationFit,
};

use crate::error::{invalid, mismatch, Result};
use crate::tensor::DenseTensor;

/// N aligned hourly series sharing one timestamp axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSeries {
    pub providers: Vec<String>,
    pub timestamps: Vec<NaiveDateTime>,
    /// `values[i][τ]`, one row per provider.
    pub values: Vec<Vec<f64>>,
}

impl PanelSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn n_providers(&self) -> usize {
        self.providers.len()
    }
}

/// Nested seasonal periods `(S₁,…,S_M)` (outermost first, last varies
/// fastest in time) and the seasonal position of the panel's first hour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalendarSpec {
    periods: Vec<usize>,
    anchor: Vec<usize>,
}

impl CalendarSpec {
    pub fn new(periods: Vec<usize>, anchor: Vec<usize>) -> Result<Self> {
        if periods.is_empty() || periods.iter().any(|&s| s < 2) {
            return Err(invalid(format!("seasonal periods must all be >= 2, got {periods:?}")));
        }
        if anchor.len() != periods.len() || anchor.iter().zip(&periods).any(|(a, s)| a >= s) {
            return Err(invalid(format!("anchor {anchor:?} does not fit periods {periods:?}")));
        }
        Ok(Self { periods, anchor })
    }

    /// Day-of-week × hour-of-day calendar; weeks start Monday 00:00.
    pub fn weekly_hourly(first: NaiveDateTime) -> Self {
        Self {
            periods: vec![7, 24],
            anchor: vec![first.weekday().num_days_from_monday() as usize, first.hour() as usize],
        }
    }

    pub fn periods(&self) -> &[usize] {
        &self.periods
    }

    pub fn anchor(&self) -> &[usize] {
        &self.anchor
    }

    /// Hours in one full cycle, `S = ∏ S_j`.
    pub fn cycle_len(&self) -> usize {
        self.periods.iter().product()
    }

    /// Offset of the first hour inside its cycle.
    fn anchor_offset(&self) -> usize {
        let mut off = 0;
        for (a, s) in self.anchor.iter().zip(&self.periods) {
            off = off * s + a;
        }
        off
    }
}

/// Length-T sequence of `N × S₁ × … × S_M` tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSeries {
    pub providers: Vec<String>,
    pub tensors: Vec<DenseTensor>,
    pub period_starts: Vec<NaiveDateTime>,
}

impl TensorSeries {
    pub fn new(
        providers: Vec<String>,
        tensors: Vec<DenseTensor>,
        period_starts: Vec<NaiveDateTime>,
    ) -> Result<Self> {
        let first = tensors.first().ok_or_else(|| invalid("tensor series is empty"))?;
        if tensors.iter().any(|t| t.dims() != first.dims()) {
            return Err(mismatch("tensors in a series must share dims"));
        }
        if first.dims()[0] != providers.len() {
            return Err(mismatch(format!(
                "{} provider labels for mode extent {}",
                providers.len(),
                first.dims()[0]
            )));
        }
        if period_starts.len() != tensors.len() {
            return Err(mismatch("one period start per tensor required"));
        }
        Ok(Self {
            providers,
            tensors,
            period_starts,
        })
    }

    /// Series with synthetic labels and consecutive periods from a fixed Monday.
    pub fn unlabeled(tensors: Vec<DenseTensor>) -> Result<Self> {
        let first = tensors.first().ok_or_else(|| invalid("tensor series is empty"))?;
        let n = first.dims()[0];
        let cycle: usize = first.dims()[1..].iter().product();
        let epoch = synthetic_epoch();
        let starts = (0..tensors.len())
            .map(|t| epoch + Duration::hours((t * cycle) as i64))
            .collect();
        Self::new((0..n).map(|i| format!("P{}", i + 1)).collect(), tensors, starts)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn dims(&self) -> &[usize] {
        self.tensors[0].dims()
    }

    pub fn n_providers(&self) -> usize {
        self.dims()[0]
    }

    /// Seasonal extents `(S₁,…,S_M)`.
    pub fn periods(&self) -> &[usize] {
        &self.dims()[1..]
    }

    /// Contiguous sub-series `[range.start, range.end)`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(invalid(format!(
                "slice {range:?} out of bounds for series of length {}",
                self.len()
            )));
        }
        Ok(Self {
            providers: self.providers.clone(),
            tensors: self.tensors[range.clone()].to_vec(),
            period_starts: self.period_starts[range].to_vec(),
        })
    }

    /// Maps the tensors back to the hourly panel they were folded from.
    pub fn to_panel(&self) -> PanelSeries {
        let n = self.n_providers();
        let periods = self.periods().to_vec();
        let cycle: usize = periods.iter().product();
        let mut values = vec![Vec::with_capacity(self.len() * cycle); n];
        let mut timestamps = Vec::with_capacity(self.len() * cycle);
        let row_major: Vec<Vec<f64>> = self.tensors.iter().map(|t| t.to_row_major()).collect();
        for (t, rm) in row_major.iter().enumerate() {
            for (i, row) in values.iter_mut().enumerate() {
                row.extend_from_slice(&rm[i * cycle..(i + 1) * cycle]);
            }
            for h in 0..cycle {
                timestamps.push(self.period_starts[t] + Duration::hours(h as i64));
            }
        }
        PanelSeries {
            providers: self.providers.clone(),
            timestamps,
            values,
        }
    }
}

pub(crate) fn synthetic_epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2012, 7, 2)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
}

/// Folds an aligned panel into complete calendar cycles, dropping partial
/// cycles at both ends.
pub fn fold(panel: &PanelSeries, cal: &CalendarSpec) -> Result<TensorSeries> {
    let cycle = cal.cycle_len();
    let skip = (cycle - cal.anchor_offset()) % cycle;
    let total = panel.len();
    if panel.values.iter().any(|v| v.len() != total) {
        return Err(mismatch("panel rows differ in length from the timestamp axis"));
    }
    let t_len = total.saturating_sub(skip) / cycle;
    if t_len == 0 {
        return Err(invalid(format!(
            "{total} hours do not contain one complete {cycle}-hour cycle"
        )));
    }
    let n = panel.n_providers();
    let mut dims = vec![n];
    dims.extend_from_slice(cal.periods());
    let mut tensors = Vec::with_capacity(t_len);
    let mut starts = Vec::with_capacity(t_len);
    let mut row_major = Vec::with_capacity(n * cycle);
    for t in 0..t_len {
        let base = skip + t * cycle;
        row_major.clear();
        for row in &panel.values {
            row_major.extend_from_slice(&row[base..base + cycle]);
        }
        tensors.push(DenseTensor::from_row_major(dims.clone(), &row_major)?);
        starts.push(panel.timestamps[base]);
    }
    TensorSeries::new(panel.providers.clone(), tensors, starts)
}
