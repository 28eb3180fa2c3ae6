//! On-disk forms of folded tensor series and fitted models.
//!
//! Tensor archive layout (little endian):
//!
//! ```text
//! magic   8 bytes  "STFMTNS1"
//! order   u32, then order × u32 dims (N, S₁, …, S_M)
//! labels  N × (u32 byte length, UTF-8)
//! T       u32, then T × i64 period starts (seconds since the Unix epoch)
//! data    T × ∏dims f64, each tensor in row-major order
//! ```
//!
//! Fitted models are JSON.

use std::fs;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Standardization, TensorSeries};
use crate::tensor::DenseTensor;
use crate::tfm::{FactorSeries, LoadingSet, Ranks};

pub const TENSOR_MAGIC: &[u8; 8] = b"STFMTNS1";
pub const MODEL_FORMAT: &str = "stfm-model/1";

fn bad(msg: impl Into<String>) -> Error {
    Error::Archive(msg.into())
}

pub fn encode_tensor_series(ts: &TensorSeries) -> Vec<u8> {
    let dims = ts.dims();
    let cells: usize = dims.iter().product();
    let mut out = Vec::with_capacity(64 + ts.len() * (8 + 8 * cells));
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for d in dims {
        out.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    for p in &ts.providers {
        out.extend_from_slice(&(p.len() as u32).to_le_bytes());
        out.extend_from_slice(p.as_bytes());
    }
    out.extend_from_slice(&(ts.len() as u32).to_le_bytes());
    for s in &ts.period_starts {
        out.extend_from_slice(&s.and_utc().timestamp().to_le_bytes());
    }
    for t in &ts.tensors {
        for v in t.to_row_major() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| bad(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn decode_tensor_series(bytes: &[u8]) -> Result<TensorSeries> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != TENSOR_MAGIC {
        return Err(bad("not a tensor archive"));
    }
    let order = r.u32()?;
    if !(2..=16).contains(&order) {
        return Err(bad(format!("unsupported tensor order {order}")));
    }
    let dims = (0..order).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let cells = dims
        .iter()
        .try_fold(1usize, |acc, &d| if d == 0 { None } else { acc.checked_mul(d) })
        .ok_or_else(|| bad(format!("invalid dims {dims:?}")))?;
    let mut providers = Vec::new();
    for _ in 0..dims[0] {
        let len = r.u32()?;
        let label = std::str::from_utf8(r.take(len)?).map_err(|_| bad("provider label is not UTF-8"))?;
        providers.push(label.to_string());
    }
    let t_len = r.u32()?;
    if t_len == 0 {
        return Err(bad("archive holds no tensors"));
    }
    let payload = t_len
        .checked_mul(cells)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(8 * t_len))
        .ok_or_else(|| bad("archive size overflows"))?;
    if r.remaining() != payload {
        return Err(bad(format!(
            "expected {payload} payload bytes, found {}",
            r.remaining()
        )));
    }
    let starts = (0..t_len)
        .map(|_| {
            let secs = r.i64()?;
            DateTime::from_timestamp(secs, 0)
                .map(|d| d.naive_utc())
                .ok_or_else(|| bad(format!("timestamp {secs} out of range")))
        })
        .collect::<Result<Vec<NaiveDateTime>>>()?;
    let mut tensors = Vec::with_capacity(t_len);
    let mut row = vec![0.0; cells];
    for _ in 0..t_len {
        for (v, b) in row.iter_mut().zip(r.take(8 * cells)?.chunks_exact(8)) {
            *v = f64::from_le_bytes(b.try_into().expect("8 bytes"));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite value in tensor payload"));
        }
        tensors.push(DenseTensor::from_row_major(dims.clone(), &row)?);
    }
    TensorSeries::new(providers, tensors, starts)
}

pub fn write_tensor_archive(path: &Path, ts: &TensorSeries) -> Result<()> {
    fs::write(path, encode_tensor_series(ts))?;
    Ok(())
}

pub fn read_tensor_archive(path: &Path) -> Result<TensorSeries> {
    decode_tensor_series(&fs::read(path)?)
}

/// Everything needed to reconstruct and forecast from a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArchive {
    pub format: String,
    pub providers: Vec<String>,
    pub ranks: Ranks,
    pub loadings: LoadingSet,
    pub standardization: Standardization,
    pub factors: FactorSeries,
    /// Start of the period following the last fitted one.
    pub next_period_start: NaiveDateTime,
    pub factor_periods: Vec<usize>,
    pub in_sample_mse: f64,
    pub clamped_cells: usize,
    pub config_hash: String,
}

impl ModelArchive {
    /// Structural consistency of a decoded archive.
    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(bad(format!("unknown model format {:?}", self.format)));
        }
        let dims = self.standardization.dims().to_vec();
        for m in self.loadings.matrices() {
            if m.data().len() != m.rows() * m.cols() || m.cols() == 0 {
                return Err(bad("malformed loading matrix"));
            }
        }
        for t in [&self.standardization.mu, &self.standardization.sigma]
            .into_iter()
            .chain(&self.factors.tensors)
        {
            if t.dims().is_empty() || t.data().len() != t.dims().iter().product::<usize>() {
                return Err(bad("malformed tensor"));
            }
        }
        Standardization::new(self.standardization.mu.clone(), self.standardization.sigma.clone())
            .map_err(|e| bad(e.to_string()))?;
        self.loadings.check_dims(&dims).map_err(|e| bad(e.to_string()))?;
        if self.loadings.ranks() != self.ranks || self.providers.len() != dims[0] {
            return Err(bad("ranks or providers disagree with loadings"));
        }
        let fdims = self.ranks.factor_dims();
        if self.factors.is_empty() || self.factors.tensors.iter().any(|f| f.dims() != fdims.as_slice()) {
            return Err(bad("factor series missing or mis-shaped"));
        }
        if self.factor_periods.len() != fdims.iter().product::<usize>() {
            return Err(bad("one seasonal period per factor coordinate required"));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
