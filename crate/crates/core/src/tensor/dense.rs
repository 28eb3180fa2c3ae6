use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{mismatch, Error, Result};

/// Multi-way real array.
///
/// Entries are stored in a single flat buffer with the first mode varying
/// fastest. Modes are addressed 0-based throughout the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorParts")]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorParts {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl TryFrom<TensorParts> for DenseTensor {
    type Error = Error;

    fn try_from(p: TensorParts) -> Result<Self> {
        Self::new(p.dims, p.data)
    }
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_dims(&dims)?;
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(mismatch(format!(
                "tensor {dims:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            dims: dims.to_vec(),
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn filled(dims: &[usize], value: f64) -> Self {
        Self {
            dims: dims.to_vec(),
            data: vec![value; dims.iter().product()],
        }
    }

    /// Fills every entry from its multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..len {
            data.push(f(&idx));
            advance(&mut idx, dims);
        }
        Self {
            dims: dims.to_vec(),
            data,
        }
    }

    /// Builds a tensor from a buffer with the last mode varying fastest.
    pub fn from_row_major(dims: Vec<usize>, row_major: &[f64]) -> Result<Self> {
        check_dims(&dims)?;
        let len: usize = dims.iter().product();
        if row_major.len() != len {
            return Err(mismatch(format!(
                "tensor {dims:?} needs {len} entries, got {}",
                row_major.len()
            )));
        }
        let strides = row_major_strides(&dims);
        Ok(Self::from_fn(&dims, |idx| {
            row_major[idx.iter().zip(&strides).map(|(i, s)| i * s).sum::<usize>()]
        }))
    }

    /// Entries with the last mode varying fastest.
    pub fn to_row_major(&self) -> Vec<f64> {
        let strides = row_major_strides(&self.dims);
        let mut out = vec![0.0; self.data.len()];
        let mut idx = vec![0usize; self.dims.len()];
        for &v in &self.data {
            let pos: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            out[pos] = v;
            advance(&mut idx, &self.dims);
        }
        out
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        let mut stride = 1;
        for (i, d) in idx.iter().zip(&self.dims) {
            off += i * stride;
            stride *= d;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.dims.len() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.dims.len(),
            });
        }
        Ok(())
    }

    /// Mode-`mode` matricization.
    ///
    /// Row index is the mode's own index; the column index enumerates the
    /// remaining modes in ascending order with the lowest one varying fastest.
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        self.check_mode(mode)?;
        let p = self.dims[mode];
        let left: usize = self.dims[..mode].iter().product();
        let right: usize = self.dims[mode + 1..].iter().product();
        let cols = left * right;
        let mut out = vec![0.0; p * cols];
        for b in 0..right {
            for i in 0..p {
                let src = &self.data[left * (i + p * b)..left * (i + p * b) + left];
                let dst = &mut out[i * cols + left * b..i * cols + left * b + left];
                dst.copy_from_slice(src);
            }
        }
        Matrix::new(p, cols, out)
    }

    /// Inverse of [`unfold`](Self::unfold).
    pub fn refold(m: &Matrix, mode: usize, dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        if mode >= dims.len() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: dims.len(),
            });
        }
        let p = dims[mode];
        let left: usize = dims[..mode].iter().product();
        let right: usize = dims[mode + 1..].iter().product();
        if m.shape() != (p, left * right) {
            return Err(mismatch(format!(
                "cannot refold {}x{} along mode {mode} into {dims:?}",
                m.rows(),
                m.cols()
            )));
        }
        let cols = left * right;
        let src = m.data();
        let mut data = vec![0.0; p * cols];
        for b in 0..right {
            for i in 0..p {
                data[left * (i + p * b)..left * (i + p * b) + left]
                    .copy_from_slice(&src[i * cols + left * b..i * cols + left * b + left]);
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Mode-`mode` product: every mode fiber is premultiplied by `a`.
    pub fn mode_product(&self, a: &Matrix, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        let p = self.dims[mode];
        if a.cols() != p {
            return Err(mismatch(format!(
                "mode-{mode} product needs {p} columns, matrix is {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let d = a.rows();
        let left: usize = self.dims[..mode].iter().product();
        let right: usize = self.dims[mode + 1..].iter().product();
        let mut dims = self.dims.clone();
        dims[mode] = d;
        let mut data = vec![0.0; left * d * right];
        for b in 0..right {
            for i in 0..p {
                let src = &self.data[left * (i + p * b)..left * (i + p * b) + left];
                for r in 0..d {
                    let w = a.get(r, i);
                    if w == 0.0 {
                        continue;
                    }
                    let dst = &mut data[left * (r + d * b)..left * (r + d * b) + left];
                    for (o, x) in dst.iter_mut().zip(src) {
                        *o += w * x;
                    }
                }
            }
        }
        Ok(Self { dims, data })
    }

    /// Applies `mats[k]` along mode `k` for every k, in mode order.
    pub fn multi_mode_product(&self, mats: &[&Matrix]) -> Result<Self> {
        if mats.len() != self.order() {
            return Err(mismatch(format!(
                "{} matrices for a tensor with {} modes",
                mats.len(),
                self.order()
            )));
        }
        let mut out = self.clone();
        for (k, m) in mats.iter().enumerate() {
            out = out.mode_product(m, k)?;
        }
        Ok(out)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dims != other.dims {
            return Err(mismatch(format!(
                "tensor dims {:?} and {:?} differ",
                self.dims, other.dims
            )));
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sub-tensor with mode 0 fixed at `i`, as a tensor over the remaining modes.
    pub fn slice_first(&self, i: usize) -> Result<Self> {
        if self.order() < 2 {
            return Err(mismatch("slice_first needs at least two modes"));
        }
        let n = self.dims[0];
        if i >= n {
            return Err(mismatch(format!("index {i} out of range for extent {n}")));
        }
        let data = self.data.iter().skip(i).step_by(n).copied().collect();
        Ok(Self {
            dims: self.dims[1..].to_vec(),
            data,
        })
    }
}

/// Frobenius norm of a tensor.
pub fn frobenius_norm(x: &DenseTensor) -> f64 {
    x.frobenius_norm()
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(mismatch(format!("invalid extents {dims:?}")));
    }
    if dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).is_none() {
        return Err(mismatch(format!("extents {dims:?} overflow")));
    }
    Ok(())
}

fn row_major_strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    strides
}

/// Increments a multi-index in canonical (first-mode-fastest) order.
pub(crate) fn advance(idx: &mut [usize], dims: &[usize]) {
    for (i, d) in idx.iter_mut().zip(dims) {
        *i += 1;
        if *i < *d {
            return;
        }
        *i = 0;
    }
}
