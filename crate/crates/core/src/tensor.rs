//! Dense row-major f64 tensors. The carrier type for every numeric
//! quantity in the crate; only the handful of operations the network
//! engine needs are implemented.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "shape {:?} expects {} elements, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Row count of a 2-D tensor.
    pub fn rows(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[0]
    }

    /// Column count of a 2-D tensor.
    pub fn cols(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[1]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    /// `[m × k] · [k × n] -> [m × n]`
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape.len() != 2 || other.shape.len() != 2 || self.cols() != other.rows() {
            return Err(Error::Dimension(format!(
                "matmul {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let (m, k, n) = (self.rows(), self.cols(), other.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                let brow = &other.data[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Tensor::new(vec![m, n], out)
    }

    /// `selfᵀ · other`: `[m × k]ᵀ · [m × n] -> [k × n]`. Used for weight
    /// gradients (inputᵀ · delta) without materializing the transpose.
    pub fn t_matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape.len() != 2 || other.shape.len() != 2 || self.rows() != other.rows() {
            return Err(Error::Dimension(format!(
                "t_matmul {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let (m, k, n) = (self.rows(), self.cols(), other.cols());
        let mut out = vec![0.0; k * n];
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                let brow = &other.data[i * n..(i + 1) * n];
                let orow = &mut out[p * n..(p + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Tensor::new(vec![k, n], out)
    }

    /// `self · otherᵀ`: `[m × k] · [n × k]ᵀ -> [m × n]`. Used for input
    /// gradients (delta · weightsᵀ).
    pub fn matmul_t(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape.len() != 2 || other.shape.len() != 2 || self.cols() != other.cols() {
            return Err(Error::Dimension(format!(
                "matmul_t {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let (m, k, n) = (self.rows(), self.cols(), other.rows());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let arow = &self.data[i * k..(i + 1) * k];
                let brow = &other.data[j * k..(j + 1) * k];
                out[i * n + j] = arow.iter().zip(brow).map(|(a, b)| a * b).sum();
            }
        }
        Tensor::new(vec![m, n], out)
    }

    /// Adds a `[n]` bias to every row of a `[m × n]` tensor.
    pub fn add_row(&mut self, bias: &Tensor) -> Result<()> {
        if bias.len() != self.cols() {
            return Err(Error::Dimension(format!(
                "bias length {} vs {} columns",
                bias.len(),
                self.cols()
            )));
        }
        let n = self.cols();
        for row in self.data.chunks_mut(n) {
            for (v, b) in row.iter_mut().zip(&bias.data) {
                *v += b;
            }
        }
        Ok(())
    }

    /// Column sums of a 2-D tensor, as a `[n]` tensor.
    pub fn col_sum(&self) -> Tensor {
        let n = self.cols();
        let mut out = vec![0.0; n];
        for row in self.data.chunks(n) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        Tensor {
            shape: vec![n],
            data: out,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    /// `self += other`, shape-checked.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "add_assign {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// `self += s * other`, shape-checked.
    pub fn add_scaled(&mut self, other: &Tensor, s: f64) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "add_scaled {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    /// Concatenates 2-D tensors with equal row counts along columns.
    pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
        let rows = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?
            .rows();
        if parts.iter().any(|p| p.rows() != rows) {
            return Err(Error::Dimension("concat_cols: row counts differ".into()));
        }
        let total: usize = parts.iter().map(|p| p.cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row(r));
            }
        }
        Tensor::new(vec![rows, total], data)
    }

    /// Splits a 2-D tensor column-wise into blocks of the given widths.
    pub fn split_cols(&self, widths: &[usize]) -> Result<Vec<Tensor>> {
        if widths.iter().sum::<usize>() != self.cols() {
            return Err(Error::Dimension(format!(
                "split widths {:?} vs {} columns",
                widths,
                self.cols()
            )));
        }
        let rows = self.rows();
        let mut out: Vec<Tensor> = widths
            .iter()
            .map(|&w| Tensor::zeros(vec![rows, w]))
            .collect();
        for r in 0..rows {
            let mut off = 0;
            for (part, &w) in out.iter_mut().zip(widths) {
                part.data[r * w..(r + 1) * w].copy_from_slice(&self.data[r * self.cols() + off..r * self.cols() + off + w]);
                off += w;
            }
        }
        Ok(out)
    }

    /// Gathers rows of a 2-D tensor by index.
    pub fn gather_rows(&self, idx: &[usize]) -> Result<Tensor> {
        let c = self.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            if i >= self.rows() {
                return Err(Error::InvalidArgument(format!(
                    "row index {} out of range {}",
                    i,
                    self.rows()
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Tensor::new(vec![idx.len(), c], data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Errors with the tensor's identifier if any element is NaN/Inf.
    pub fn check_finite(&self, ident: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::numeric(ident, "non-finite value"))
        }
    }
}
