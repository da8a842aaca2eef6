use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{shape, Result};
use crate::Error;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

/// Dense real matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Wraps row-major data, rejecting a length mismatch or non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape(
                "Mat::from_vec",
                format!("{}x{} needs {} entries, got {}", rows, cols, rows * cols, data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("entry {} is not finite", pos)));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(shape("Mat::from_rows", format!("ragged rows: {} vs {}", r.len(), cols)));
            }
            data.extend_from_slice(r);
        }
        Mat::from_vec(rows.len(), cols, data)
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Mat::zeros(n, n);
        for (i, &x) in d.iter().enumerate() {
            m.data[i * n + i] = x;
        }
        m
    }

    /// n×1 column from a slice.
    pub fn column(v: &[f64]) -> Self {
        Mat { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows, "set_col length");
        for (i, &x) in v.iter().enumerate() {
            self.data[i * self.cols + j] = x;
        }
    }

    /// Columns `start..end` as a new matrix.
    pub fn col_range(&self, start: usize, end: usize) -> Mat {
        assert!(start <= end && end <= self.cols, "col_range out of bounds");
        let w = end - start;
        let mut out = Mat::zeros(self.rows, w);
        for i in 0..self.rows {
            out.row_mut(i).copy_from_slice(&self.row(i)[start..end]);
        }
        out
    }

    /// Gathers the listed columns in order.
    pub fn select_cols(&self, idx: &[usize]) -> Mat {
        let mut out = Mat::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            let src = self.row(i);
            let dst = out.row_mut(i);
            for (k, &j) in idx.iter().enumerate() {
                dst[k] = src[j];
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `self · b`. Panics on an inner-dimension mismatch.
    pub fn matmul(&self, b: &Mat) -> Mat {
        assert_eq!(self.cols, b.rows, "matmul: {:?} x {:?}", self.shape(), b.shape());
        let mut c = Mat::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            let arow = self.row(i);
            let crow = &mut c.data[i * b.cols..(i + 1) * b.cols];
            for (p, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                axpy(a, b.row(p), crow);
            }
        }
        c
    }

    /// `selfᵀ · b` without forming the transpose.
    pub fn t_matmul(&self, b: &Mat) -> Mat {
        assert_eq!(self.rows, b.rows, "t_matmul: {:?}ᵀ x {:?}", self.shape(), b.shape());
        let mut c = Mat::zeros(self.cols, b.cols);
        for p in 0..self.rows {
            let arow = self.row(p);
            let brow = b.row(p);
            for (i, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                axpy(a, brow, &mut c.data[i * b.cols..(i + 1) * b.cols]);
            }
        }
        c
    }

    /// `self · bᵀ` without forming the transpose.
    pub fn matmul_t(&self, b: &Mat) -> Mat {
        assert_eq!(self.cols, b.cols, "matmul_t: {:?} x {:?}ᵀ", self.shape(), b.shape());
        let mut c = Mat::zeros(self.rows, b.rows);
        for i in 0..self.rows {
            let arow = self.row(i);
            for j in 0..b.rows {
                c.data[i * b.rows + j] = dot(arow, b.row(j));
            }
        }
        c
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec length");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn scale(&self, c: f64) -> Mat {
        self.map(|x| c * x)
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for x in &mut self.data {
            *x *= c;
        }
    }

    pub fn add(&self, b: &Mat) -> Mat {
        self.zip(b, |x, y| x + y)
    }

    pub fn sub(&self, b: &Mat) -> Mat {
        self.zip(b, |x, y| x - y)
    }

    pub fn hadamard(&self, b: &Mat) -> Mat {
        self.zip(b, |x, y| x * y)
    }

    /// `self += alpha · b`.
    pub fn axpy_in_place(&mut self, alpha: f64, b: &Mat) {
        assert_eq!(self.shape(), b.shape(), "axpy shape");
        axpy(alpha, &b.data, &mut self.data);
    }

    fn zip(&self, b: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
        assert_eq!(self.shape(), b.shape(), "elementwise shape");
        let data = self.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.data[i * self.cols + i]).sum()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.data[i * self.cols + i]).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest |a_ij − a_ji|, or an error for a non-square matrix.
    pub fn asymmetry(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(shape("asymmetry", format!("{}x{} is not square", self.rows, self.cols)));
        }
        let n = self.rows;
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                dev = dev.max((self.data[i * n + j] - self.data[j * n + i]).abs());
            }
        }
        Ok(dev)
    }

    /// `(A + Aᵀ)/2`.
    pub fn symmetrize(&self) -> Mat {
        assert!(self.is_square(), "symmetrize needs a square matrix");
        let n = self.rows;
        Mat::from_fn(n, n, |i, j| 0.5 * (self.data[i * n + j] + self.data[j * n + i]))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Dot product with four partial sums so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `y += a · x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(r: usize, c: usize, off: f64) -> Mat {
        Mat::from_fn(r, c, |i, j| ((i * 7 + j * 3) as f64 * 0.37 + off).sin())
    }

    fn naive(a: &Mat, b: &Mat) -> Mat {
        Mat::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum())
    }

    #[test]
    fn products_agree_with_triple_loop() {
        let a = sample(5, 7, 0.1);
        let b = sample(7, 3, 0.9);
        let want = naive(&a, &b);
        assert!(a.matmul(&b).sub(&want).max_abs() < 1e-14);
        assert!(a.transpose().t_matmul(&b).sub(&want).max_abs() < 1e-14);
        assert!(a.matmul_t(&b.transpose()).sub(&want).max_abs() < 1e-14);
        let x: Vec<f64> = b.col(1);
        let y = a.matvec(&x);
        for i in 0..5 {
            assert!((y[i] - want[(i, 1)]).abs() < 1e-14);
        }
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(Mat::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Mat::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Mat::from_rows(&[&[1.0, 2.0], &[3.0]]).is_err());
    }

    #[test]
    fn dot_handles_remainders() {
        for n in 0..11 {
            let a: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let want: f64 = a.iter().map(|x| x * x).sum();
            assert_eq!(dot(&a, &a), want);
        }
    }

    #[test]
    fn column_helpers() {
        let a = sample(3, 5, 0.0);
        let s = a.select_cols(&[4, 0]);
        assert_eq!(s.col(0), a.col(4));
        assert_eq!(s.col(1), a.col(0));
        let r = a.col_range(1, 3);
        assert_eq!(r.col(1), a.col(2));
        assert_eq!(Mat::identity(3).frobenius_norm(), 3f64.sqrt());
        assert_eq!(Mat::from_diag(&[1.0, 2.0]).trace(), 3.0);
    }
}
