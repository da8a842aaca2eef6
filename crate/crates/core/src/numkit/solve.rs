use alloc::format;

use num_complex::Complex64;

use super::cmat::CMat;
use crate::error::{shape, Result};
use crate::Error;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

/// Conjugate-symmetry tolerance, relative to the largest entry.
pub const HERMITIAN_TOL: f64 = 1e-10;

fn check_hermitian(a: &CMat) -> Result<()> {
    let dev = a.hermitian_deviation()?;
    if dev > HERMITIAN_TOL * a.max_abs().max(1.0) {
        return Err(Error::NotSymmetric { max_dev: dev });
    }
    Ok(())
}

/// Lower-triangular L with A = L·Lᴴ for Hermitian positive-definite A.
pub fn herm_cholesky(a: &CMat) -> Result<CMat> {
    check_hermitian(a)?;
    let n = a.rows();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: diag });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// ln det A for Hermitian positive-definite A.
pub fn herm_logdet(a: &CMat) -> Result<f64> {
    let l = herm_cholesky(a)?;
    Ok((0..a.rows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Solves A·X = B for Hermitian positive-definite A by Cholesky.
pub fn herm_solve(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.rows() != b.rows() {
        return Err(shape("herm_solve", format!("A is {:?}, B is {:?}", a.shape(), b.shape())));
    }
    let l = herm_cholesky(a)?;
    let n = a.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        // forward: L y = b
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        // backward: Lᴴ x = y
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}
