use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::mat::{dot, Mat};
use crate::error::{shape, Result};
use crate::Error;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

pub const DEFAULT_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in descending order with matching eigenvector columns.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

fn check_symmetric(a: &Mat, tol: f64) -> Result<()> {
    let dev = a.asymmetry()?;
    if dev > tol * a.max_abs().max(1.0) {
        return Err(Error::NotSymmetric { max_dev: dev });
    }
    Ok(())
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps until the off-diagonal Frobenius mass drops below `tol·‖A‖_F`.
/// Cost is O(n³) per sweep with strided column access, so this is meant for
/// matrices up to a few hundred rows; [`sym_eigenvalues`] covers the large
/// eigenvalue-only case.
pub fn sym_eig(a: &Mat, tol: f64) -> Result<SymEig> {
    check_symmetric(a, tol)?;
    let n = a.rows();
    let mut m = a.symmetrize();
    let mut v = Mat::identity(n);
    let norm = m.frobenius_norm();
    let target = tol.max(f64::EPSILON) * norm;

    let mut converged = norm == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged || off_diagonal(&m) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal(&m) > target {
        return Err(Error::Numerical(format!("Jacobi did not converge in {} sweeps", MAX_SWEEPS)));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = v.select_cols(&order);
    Ok(SymEig { values, vectors })
}

fn off_diagonal(m: &Mat) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

fn rotate(m: &mut Mat, v: &mut Mat, p: usize, q: usize) {
    let apq = m[(p, q)];
    if apq == 0.0 {
        return;
    }
    let n = m.rows();
    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    for k in 0..n {
        let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Eigenvalues only, descending, via Householder tridiagonalization and the
/// implicit QL iteration.
///
/// Reads only the lower triangle; roughly 4n³/3 flops with contiguous row
/// access, which keeps n in the thousands practical.
pub fn sym_eigenvalues(a: &Mat) -> Result<Vec<f64>> {
    check_symmetric(a, 1e-10)?;
    sym_eigenvalues_owned(a.clone())
}

/// As [`sym_eigenvalues`] but consumes the matrix to avoid a copy. Symmetry
/// is assumed, not checked.
pub fn sym_eigenvalues_owned(a: Mat) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(shape("sym_eigenvalues", format!("{}x{} is not square", a.rows(), a.cols())));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (mut d, mut e) = tridiagonalize(a);
    tql(&mut d, &mut e)?;
    d.sort_by(|x, y| y.total_cmp(x));
    Ok(d)
}

/// Returns (diagonal, subdiagonal) where e[i] couples i and i+1 and e[n-1] = 0.
fn tridiagonalize(a: Mat) -> (Vec<f64>, Vec<f64>) {
    let n = a.rows();
    let mut a = a.into_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        d[k] = a[k * n + k];
        let m = n - k - 1;
        let off = k + 1;
        for i in 0..m {
            v[i] = a[(off + i) * n + k];
        }
        let sigma = dot(&v[1..m], &v[1..m]);
        let x0 = v[0];
        if sigma == 0.0 {
            e[k] = x0;
            continue;
        }
        let norm = (x0 * x0 + sigma).sqrt();
        let alpha = if x0 > 0.0 { -norm } else { norm };
        v[0] = x0 - alpha;
        let beta = 2.0 / (v[0] * v[0] + sigma);
        e[k] = alpha;

        // p = beta · S v on the lower triangle of the trailing block
        let (vs, ps) = (&v[..m], &mut p[..m]);
        ps.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..m {
            let row = &a[(off + i) * n + off..(off + i) * n + off + i + 1];
            let vi = vs[i];
            let mut acc = row[i] * vi;
            acc += dot(&row[..i], &vs[..i]);
            for (pj, rj) in ps[..i].iter_mut().zip(&row[..i]) {
                *pj += rj * vi;
            }
            ps[i] += acc;
        }
        for x in ps.iter_mut() {
            *x *= beta;
        }
        let kk = 0.5 * beta * dot(ps, vs);
        for (pj, vj) in ps.iter_mut().zip(vs) {
            *pj -= kk * vj;
        }
        // S -= v wᵀ + w vᵀ, lower triangle
        for i in 0..m {
            let (vi, wi) = (vs[i], ps[i]);
            let row = &mut a[(off + i) * n + off..(off + i) * n + off + i + 1];
            for j in 0..=i {
                row[j] -= vi * ps[j] + wi * vs[j];
            }
        }
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2) * n + n - 2];
        e[n - 2] = a[(n - 1) * n + n - 2];
    }
    d[n - 1] = a[(n - 1) * n + n - 1];
    e[n - 1] = 0.0;
    (d, e)
}

/// Implicit QL with Wilkinson-style shifts on a symmetric tridiagonal matrix.
fn tql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    // entries below ε‖T‖ are rounding noise; deflating them is backward stable
    let scale = d.iter().zip(e.iter()).fold(0.0f64, |m, (a, b)| m.max(a.abs() + b.abs()));
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = (d[m].abs() + d[m + 1].abs()).max(scale);
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Numerical(format!("QL iteration stalled at index {}", l)));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;

    fn random_sym(n: usize, seed: u64) -> Mat {
        let mut r = Rng::new(seed);
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x = r.normal();
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        a
    }

    #[test]
    fn identity_and_diagonal() {
        let e = sym_eig(&Mat::identity(3), DEFAULT_TOL).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let e = sym_eig(&Mat::from_diag(&[3.0, 1.0, 2.0]), DEFAULT_TOL).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        assert_eq!(e.vectors.col(0), vec![1.0, 0.0, 0.0]);
        assert_eq!(e.vectors.col(1), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn reconstruction_and_residuals() {
        for seed in 0..5 {
            let a = random_sym(8, seed);
            let e = sym_eig(&a, DEFAULT_TOL).unwrap();
            let lam = Mat::from_diag(&e.values);
            let rec = e.vectors.matmul(&lam).matmul_t(&e.vectors);
            assert!(rec.sub(&a).frobenius_norm() < 1e-9);
            let av = a.matmul(&e.vectors);
            for j in 0..8 {
                for i in 0..8 {
                    assert!((av[(i, j)] - e.values[j] * e.vectors[(i, j)]).abs() < 10.0 * DEFAULT_TOL);
                }
            }
            let gram = e.vectors.t_matmul(&e.vectors);
            assert!(gram.sub(&Mat::identity(8)).max_abs() < 1e-12);
            for w in e.values.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(sym_eig(&Mat::zeros(2, 3), DEFAULT_TOL), Err(Error::Shape { .. })));
        let a = Mat::from_rows(&[&[1.0, 2.0], &[2.1, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&a, DEFAULT_TOL), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn tridiagonal_path_matches_jacobi() {
        for (n, seed) in [(1, 0), (2, 1), (3, 2), (17, 3), (64, 4)] {
            let a = random_sym(n, seed);
            let want = sym_eig(&a, DEFAULT_TOL).unwrap().values;
            let got = sym_eigenvalues(&a).unwrap();
            for (x, y) in want.iter().zip(&got) {
                assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()), "n={n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn tridiagonal_path_handles_structure() {
        // already diagonal, rank one, and repeated eigenvalues
        let d = sym_eigenvalues(&Mat::from_diag(&[1.0, 5.0, 3.0, 3.0])).unwrap();
        assert_eq!(d, vec![5.0, 3.0, 3.0, 1.0]);
        let ones = Mat::from_fn(6, 6, |_, _| 1.0);
        let d = sym_eigenvalues(&ones).unwrap();
        assert!((d[0] - 6.0).abs() < 1e-12);
        assert!(d[1..].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn smooth_low_rank_matrix_converges() {
        // a very wide Gaussian kernel on a line: eigenvalues decay to rounding level
        let n = 300;
        let a = Mat::from_fn(n, n, |i, j| {
            let d = (i as f64 - j as f64) / n as f64;
            (-d * d / 8.0).exp() / n as f64
        });
        let d = sym_eigenvalues(&a).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.iter().all(|&x| x > -1e-14));
    }
}
