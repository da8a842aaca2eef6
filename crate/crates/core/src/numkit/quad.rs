//! Gaussian quadrature rules and bivariate normal expectations.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::mat::Mat;
use crate::error::Result;
use crate::Error;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

const NEWTON_EPS: f64 = 1e-15;
const NEWTON_MAX: usize = 100;

/// Nodes and weights of a one-dimensional rule.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Hermite rule for the standard normal density: Σ w_i f(x_i) ≈ E f(X),
/// X ~ N(0,1). Exact for polynomials of degree ≤ 2·order−1; weights sum to 1.
pub fn gauss_hermite(order: usize) -> Rule {
    assert!(order >= 1, "order must be positive");
    // physicists' nodes via Newton on orthonormal Hermite recurrences
    let n = order;
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..(n + 1) / 2 {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..NEWTON_MAX {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j as f64 - 1.0) / j as f64).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // physicists' weight e^{-x²} → standard normal
    let nodes = x.iter().rev().map(|t| t * 2f64.sqrt()).collect();
    let weights = w.iter().rev().map(|t| t / PI.sqrt()).collect();
    Rule { nodes, weights }
}

/// Gauss–Legendre rule on [a, b].
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Rule {
    assert!(order >= 1, "order must be positive");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let (xm, xl) = (0.5 * (b + a), 0.5 * (b - a));
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..NEWTON_MAX {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 - 1.0) * z * p2 - (j as f64 - 1.0) * p3) / j as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS {
                break;
            }
        }
        nodes[i] = xm - xl * z;
        nodes[n - 1 - i] = xm + xl * z;
        weights[i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    Rule { nodes, weights }
}

/// Gauss–Laguerre rule for ∫₀^∞ e^{−s} f(s) ds.
pub fn gauss_laguerre(order: usize) -> Rule {
    assert!(order >= 1, "order must be positive");
    let n = order;
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..n {
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * nf),
            1 => z + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let ai = (i - 1) as f64;
                z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - x[i - 2])
            }
        };
        let (mut pp, mut p2) = (0.0, 0.0);
        for _ in 0..NEWTON_MAX {
            let mut p1 = 1.0;
            p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 - 1.0 - z) * p2 - (j as f64 - 1.0) * p3) / j as f64;
            }
            pp = (nf * p1 - nf * p2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        w[i] = -1.0 / (pp * nf * p2);
    }
    Rule { nodes: x, weights: w }
}

/// Symmetric square root S (S·S = cov) of a 2×2 PSD covariance.
fn sqrt_psd_2x2(cov: &Mat) -> Result<[[f64; 2]; 2]> {
    if cov.shape() != (2, 2) {
        return Err(Error::Domain(format!("covariance must be 2x2, got {:?}", cov.shape())));
    }
    let (a, b, b2, c) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 0)], cov[(1, 1)]);
    let scale = a.abs().max(c.abs()).max(b.abs()).max(1e-300);
    if (b - b2).abs() > 1e-12 * scale || !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err(Error::Domain(format!("covariance is not symmetric: {b} vs {b2}")));
    }
    let half_tr = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (l1, l2) = (half_tr + disc, half_tr - disc);
    if l2 < -1e-12 * scale {
        return Err(Error::Domain(format!("covariance is not PSD: eigenvalue {l2:e}")));
    }
    let (s1, s2) = (l1.max(0.0).sqrt(), l2.max(0.0).sqrt());
    // unit eigenvector for l1
    let (ux, uy) = if b.abs() > 1e-300 {
        let (vx, vy) = (l1 - c, b);
        let nrm = vx.hypot(vy);
        (vx / nrm, vy / nrm)
    } else if a >= c {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    // S = s1 u uᵀ + s2 u⊥ u⊥ᵀ with u⊥ = (−uy, ux)
    Ok([[s1 * ux * ux + s2 * uy * uy, (s1 - s2) * ux * uy], [(s1 - s2) * ux * uy, s1 * uy * uy + s2 * ux * ux]])
}

/// E f(u, v) for (u, v) ~ N(0, cov) by a tensor Gauss–Hermite rule.
///
/// Exact when f is a polynomial of degree ≤ 2·order−1. Smooth integrands
/// converge quickly; integrands with kinks do not (see [`gauss_polar_2d`]).
pub fn gauss_hermite_2d(cov: &Mat, f: impl Fn(f64, f64) -> f64, order: usize) -> Result<f64> {
    if order < 8 {
        return Err(Error::Domain(format!("quadrature order {order} is below the minimum of 8")));
    }
    let s = sqrt_psd_2x2(cov)?;
    let rule = gauss_hermite(order);
    let mut total = 0.0;
    for (&x, &wx) in rule.nodes.iter().zip(&rule.weights) {
        let mut row = 0.0;
        for (&y, &wy) in rule.nodes.iter().zip(&rule.weights) {
            row += wy * f(s[0][0] * x + s[0][1] * y, s[1][0] * x + s[1][1] * y);
        }
        total += wx * row;
    }
    Ok(total)
}

/// E f(u, v) for (u, v) ~ N(0, cov) in polar coordinates of the whitened
/// variable, with the angle split wherever u or v changes sign.
///
/// Meant for integrands that are smooth away from the axes u = 0 and v = 0,
/// such as products of ReLU and its derivative. Each angular piece uses
/// Gauss–Legendre; the radial part uses Gauss–Laguerre in s = r²/2, so any f
/// that is positively homogeneous of even degree ≤ 2·radial_order−2 in r is
/// integrated exactly in the radius.
pub fn gauss_polar_2d(
    cov: &Mat,
    f: impl Fn(f64, f64) -> f64,
    angular_order: usize,
    radial_order: usize,
) -> Result<f64> {
    let s = sqrt_psd_2x2(cov)?;
    let mut cuts: Vec<f64> = vec![0.0, 2.0 * PI];
    for row in &s {
        if row[0] != 0.0 || row[1] != 0.0 {
            // row·(cos φ, sin φ) = 0
            let mut phi = (-row[0]).atan2(row[1]);
            if phi < 0.0 {
                phi += PI;
            }
            cuts.push(phi);
            cuts.push(phi + PI);
        }
    }
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let radial = gauss_laguerre(radial_order);
    let radii: Vec<f64> = radial.nodes.iter().map(|t| (2.0 * t).sqrt()).collect();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] - w[0] <= 0.0 {
            continue;
        }
        let ang = gauss_legendre(angular_order, w[0], w[1]);
        for (&phi, &wphi) in ang.nodes.iter().zip(&ang.weights) {
            let (sn, cs) = phi.sin_cos();
            let du = s[0][0] * cs + s[0][1] * sn;
            let dv = s[1][0] * cs + s[1][1] * sn;
            let mut inner = 0.0;
            for (&r, &wr) in radii.iter().zip(&radial.weights) {
                inner += wr * f(r * du, r * dv);
            }
            total += wphi * inner;
        }
    }
    Ok(total / (2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cov(a: f64, b: f64, c: f64) -> Mat {
        Mat::from_rows(&[&[a, b], &[b, c]]).unwrap()
    }

    #[test]
    fn hermite_moments() {
        for order in [8, 20, 32, 64] {
            let r = gauss_hermite(order);
            let m = |k: i32| r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(k)).sum::<f64>();
            assert!((m(0) - 1.0).abs() < 1e-13, "order {order}");
            assert!(m(1).abs() < 1e-13);
            assert!((m(2) - 1.0).abs() < 1e-12);
            assert!((m(4) - 3.0).abs() < 1e-11);
            assert!((m(6) - 15.0).abs() < 1e-10);
        }
    }

    #[test]
    fn legendre_and_laguerre_integrate_polynomials() {
        let r = gauss_legendre(5, 0.0, 2.0);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(9)).sum();
        assert!((s - 2f64.powi(10) / 10.0).abs() < 1e-11);
        let r = gauss_laguerre(6);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(5)).sum();
        assert!((s - 120.0).abs() < 1e-9, "{s}");
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn trivial_bivariate_cases() {
        let uv = |u: f64, v: f64| u * v;
        assert!(gauss_hermite_2d(&Mat::identity(2), uv, 16).unwrap().abs() < 1e-14);
        assert!((gauss_hermite_2d(&cov(1.0, 1.0, 1.0), uv, 16).unwrap() - 1.0).abs() < 1e-13);
        // E[u²v²] = ac + 2b²
        let got = gauss_hermite_2d(&cov(2.0, 0.5, 1.5), |u, v| u * u * v * v, 8).unwrap();
        assert!((got - (3.0 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_covariances() {
        assert!(gauss_hermite_2d(&cov(1.0, 2.0, 1.0), |u, _| u, 16).is_err());
        assert!(gauss_hermite_2d(&Mat::identity(3), |u, _| u, 16).is_err());
        assert!(gauss_hermite_2d(&Mat::identity(2), |u, _| u, 4).is_err());
    }

    #[test]
    fn polar_rule_handles_smooth_and_kinked_integrands() {
        let c = cov(1.3, -0.4, 0.8);
        let poly = gauss_polar_2d(&c, |u, v| u * u * v * v, 24, 8).unwrap();
        assert!((poly - (1.3 * 0.8 + 2.0 * 0.16)).abs() < 1e-12);
        // P(u > 0, v > 0) for correlation rho is 1/4 + asin(rho)/(2π)
        let rho: f64 = -0.4 / (1.3f64 * 0.8).sqrt();
        let quadrant = gauss_polar_2d(&c, |u, v| if u > 0.0 && v > 0.0 { 1.0 } else { 0.0 }, 16, 4).unwrap();
        assert!((quadrant - (0.25 + rho.asin() / (2.0 * PI))).abs() < 1e-14);
    }
}
