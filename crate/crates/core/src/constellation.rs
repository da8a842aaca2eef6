//! Minimum-error-probability signal constellations by constrained gradient
//! search under an average-power budget.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::numkit::{Mat, Rng};
use crate::{Error, Result};

/// M points in d dimensions (row m is z_m) with an average-power budget.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    points: Mat,
    p_av: f64,
}

impl Constellation {
    /// Validates M ≥ 2, d ≥ 1, finite entries and (1/M)Σ‖z_m‖² ≤ p_av(1+1e-9).
    pub fn new(points: Mat, p_av: f64) -> Result<Self> {
        let (m, d) = points.shape();
        if m < 2 || d < 1 {
            return Err(Error::Domain(format!("need M >= 2 and d >= 1, got {m}x{d}")));
        }
        if !points.is_finite() {
            return Err(Error::Domain("constellation has non-finite coordinates".into()));
        }
        if !(p_av > 0.0) {
            return Err(Error::Domain(format!("power budget must be positive, got {p_av}")));
        }
        let c = Constellation { points, p_av };
        let power = c.average_power();
        if power > p_av * (1.0 + 1e-9) {
            return Err(Error::Domain(format!("average power {power} exceeds budget {p_av}")));
        }
        Ok(c)
    }

    /// Rescales arbitrary points so the average power equals `p_av`.
    pub fn normalized(points: Mat, p_av: f64) -> Result<Self> {
        let m = points.rows() as f64;
        let energy: f64 = points.as_slice().iter().map(|x| x * x).sum();
        if !(energy > 0.0) {
            return Err(Error::Domain("cannot normalize an all-zero constellation".into()));
        }
        let s = (m * p_av / energy).sqrt();
        Constellation::new(points.scale(s), p_av)
    }

    pub fn points(&self) -> &Mat {
        &self.points
    }

    pub fn into_points(self) -> Mat {
        self.points
    }

    pub fn m(&self) -> usize {
        self.points.rows()
    }

    pub fn d(&self) -> usize {
        self.points.cols()
    }

    pub fn p_av(&self) -> f64 {
        self.p_av
    }

    pub fn average_power(&self) -> f64 {
        self.points.as_slice().iter().map(|x| x * x).sum::<f64>() / self.m() as f64
    }

    pub fn mean_norm(&self) -> f64 {
        (0..self.m()).map(|i| crate::numkit::norm2(self.points.row(i))).sum::<f64>() / self.m() as f64
    }

    pub fn min_distance(&self) -> f64 {
        self.closest_pair().2
    }

    /// (i, j, distance) of the closest pair, lowest indices first on ties.
    pub fn closest_pair(&self) -> (usize, usize, f64) {
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..self.m() {
            for j in (i + 1)..self.m() {
                let d = dist2(self.points.row(i), self.points.row(j)).sqrt();
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        best
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// High-SNR error-probability proxy and whether it was forced by coincident points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticPe {
    pub value: f64,
    pub degenerate: bool,
}

/// exp(−d_min²/(8·n0)); 1 with the degeneracy flag set when two points coincide.
pub fn asymptotic_pe(c: &Constellation, n0: f64) -> Result<AsymptoticPe> {
    check_n0(n0)?;
    let dmin = c.min_distance();
    if dmin == 0.0 {
        return Ok(AsymptoticPe { value: 1.0, degenerate: true });
    }
    Ok(AsymptoticPe { value: (-dmin * dmin / (8.0 * n0)).exp(), degenerate: false })
}

fn check_n0(n0: f64) -> Result<()> {
    if !(n0 > 0.0 && n0.is_finite()) {
        return Err(Error::Domain(format!("noise level n0 must be positive, got {n0}")));
    }
    Ok(())
}

/// Row m: −Σ_{i≠m} exp(−‖z_m−z_i‖²/(8n0))·(1/‖z_m−z_i‖² + 1/(4n0))·unit(z_m−z_i).
///
/// This is the exact gradient of Σ_{i<j} exp(−d_ij²/(8n0))/d_ij, a smooth
/// union-bound style surrogate of the error probability whose terms are
/// dominated by the closest pairs.
pub fn pe_gradient(c: &Constellation, n0: f64) -> Result<Mat> {
    check_n0(n0)?;
    let (m, d) = c.points.shape();
    let mut g = Mat::zeros(m, d);
    for a in 0..m {
        for b in (a + 1)..m {
            let za = c.points.row(a);
            let zb = c.points.row(b);
            let r2 = dist2(za, zb);
            if r2 == 0.0 {
                return Err(Error::DegenerateGeometry { i: a, j: b });
            }
            let r = r2.sqrt();
            let coef = (-r2 / (8.0 * n0)).exp() * (1.0 / r2 + 1.0 / (4.0 * n0)) / r;
            for k in 0..d {
                let delta = coef * (za[k] - zb[k]);
                g[(a, k)] -= delta;
                g[(b, k)] += delta;
            }
        }
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GsConfig {
    /// Noise level in the exponent of the error-probability proxy.
    pub n0: f64,
    pub step: f64,
    pub max_steps: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Power budget; `None` means 1/M.
    pub p_av: Option<f64>,
}

impl Default for GsConfig {
    fn default() -> Self {
        GsConfig { n0: 0.005, step: 2e-4, max_steps: 1000, restarts: 1, seed: 0, p_av: None }
    }
}

impl GsConfig {
    fn validate(&self) -> Result<()> {
        check_n0(self.n0)?;
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Domain(format!("step must be positive, got {}", self.step)));
        }
        if self.max_steps < 1 || self.restarts < 1 {
            return Err(Error::Domain("max_steps and restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Largest move of a single point per step, in units of the RMS radius √p_av.
/// The gradient grows like 1/d² for nearly coincident draws; without a cap
/// one step can fling a point arbitrarily far.
pub const MAX_MOVE: f64 = 0.25;

/// One projected step: Z − η∇ with each point's move capped at
/// `MAX_MOVE`·√p_av, then rescaled so the average power equals the budget.
pub fn gs_step(c: &Constellation, cfg: &GsConfig) -> Result<Constellation> {
    cfg.validate()?;
    let mut g = pe_gradient(c, cfg.n0)?;
    let cap = MAX_MOVE * c.p_av.sqrt();
    for i in 0..g.rows() {
        let row = g.row_mut(i);
        let mv = cfg.step * crate::numkit::norm2(row);
        if mv > cap {
            row.iter_mut().for_each(|x| *x *= cap / mv);
        }
    }
    let mut z = c.points.clone();
    z.axpy_in_place(-cfg.step, &g);
    Constellation::normalized(z, c.p_av)
}

#[derive(Clone, Debug)]
pub struct GsResult {
    pub best: Constellation,
    /// Minimum distance after each step of the winning restart, starting with
    /// the normalized initial draw.
    pub trace: Vec<f64>,
    pub best_restart: usize,
    /// Final minimum distance of every restart.
    pub restart_min_distances: Vec<f64>,
}

/// Draws M points uniformly from the unit d-ball.
pub fn random_ball_points(m: usize, d: usize, rng: &mut Rng) -> Mat {
    let mut z = Mat::zeros(m, d);
    for i in 0..m {
        let row = z.row_mut(i);
        loop {
            rng.fill_normal(row);
            let n = crate::numkit::norm2(row);
            if n > 0.0 {
                let r = rng.uniform().powf(1.0 / d as f64);
                row.iter_mut().for_each(|x| *x *= r / n);
                break;
            }
        }
    }
    z
}

/// Best of `cfg.restarts` gradient searches, restart r seeded with seed + r.
///
/// The winner has the largest minimum distance; ties go to the lower
/// asymptotic error probability, then to the lower restart index.
pub fn optimize(m: usize, d: usize, cfg: &GsConfig) -> Result<GsResult> {
    cfg.validate()?;
    if m < 2 || d < 1 {
        return Err(Error::Domain(format!("need M >= 2 and d >= 1, got M={m}, d={d}")));
    }
    let p_av = cfg.p_av.unwrap_or(1.0 / m as f64);
    let mut best: Option<(Constellation, Vec<f64>, usize, f64)> = None;
    let mut finals = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let mut rng = Rng::new(cfg.seed.wrapping_add(r as u64));
        let mut c = Constellation::normalized(random_ball_points(m, d, &mut rng), p_av)?;
        let mut trace = Vec::with_capacity(cfg.max_steps + 1);
        trace.push(c.min_distance());
        for _ in 0..cfg.max_steps {
            c = gs_step(&c, cfg)?;
            trace.push(c.min_distance());
        }
        let dmin = c.min_distance();
        let pe = asymptotic_pe(&c, cfg.n0)?.value;
        finals.push(dmin);
        let wins = match &best {
            None => true,
            Some((_, _, _, best_pe)) => {
                let best_d = best.as_ref().map(|b| b.0.min_distance()).unwrap_or(0.0);
                dmin > best_d || (dmin == best_d && pe < *best_pe)
            }
        };
        if wins {
            best = Some((c, trace, r, pe));
        }
    }
    let (best, trace, best_restart, _) = best.expect("at least one restart");
    Ok(GsResult { best, trace, best_restart, restart_min_distances: finals })
}

/// Share of angular gaps between neighbouring points that lie within `tol_deg`
/// of 60°, a measure of how close a planar constellation is to a triangular
/// lattice.
///
/// Neighbours of a point are the others within `reach`·d_min. Gaps are taken
/// between consecutive neighbour directions around each point, including the
/// wrap-around gap, so boundary points contribute their open side as a miss.
pub fn triangular_lattice_fraction(c: &Constellation, reach: f64, tol_deg: f64) -> Result<f64> {
    if c.d() != 2 {
        return Err(Error::Domain(format!("lattice test needs d = 2, got {}", c.d())));
    }
    let dmin = c.min_distance();
    if dmin == 0.0 {
        return Err(Error::DegenerateGeometry { i: c.closest_pair().0, j: c.closest_pair().1 });
    }
    let pts = c.points();
    let (mut hits, mut total) = (0usize, 0usize);
    for i in 0..c.m() {
        let mut angles: Vec<f64> = (0..c.m())
            .filter(|&j| j != i && dist2(pts.row(i), pts.row(j)).sqrt() <= reach * dmin)
            .map(|j| (pts[(j, 1)] - pts[(i, 1)]).atan2(pts[(j, 0)] - pts[(i, 0)]).to_degrees())
            .collect();
        if angles.len() < 2 {
            continue;
        }
        angles.sort_by(|a, b| a.total_cmp(b));
        for k in 0..angles.len() {
            let next = if k + 1 < angles.len() { angles[k + 1] } else { angles[0] + 360.0 };
            total += 1;
            if ((next - angles[k]) - 60.0).abs() <= tol_deg {
                hits += 1;
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn from_rows(rows: &[&[f64]], p_av: f64) -> Constellation {
        Constellation::new(Mat::from_rows(rows).unwrap(), p_av).unwrap()
    }

    #[test]
    fn antipodal_pe_by_substitution() {
        let h = 0.5f64.sqrt();
        let c = from_rows(&[&[h], &[-h]], 0.5);
        let pe = asymptotic_pe(&c, 0.25).unwrap();
        assert!((pe.value - (-1.0f64).exp()).abs() < 1e-15);
        assert!(!pe.degenerate);
    }

    #[test]
    fn duplicate_point_is_flagged() {
        let c = from_rows(&[&[0.1, 0.0], &[0.1, 0.0], &[-0.1, 0.0]], 1.0);
        let pe = asymptotic_pe(&c, 0.1).unwrap();
        assert_eq!(pe.value, 1.0);
        assert!(pe.degenerate);
        assert_eq!(pe_gradient(&c, 0.1), Err(Error::DegenerateGeometry { i: 0, j: 1 }));
    }

    #[test]
    fn validation() {
        assert!(Constellation::new(Mat::zeros(1, 2), 1.0).is_err());
        assert!(Constellation::new(Mat::from_rows(&[&[2.0], &[0.0]]).unwrap(), 1.0).is_err());
        let c = from_rows(&[&[1.0], &[-1.0]], 1.0);
        assert!(asymptotic_pe(&c, 0.0).is_err());
    }

    #[test]
    fn antipodal_gradients_cancel() {
        let c = from_rows(&[&[0.3, 0.4], &[-0.3, -0.4]], 0.25);
        let g = pe_gradient(&c, 0.05).unwrap();
        for k in 0..2 {
            assert_eq!(g[(0, k)], -g[(1, k)]);
        }
    }

    #[test]
    fn triangle_gradients_are_radial_and_equal() {
        let r = 0.3;
        let pts: Vec<[f64; 2]> = (0..3)
            .map(|k| {
                let t = core::f64::consts::TAU * k as f64 / 3.0 + 0.2;
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        let c = from_rows(&[&pts[0], &pts[1], &pts[2]], 1.0);
        let g = pe_gradient(&c, 0.02).unwrap();
        let mags: Vec<f64> = (0..3).map(|i| crate::numkit::norm2(g.row(i))).collect();
        for i in 0..3 {
            assert!((mags[i] - mags[0]).abs() < 1e-12 * mags[0]);
            // parallel to the position vector (centroid at origin); the
            // descent step −η·g then pushes each point away from the centroid
            let cross = g[(i, 0)] * pts[i][1] - g[(i, 1)] * pts[i][0];
            assert!(cross.abs() < 1e-12 * mags[0]);
            let along = g[(i, 0)] * pts[i][0] + g[(i, 1)] * pts[i][1];
            assert!(along < 0.0);
        }
    }

    #[test]
    fn step_preserves_power_and_fixed_points() {
        let mut rng = Rng::new(5);
        let c = Constellation::normalized(random_ball_points(6, 3, &mut rng), 1.0 / 6.0).unwrap();
        let cfg = GsConfig::default();
        let next = gs_step(&c, &cfg).unwrap();
        assert!((next.average_power() - 1.0 / 6.0).abs() < 1e-12);
        // the regular simplex of the plane is a symmetric fixed point
        let sq = from_rows(&[&[0.5, 0.0], &[0.0, 0.5], &[-0.5, 0.0], &[0.0, -0.5]], 0.25);
        let out = gs_step(&sq, &cfg).unwrap();
        assert!(out.points().sub(sq.points()).max_abs() < 1e-14);
    }

    #[test]
    fn rotation_invariance() {
        let mut rng = Rng::new(9);
        let c = Constellation::normalized(random_ball_points(8, 2, &mut rng), 0.125).unwrap();
        let t: f64 = 0.7;
        let rot = Mat::from_rows(&[&[t.cos(), -t.sin()], &[t.sin(), t.cos()]]).unwrap();
        let rc = Constellation::new(c.points().matmul_t(&rot), 0.125).unwrap();
        assert!((rc.min_distance() - c.min_distance()).abs() < 1e-12);
        let (a, b) = (asymptotic_pe(&c, 0.01).unwrap().value, asymptotic_pe(&rc, 0.01).unwrap().value);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn two_points_on_a_line_become_antipodal() {
        let cfg = GsConfig { max_steps: 1000, step: 0.05, n0: 0.25, ..GsConfig::default() };
        let res = optimize(2, 1, &cfg).unwrap();
        let h = 0.5f64.sqrt();
        let mut xs = vec![res.best.points()[(0, 0)], res.best.points()[(1, 0)]];
        xs.sort_by(|a, b| a.total_cmp(b));
        assert!((xs[0] + h).abs() < 1e-3 && (xs[1] - h).abs() < 1e-3, "{xs:?}");
        assert_eq!(res.trace.len(), 1001);
    }

    #[test]
    fn ball_sampler_stays_inside() {
        let mut rng = Rng::new(2);
        let z = random_ball_points(500, 3, &mut rng);
        let mut mean_r = 0.0;
        for i in 0..500 {
            let r = crate::numkit::norm2(z.row(i));
            assert!(r <= 1.0);
            mean_r += r / 500.0;
        }
        // E r = d/(d+1) for the uniform ball
        assert!((mean_r - 0.75).abs() < 0.03, "{mean_r}");
    }

    #[test]
    fn hexagon_with_centre_is_fully_triangular() {
        let mut rows: Vec<[f64; 2]> = vec![[0.0, 0.0]];
        for k in 0..6 {
            let t = core::f64::consts::TAU * k as f64 / 6.0;
            rows.push([0.1 * t.cos(), 0.1 * t.sin()]);
        }
        let refs: Vec<&[f64]> = rows.iter().map(|r| &r[..]).collect();
        let c = from_rows(&refs, 1.0);
        // centre: six 60° gaps; each rim point: 60°, 60° and the open 240°
        let f = triangular_lattice_fraction(&c, 1.2, 10.0).unwrap();
        assert!((f - 18.0 / 24.0).abs() < 1e-12, "{f}");
    }
}
