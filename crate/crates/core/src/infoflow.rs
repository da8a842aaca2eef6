//! Matrix-based Rényi α-entropy of sample sets and the layer-wise
//! information-plane tracker for regression networks.
//!
//! Entropies are in bits. A sample set becomes a trace-normalized Gaussian
//! Gram matrix; entropies are functionals of its eigenvalues.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::neural::{loss_value, Loss, Network, Target};
use crate::numkit::{sym_eigenvalues_owned, Mat, Rng};
use crate::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 1.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelWidth {
    /// Rule of thumb 1.06·σ̂·√d·n^(−1/5), σ̂ the RMS per-coordinate deviation.
    Auto,
    Fixed(f64),
}

/// A = K_ij / (n·√(K_ii K_jj)): symmetric, PSD, unit trace, diagonal 1/n.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    a: Mat,
    kernel_width: f64,
}

impl GramMatrix {
    /// Normalizes a raw kernel matrix.
    pub fn from_kernel(k: &Mat) -> Result<Self> {
        if !k.is_square() || k.rows() == 0 {
            return Err(Error::Shape { op: "GramMatrix::from_kernel", detail: format!("{:?}", k.shape()) });
        }
        let n = k.rows();
        let d: Vec<f64> = k.diag();
        if d.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("kernel diagonal must be positive".into()));
        }
        let inv: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
        let nf = n as f64;
        let mut a = Mat::from_fn(n, n, |i, j| k[(i, j)] * inv[i] * inv[j] / nf);
        for i in 0..n {
            a[(i, i)] = 1.0 / nf;
        }
        Ok(GramMatrix { a: a.symmetrize(), kernel_width: f64::NAN })
    }

    pub fn matrix(&self) -> &Mat {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Gaussian kernel width used, NaN when built from a raw kernel.
    pub fn kernel_width(&self) -> f64 {
        self.kernel_width
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        sym_eigenvalues_owned(self.a.clone())
    }
}

pub fn auto_width(samples: &Mat) -> f64 {
    let (n, d) = samples.shape();
    let mut var_sum = 0.0;
    for j in 0..d {
        let mean = (0..n).map(|i| samples[(i, j)]).sum::<f64>() / n as f64;
        var_sum += (0..n).map(|i| (samples[(i, j)] - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
    }
    let rms = (var_sum / d as f64).sqrt();
    1.06 * rms * (d as f64).sqrt() * (n as f64).powf(-0.2)
}

/// Gaussian Gram of `samples`, one sample per row.
pub fn gram(samples: &Mat, width: KernelWidth) -> Result<GramMatrix> {
    let n = samples.rows();
    if n < 2 {
        return Err(Error::Domain(format!("a Gram matrix needs n ≥ 2 samples, got {n}")));
    }
    let sigma = match width {
        KernelWidth::Fixed(s) => s,
        KernelWidth::Auto => auto_width(samples),
    };
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!(
            "kernel width must be positive, got {sigma} (constant samples need an explicit width)"
        )));
    }
    let sq: Vec<f64> = (0..n).map(|i| samples.row(i).iter().map(|v| v * v).sum()).collect();
    let inner = samples.matmul_t(samples);
    let c = 1.0 / (2.0 * sigma * sigma);
    let nf = n as f64;
    let mut a = Mat::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = 1.0 / nf;
        for j in 0..i {
            let d2 = (sq[i] + sq[j] - 2.0 * inner[(i, j)]).max(0.0);
            let v = (-d2 * c).exp() / nf;
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(GramMatrix { a, kernel_width: sigma })
}

/// Gram of a batch stored one sample per column, as network activations are.
pub fn gram_columns(batch: &Mat, width: KernelWidth) -> Result<GramMatrix> {
    gram(&batch.transpose(), width)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    if alpha == 1.0 {
        return Err(Error::Domain("alpha = 1 is excluded; use a value near 1 such as 1.01".into()));
    }
    Ok(())
}

/// (1/(1−α))·log2 Σ λ_i^α over the numerically nonzero eigenvalues.
///
/// Eigenvalues below n·ε·λ_max are round-off and count as 0; for α < 1 their
/// powers would otherwise add up to a visible bias.
pub fn entropy_of_spectrum(eigs: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let top = eigs.iter().cloned().fold(0.0, f64::max);
    let cut = eigs.len() as f64 * f64::EPSILON * top;
    let s: f64 = eigs.iter().map(|&l| if l > cut { l.powf(alpha) } else { 0.0 }).sum();
    Ok(s.log2() / (1.0 - alpha))
}

pub fn renyi_entropy(g: &GramMatrix, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    entropy_of_spectrum(&g.eigenvalues()?, alpha)
}

/// Entropy of A∘B / tr(A∘B).
pub fn joint_entropy(ga: &GramMatrix, gb: &GramMatrix, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    entropy_of_spectrum(&sym_eigenvalues_owned(joint_matrix(ga, gb)?)?, alpha)
}

fn joint_matrix(ga: &GramMatrix, gb: &GramMatrix) -> Result<Mat> {
    if ga.n() != gb.n() {
        return Err(Error::Shape { op: "joint_entropy", detail: format!("n = {} vs {}", ga.n(), gb.n()) });
    }
    let h = ga.a.hadamard(&gb.a);
    let t = h.trace();
    if !(t > 0.0) {
        return Err(Error::Numerical("Hadamard product has zero trace".into()));
    }
    Ok(h.scale(1.0 / t))
}

/// S(A) + S(B) − S(A,B), unclipped.
pub fn mutual_information(ga: &GramMatrix, gb: &GramMatrix, alpha: f64) -> Result<f64> {
    let (sa, sb) = (renyi_entropy(ga, alpha)?, renyi_entropy(gb, alpha)?);
    // add the two marginals in a fixed order so that swapping arguments is exact
    let (lo, hi) = if sa <= sb { (sa, sb) } else { (sb, sa) };
    Ok(lo + hi - joint_entropy(ga, gb, alpha)?)
}

/// S(Z | V) = S(Z, V) − S(V).
pub fn conditional_entropy(gz: &GramMatrix, gv: &GramMatrix, alpha: f64) -> Result<f64> {
    Ok(joint_entropy(gz, gv, alpha)? - renyi_entropy(gv, alpha)?)
}

/// Marginal entropies cached by index so that each Gram is diagonalized once.
struct EntropyCache {
    grams: Vec<GramMatrix>,
    marg: Vec<f64>,
    alpha: f64,
}

impl EntropyCache {
    fn new(grams: Vec<GramMatrix>, alpha: f64) -> Result<Self> {
        let marg = grams.iter().map(|g| renyi_entropy(g, alpha)).collect::<Result<Vec<_>>>()?;
        Ok(EntropyCache { grams, marg, alpha })
    }

    fn mi(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Ok(self.marg[i]);
        }
        let (lo, hi) =
            if self.marg[i] <= self.marg[j] { (self.marg[i], self.marg[j]) } else { (self.marg[j], self.marg[i]) };
        Ok(lo + hi - joint_entropy(&self.grams[i], &self.grams[j], self.alpha)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfoPlaneRecord {
    pub iteration: u64,
    /// Hidden layer, counted from 1 at the input side.
    pub layer: usize,
    pub i_tv: f64,
    pub i_tvp: f64,
    /// I(T; T') with T' the mirror layer counted from the output side.
    pub i_ttp: f64,
    pub mse: f64,
    pub kernel_width: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfoPlaneTrace {
    pub records: Vec<InfoPlaneRecord>,
    pub alpha: f64,
    pub seed: u64,
}

impl InfoPlaneTrace {
    pub fn at(&self, iteration: u64) -> Vec<&InfoPlaneRecord> {
        self.records.iter().filter(|r| r.iteration == iteration).collect()
    }

    pub fn iterations(&self) -> Vec<u64> {
        let mut it: Vec<u64> = self.records.iter().map(|r| r.iteration).collect();
        it.dedup();
        it
    }

    /// MSE per recorded iteration.
    pub fn mse_curve(&self) -> Vec<(u64, f64)> {
        let mut out: Vec<(u64, f64)> = Vec::new();
        for r in &self.records {
            if out.last().map(|l| l.0) != Some(r.iteration) {
                out.push((r.iteration, r.mse));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfoPlaneConfig {
    pub alpha: f64,
    pub kernel_width: KernelWidth,
    /// Iterations (gradient steps) at which planes are recorded, ascending.
    pub snapshots: Vec<u64>,
    pub eta: f64,
    pub batch: usize,
    pub seed: u64,
}

/// 0, 1, 2, 5, 10, 20, 50, … up to and including `last`.
pub fn log_schedule(last: u64) -> Vec<u64> {
    let mut out = Vec::new();
    out.push(0);
    let mut dec = 1u64;
    'outer: loop {
        for m in [1, 2, 5] {
            let v = m * dec;
            if v >= last {
                break 'outer;
            }
            out.push(v);
        }
        dec *= 10;
    }
    if last > 0 {
        out.push(last);
    }
    out
}

/// Index of the mirror of hidden layer `j` (1-based) among `hidden` layers.
pub fn mirror_layer(j: usize, hidden: usize) -> usize {
    hidden + 1 - j
}

/// Trains `net` by minibatch gradient descent on ½Σ‖ŷ − y‖² over the
/// training pairs and records every hidden layer's information-plane
/// coordinates on the probe set at each snapshot.
pub fn record_planes(
    net: &mut Network,
    train: (&Mat, &Mat),
    probe: (&Mat, &Mat),
    cfg: &InfoPlaneConfig,
) -> Result<InfoPlaneTrace> {
    check_alpha(cfg.alpha)?;
    let hidden = net.depth().saturating_sub(1);
    if hidden == 0 || hidden % 2 == 0 {
        return Err(Error::Domain(format!("need an odd number of hidden layers, got {hidden}")));
    }
    if cfg.snapshots.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("snapshots must be strictly ascending".into()));
    }
    let (x, y) = train;
    if cfg.batch == 0 || x.cols() == 0 {
        return Err(Error::Domain("empty training set or zero batch".into()));
    }
    let mut trace = InfoPlaneTrace { records: Vec::new(), alpha: cfg.alpha, seed: cfg.seed };
    let mut rng = Rng::derived(cfg.seed, "ip-batches", 0);
    let mut order: Vec<usize> = (0..x.cols()).collect();
    let mut pos = order.len();
    let mut step = 0u64;
    for &snap in &cfg.snapshots {
        while step < snap {
            if pos >= order.len() {
                rng.shuffle(&mut order);
                pos = 0;
            }
            let idx = &order[pos..(pos + cfg.batch).min(order.len())];
            pos += idx.len();
            let (xb, yb) = (x.select_cols(idx), y.select_cols(idx));
            let t = net.forward_batch(&xb)?;
            let g = net.backward(&t, Loss::Square, Target::Values(&yb))?;
            net.sgd_step(&g, cfg.eta);
            step += 1;
        }
        trace.records.extend(planes_at(net, probe, cfg, snap)?);
    }
    Ok(trace)
}

fn planes_at(
    net: &Network,
    probe: (&Mat, &Mat),
    cfg: &InfoPlaneConfig,
    iteration: u64,
) -> Result<Vec<InfoPlaneRecord>> {
    let (px, py) = probe;
    let t = net.forward_batch(px)?;
    let out = t.output();
    let mse = 2.0 * loss_value(out, Loss::Square, Target::Values(py))? / px.cols() as f64;
    if !mse.is_finite() {
        return Err(Error::Diverged { step: iteration });
    }
    let hidden = net.depth() - 1;
    // index 0 = V, 1..=hidden = T_j, hidden+1 = V'
    let mut grams = Vec::with_capacity(hidden + 2);
    for layer in &t.post {
        grams.push(gram_columns(layer, cfg.kernel_width)?);
    }
    let widths: Vec<f64> = grams.iter().map(|g| g.kernel_width()).collect();
    let cache = EntropyCache::new(grams, cfg.alpha)?;
    let mut recs = Vec::with_capacity(hidden);
    for j in 1..=hidden {
        recs.push(InfoPlaneRecord {
            iteration,
            layer: j,
            i_tv: cache.mi(j, 0)?,
            i_tvp: cache.mi(j, hidden + 1)?,
            i_ttp: cache.mi(j, mirror_layer(j, hidden))?,
            mse,
            kernel_width: widths[j],
        });
    }
    Ok(recs)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskGap {
    pub empirical: f64,
    pub population: f64,
    pub gap: f64,
}

/// Mean per-sample ‖ŷ − y‖² on the training pairs and on held-out pairs.
pub fn risk_gap(net: &Network, train: (&Mat, &Mat), test: (&Mat, &Mat)) -> Result<RiskGap> {
    let risk = |(x, y): (&Mat, &Mat)| -> Result<f64> {
        let p = net.predict(x)?;
        Ok(2.0 * loss_value(&p, Loss::Square, Target::Values(y))? / x.cols() as f64)
    };
    let empirical = risk(train)?;
    let population = risk(test)?;
    Ok(RiskGap { empirical, population, gap: population - empirical })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn eye_gram(n: usize) -> GramMatrix {
        GramMatrix::from_kernel(&Mat::identity(n)).unwrap()
    }

    #[test]
    fn uniform_spectrum_has_log_n_bits() {
        for n in [2, 7, 64] {
            let s = renyi_entropy(&eye_gram(n), 1.01).unwrap();
            assert!((s - (n as f64).log2()).abs() < 1e-9);
            let j = joint_entropy(&eye_gram(n), &eye_gram(n), 1.01).unwrap();
            assert!((j - (n as f64).log2()).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_samples_have_zero_entropy() {
        let x = Mat::from_fn(10, 3, |_, j| j as f64);
        let g = gram(&x, KernelWidth::Fixed(1.0)).unwrap();
        assert!(g.matrix().as_slice().iter().all(|&v| (v - 0.1).abs() < 1e-16));
        assert!(renyi_entropy(&g, 1.01).unwrap().abs() < 1e-9);
        assert!(gram(&x, KernelWidth::Auto).is_err());
    }

    #[test]
    fn two_by_two_hand_value() {
        // eigenvalues 0.75 and 0.25
        let k = Mat::from_rows(&[&[1.0, 0.5], &[0.5, 1.0]]).unwrap();
        let g = GramMatrix::from_kernel(&k).unwrap();
        let s = renyi_entropy(&g, 2.0).unwrap();
        assert!((s - 1.6f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn narrow_kernel_tends_to_identity() {
        let x = Mat::from_fn(5, 2, |i, j| (i * 3 + j) as f64);
        let g = gram(&x, KernelWidth::Fixed(1e-3)).unwrap();
        assert!(g.matrix().sub(&Mat::identity(5).scale(0.2)).max_abs() < 1e-15);
        assert!(gram(&x, KernelWidth::Fixed(0.0)).is_err());
    }

    #[test]
    fn alpha_one_is_rejected() {
        let e = renyi_entropy(&eye_gram(3), 1.0).unwrap_err();
        assert!(format!("{e}").contains("1.01"));
        assert!(renyi_entropy(&eye_gram(3), -0.5).is_err());
    }

    #[test]
    fn constant_condition_leaves_marginal() {
        let mut rng = Rng::new(1);
        let mut x = Mat::zeros(20, 3);
        rng.fill_normal(x.as_mut_slice());
        let gz = gram(&x, KernelWidth::Auto).unwrap();
        let gc = GramMatrix::from_kernel(&Mat::from_fn(20, 20, |_, _| 1.0)).unwrap();
        let s = renyi_entropy(&gz, 1.01).unwrap();
        assert!((joint_entropy(&gz, &gc, 1.01).unwrap() - s).abs() < 1e-9);
        assert!((conditional_entropy(&gz, &gc, 1.01).unwrap() - s).abs() < 1e-9);
    }

    #[test]
    fn schedule_shape() {
        assert_eq!(log_schedule(200), vec![0, 1, 2, 5, 10, 20, 50, 100, 200]);
        assert_eq!(log_schedule(7), vec![0, 1, 2, 5, 7]);
        assert_eq!(mirror_layer(1, 7), 7);
        assert_eq!(mirror_layer(4, 7), 4);
    }
}
