//! Gram matrices of prediction gradients for scalar-output networks, their
//! infinite-width limit, and weight-drift telemetry for autoencoder links.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::endtoend::{AeSystem, ChannelKind, TrainConfig, TrainTrace};
use crate::neural::{Activation, ActivationKind, Network};
use crate::numkit::quad::{gauss_hermite_2d, gauss_polar_2d};
use crate::numkit::{sym_eigenvalues, Mat, Rng};
use crate::{Error, Result};

/// Per-layer Grams G^(h)_ij = ⟨∂ŝ_i/∂W^(h), ∂ŝ_j/∂W^(h)⟩ and their sum.
#[derive(Clone, Debug)]
pub struct EmpiricalGram {
    pub per_layer: Vec<Mat>,
    pub total: Mat,
}

/// Gradient Grams of a scalar-output network at `inputs` (one per column).
///
/// The gradient of ŝ_i with respect to W^(h) is δ_i·x_iᵀ, so
/// G^(h)_ij = (δ_i·δ_j)(x_i·x_j) with x the layer input.
pub fn empirical_gram(net: &Network, inputs: &Mat) -> Result<EmpiricalGram> {
    if net.output_width() != 1 {
        return Err(Error::Domain(format!("needs a scalar output, network has {}", net.output_width())));
    }
    let n = inputs.cols();
    let trace = net.forward_batch(inputs)?;
    let deltas = net.deltas(&trace, &Mat::from_fn(1, n, |_, _| 1.0))?;
    let mut per_layer = Vec::with_capacity(net.depth());
    let mut total = Mat::zeros(n, n);
    for (h, d) in deltas.iter().enumerate() {
        let g = d.t_matmul(d).hadamard(&trace.post[h].t_matmul(&trace.post[h])).symmetrize();
        total = total.add(&g);
        per_layer.push(g);
    }
    Ok(EmpiricalGram { per_layer, total })
}

/// Scales every column to unit norm.
pub fn unit_normalize(inputs: &Mat) -> Result<Mat> {
    let mut out = inputs.clone();
    for j in 0..inputs.cols() {
        let c = inputs.col(j);
        let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return Err(Error::Domain(format!("input {j} has zero norm")));
        }
        out.set_col(j, &c.iter().map(|v| v / n).collect::<Vec<_>>());
    }
    Ok(out)
}

/// Closed-form ReLU expectations under N(0, [[kii, kij], [kij, kjj]]):
/// (E[relu(u)relu(v)], E[relu'(u)relu'(v)]).
pub fn arccos_kernels(kii: f64, kjj: f64, kij: f64) -> (f64, f64) {
    let s = (kii * kjj).sqrt();
    let rho = (kij / s).clamp(-1.0, 1.0);
    let theta = rho.acos();
    (s / (2.0 * PI) * (theta.sin() + (PI - theta) * rho), (PI - theta) / (2.0 * PI))
}

const POLAR: (usize, usize) = (24, 16);
const QUAD_TOL: f64 = 1e-8;

/// (E[σ(u)σ(v)], E[σ'(u)σ'(v)]) for one 2×2 covariance.
fn pair_moments(kind: ActivationKind, cov: &Mat) -> Result<(f64, f64)> {
    let act = Activation::new(kind);
    match kind {
        ActivationKind::Relu => {
            let a = gauss_polar_2d(cov, |u, v| u.max(0.0) * v.max(0.0), POLAR.0, POLAR.1)?;
            let b = gauss_polar_2d(cov, |u, v| if u > 0.0 && v > 0.0 { 1.0 } else { 0.0 }, POLAR.0, POLAR.1)?;
            Ok((a, b))
        }
        ActivationKind::Linear | ActivationKind::Softplus => {
            let f = |u: f64, v: f64| act.apply(u) * act.apply(v);
            let g = |u: f64, v: f64| act.derivative(u) * act.derivative(v);
            let mut out = [0.0; 2];
            for (k, slot) in out.iter_mut().enumerate() {
                let eval =
                    |order| if k == 0 { gauss_hermite_2d(cov, f, order) } else { gauss_hermite_2d(cov, g, order) };
                let lo = eval(32)?;
                let hi = eval(64)?;
                if (hi - lo).abs() > QUAD_TOL * hi.abs().max(1.0) {
                    return Err(Error::Numerical(format!("quadrature did not settle: {lo} vs {hi} at order 64")));
                }
                *slot = hi;
            }
            Ok((out[0], out[1]))
        }
        ActivationKind::Softmax => Err(Error::Domain("softmax has no elementwise limit kernel".into())),
    }
}

fn pairwise(k: &Mat, mut f: impl FnMut(&Mat) -> Result<f64>) -> Result<Mat> {
    let n = k.rows();
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let cov = Mat::from_rows(&[&[k[(i, i)], k[(i, j)]], &[k[(i, j)], k[(j, j)]]])?;
            let v = f(&cov)?;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// K^(0) = XᵀX and K^(h) = c_σ·E[σ(u)σ(v)] for h = 1..=upto.
pub fn limit_gram_layers(inputs: &Mat, upto: usize, kind: ActivationKind) -> Result<Vec<Mat>> {
    let c = Activation::new(kind).c_sigma();
    let mut ks = vec![inputs.t_matmul(inputs).symmetrize()];
    for _ in 0..upto {
        let prev = ks.last().unwrap();
        ks.push(pairwise(prev, |cov| Ok(c * pair_moments(kind, cov)?.0))?);
    }
    Ok(ks)
}

/// K^(H) = c_σ·K^(H−1)∘E[σ'(u)σ'(v)], the limit of the last hidden layer's
/// gradient Gram for an H-hidden-layer network with a linear head.
pub fn limit_gram(inputs: &Mat, depth: usize, kind: ActivationKind) -> Result<Mat> {
    if depth == 0 {
        return Err(Error::Domain("depth must be at least 1".into()));
    }
    let c = Activation::new(kind).c_sigma();
    let ks = limit_gram_layers(inputs, depth - 1, kind)?;
    let prev = ks.last().unwrap();
    let d = pairwise(prev, |cov| Ok(pair_moments(kind, cov)?.1))?;
    Ok(prev.hadamard(&d).scale(c))
}

/// Largest |eigenvalue| of a − b, the spectral norm of a symmetric difference.
pub fn spectral_distance(a: &Mat, b: &Mat) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape { op: "spectral_distance", detail: format!("{:?} vs {:?}", a.shape(), b.shape()) });
    }
    let e = sym_eigenvalues(&a.sub(b))?;
    Ok(e.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Network with `depth` hidden layers of width `width` and an unscaled scalar head.
pub fn scalar_network(d: usize, width: usize, depth: usize, kind: ActivationKind, rng: &mut Rng) -> Result<Network> {
    let mut widths = vec![d];
    widths.extend(core::iter::repeat(width).take(depth));
    widths.push(1);
    let mut acts = vec![kind; depth];
    acts.push(ActivationKind::Linear);
    Ok(Network::init(&widths, &acts, rng)?.with_unscaled_output())
}

#[derive(Clone, Debug, PartialEq)]
pub struct WidthPoint {
    pub width: usize,
    pub seed: u64,
    pub layer: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WidthSweep {
    pub points: Vec<WidthPoint>,
    pub widths: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// ‖G^(H)(0) − K^(H)‖₂ for fresh networks at each width, over `seeds` seeds.
/// Inputs are unit-normalized first.
pub fn width_sweep(
    inputs: &Mat,
    depth: usize,
    kind: ActivationKind,
    widths: &[usize],
    seeds: usize,
    base_seed: u64,
) -> Result<WidthSweep> {
    if widths.windows(2).any(|w| w[0] >= w[1]) || widths.is_empty() {
        return Err(Error::Domain(format!("widths {widths:?} must be strictly ascending")));
    }
    let x = unit_normalize(inputs)?;
    let k = limit_gram(&x, depth, kind)?;
    let mut points = Vec::new();
    let (mut mean, mut std) = (Vec::new(), Vec::new());
    for &m in widths {
        let mut ds = Vec::with_capacity(seeds);
        for s in 0..seeds {
            let mut rng = Rng::derived(base_seed, "ntk-init", ((m as u64) << 20) | s as u64);
            let net = scalar_network(x.rows(), m, depth, kind, &mut rng)?;
            let g = empirical_gram(&net, &x)?;
            let dist = spectral_distance(&g.per_layer[depth - 1], &k)?;
            points.push(WidthPoint { width: m, seed: s as u64, layer: depth, distance: dist });
            ds.push(dist);
        }
        let mu = ds.iter().sum::<f64>() / ds.len().max(1) as f64;
        let var = ds.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / (ds.len() as f64 - 1.0).max(1.0);
        mean.push(mu);
        std.push(var.sqrt());
    }
    Ok(WidthSweep { points, widths: widths.to_vec(), mean, std })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftRecord {
    pub iteration: u64,
    /// Encoder layers first, counted from 1.
    pub layer: usize,
    pub drift: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftTrace {
    pub records: Vec<DriftRecord>,
    pub channel: ChannelKind,
    pub seed: u64,
    pub transmitter_layers: usize,
}

impl DriftTrace {
    /// Root-sum-square drift of the encoder layers at the last recorded iteration.
    pub fn terminal_transmitter_drift(&self) -> f64 {
        let last = self.records.last().map(|r| r.iteration).unwrap_or(0);
        self.records
            .iter()
            .filter(|r| r.iteration == last && r.layer <= self.transmitter_layers)
            .map(|r| r.drift * r.drift)
            .sum::<f64>()
            .sqrt()
    }
}

/// (1/√m)·‖W(k) − W(0)‖_F per layer, m the layer's output width.
pub fn layer_drift(now: &Network, start: &Network) -> Vec<f64> {
    (0..now.depth())
        .map(|h| now.weight(h).sub(start.weight(h)).frobenius_norm() / (now.weight(h).rows() as f64).sqrt())
        .collect()
}

/// Trains `sys` and records the drift of every layer at each recorded epoch.
pub fn track_drift(sys: &mut AeSystem, cfg: &TrainConfig) -> (TrainTrace, DriftTrace) {
    let (enc0, dec0) = (sys.encoder().clone(), sys.decoder().clone());
    let mut drift = DriftTrace {
        records: Vec::new(),
        channel: sys.channel().kind(),
        seed: cfg.seed,
        transmitter_layers: enc0.depth(),
    };
    let trace = sys.train_with(cfg, |e, s| {
        let mut all = layer_drift(s.encoder(), &enc0);
        all.extend(layer_drift(s.decoder(), &dec0));
        for (h, d) in all.into_iter().enumerate() {
            drift.records.push(DriftRecord { iteration: e, layer: h + 1, drift: d });
        }
    });
    (trace, drift)
}

pub struct DriftRun {
    pub trace: TrainTrace,
    pub drift: DriftTrace,
    pub system: AeSystem,
}

/// The same initial system trained under fading and under AWGN with the
/// same seed, for contrast.
pub fn fading_drift(sys: &AeSystem, cfg: &TrainConfig) -> Result<(DriftRun, DriftRun)> {
    if sys.channel().kind() != ChannelKind::RayleighFlat {
        return Err(Error::Domain("fading_drift needs a Rayleigh system".into()));
    }
    let run = |kind| -> Result<DriftRun> {
        let mut s = sys.clone();
        *s.channel_mut() = crate::endtoend::ChannelLayer::new(kind, sys.channel().noise_var())?;
        let (trace, drift) = track_drift(&mut s, cfg);
        Ok(DriftRun { trace, drift, system: s })
    };
    Ok((run(ChannelKind::RayleighFlat)?, run(ChannelKind::Awgn)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ActivationKind::*;

    #[test]
    fn relu_identity_and_orthogonal_entries() {
        let x = Mat::identity(2);
        let k1 = &limit_gram_layers(&x, 1, Relu).unwrap()[1];
        assert!((k1[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((k1[(0, 1)] - 1.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn polar_quadrature_matches_arccos() {
        for rho in [-0.95, -0.3, 0.0, 0.4, 0.99] {
            let cov =
                Mat::from_rows(&[&[1.3, rho * (1.3f64 * 0.7).sqrt()], &[rho * (1.3f64 * 0.7).sqrt(), 0.7]]).unwrap();
            let (a, b) = pair_moments(Relu, &cov).unwrap();
            let (ea, eb) = arccos_kernels(1.3, 0.7, cov[(0, 1)]);
            assert!((a - ea).abs() < 1e-12 && (b - eb).abs() < 1e-12, "{rho}");
        }
    }

    #[test]
    fn linear_limit_is_input_gram() {
        let x = unit_normalize(&Mat::from_fn(3, 4, |i, j| (i as f64 + 1.0) * (j as f64 - 1.5))).unwrap();
        let k = limit_gram(&x, 2, Linear).unwrap();
        assert!(k.sub(&x.t_matmul(&x)).max_abs() < 1e-12);
    }

    #[test]
    fn softplus_quadrature_settles() {
        let x = unit_normalize(&Mat::from_fn(3, 3, |i, j| ((i * 3 + j) as f64).cos())).unwrap();
        let k = limit_gram(&x, 2, Softplus).unwrap();
        assert!(k.asymmetry().unwrap() == 0.0);
        assert!(sym_eigenvalues(&k).unwrap().iter().all(|&e| e > -1e-8));
    }

    #[test]
    fn spectral_distance_cases() {
        let a = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 3.0]]).unwrap();
        assert_eq!(spectral_distance(&a, &a).unwrap(), 0.0);
        let b = a.add(&Mat::identity(2).scale(-0.7));
        assert!((spectral_distance(&a, &b).unwrap() - 0.7).abs() < 1e-14);
        assert!(spectral_distance(&a, &Mat::identity(3)).is_err());
    }

    #[test]
    fn duplicated_inputs_give_duplicated_rows() {
        let mut rng = Rng::new(1);
        let net = scalar_network(3, 10, 2, Relu, &mut rng).unwrap();
        let x = Mat::from_rows(&[&[0.3, 0.3, -1.0], &[0.5, 0.5, 0.2], &[-0.1, -0.1, 0.9]]).unwrap();
        let g = empirical_gram(&net, &x).unwrap().total;
        assert_eq!(g.row(0)[0], g.row(1)[1]);
        assert_eq!(g.row(0)[2], g.row(1)[2]);
        let single = empirical_gram(&net, &x.col_range(0, 1)).unwrap().total;
        assert!(single[(0, 0)] >= 0.0);
    }

    #[test]
    fn drift_starts_at_zero() {
        use crate::endtoend::{noise_var_for_snr, ChannelLayer};
        let ch = ChannelLayer::new(ChannelKind::RayleighFlat, noise_var_for_snr(25.0, 4, 2)).unwrap();
        let sys = AeSystem::standard_layout(4, 2, ch, &mut Rng::new(2)).unwrap();
        let cfg = TrainConfig { epochs: 20, eta: 0.02, seed: 1, record_every: 10 };
        let (ray, awgn) = fading_drift(&sys, &cfg).unwrap();
        for run in [&ray, &awgn] {
            assert!(run.drift.records.iter().filter(|r| r.iteration == 0).all(|r| r.drift == 0.0));
        }
        assert_eq!(awgn.drift.channel, ChannelKind::Awgn);
        let frozen = TrainConfig { eta: 0.0, ..cfg };
        let (ray, _) = fading_drift(&sys, &frozen).unwrap();
        assert!(ray.drift.records.iter().all(|r| r.drift == 0.0));
    }
}
