//! Autoencoder link: encoder, power normalization, a stochastic channel layer
//! and a softmax decoder, trained end to end by backpropagating through the
//! realized channel.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::constellation::Constellation;
use crate::neural::{loss_value, ActivationKind, Loss, Network, Target};
use crate::numkit::{Mat, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Awgn,
    /// Real diagonal gains drawn i.i.d. N(0,1) for every transmitted symbol.
    RayleighFlat,
}

impl ChannelKind {
    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::RayleighFlat => "rayleigh",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "awgn" => Ok(ChannelKind::Awgn),
            "rayleigh" | "rayleigh_flat" => Ok(ChannelKind::RayleighFlat),
            _ => Err(Error::Domain(format!("unknown channel '{s}' (awgn, rayleigh)"))),
        }
    }
}

/// Noise variance per real dimension for a target SNR, with the convention
/// SNR = E‖z‖²/E‖n‖² = (1/M)/(d·σ²).
pub fn noise_var_for_snr(snr_db: f64, m: usize, d: usize) -> f64 {
    (1.0 / m as f64) / (d as f64 * 10f64.powf(snr_db / 10.0))
}

pub fn snr_db_for_noise_var(noise_var: f64, m: usize, d: usize) -> f64 {
    10.0 * ((1.0 / m as f64) / (d as f64 * noise_var)).log10()
}

/// One pass of a batch (one symbol per column) through the channel.
#[derive(Clone, Debug)]
pub struct Realization {
    pub v: Mat,
    /// Diagonal channel gains per symbol, same shape as the batch.
    pub gains: Mat,
    pub noise: Mat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelLayer {
    kind: ChannelKind,
    noise_var: f64,
    pinned: Option<Vec<f64>>,
    last_equivalent: Option<Mat>,
}

impl ChannelLayer {
    pub fn new(kind: ChannelKind, noise_var: f64) -> Result<Self> {
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::Domain(format!("noise variance must be finite and non-negative, got {noise_var}")));
        }
        Ok(ChannelLayer { kind, noise_var, pinned: None, last_equivalent: None })
    }

    /// Fixes the fading diagonal instead of sampling it. Test hook.
    pub fn pin_gains(&mut self, diag: Vec<f64>) {
        self.pinned = Some(diag);
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn set_noise_var(&mut self, noise_var: f64) {
        self.noise_var = noise_var;
    }

    /// Equivalent weights [H, n] of the most recent single-vector pass, so
    /// that v = [H, n]·(z, 1).
    pub fn last_equivalent(&self) -> Option<&Mat> {
        self.last_equivalent.as_ref()
    }

    fn gain(&self, i: usize, rng: &mut Rng) -> f64 {
        match (&self.pinned, self.kind) {
            (Some(g), _) => g[i],
            (None, ChannelKind::Awgn) => 1.0,
            (None, ChannelKind::RayleighFlat) => rng.normal(),
        }
    }

    /// Sends every column of `z` through an independent channel use.
    pub fn transmit(&self, z: &Mat, rng: &mut Rng) -> Realization {
        let (d, b) = z.shape();
        let sd = self.noise_var.sqrt();
        let mut gains = Mat::zeros(d, b);
        let mut noise = Mat::zeros(d, b);
        let mut v = Mat::zeros(d, b);
        // column-major draw order: one symbol's gains, then its noise
        for j in 0..b {
            for i in 0..d {
                gains[(i, j)] = self.gain(i, rng);
            }
            for i in 0..d {
                noise[(i, j)] = sd * rng.normal();
                v[(i, j)] = gains[(i, j)] * z[(i, j)] + noise[(i, j)];
            }
        }
        Realization { v, gains, noise }
    }

    /// Single-vector pass that also stores the equivalent weights.
    pub fn forward(&mut self, z: &[f64], rng: &mut Rng) -> Vec<f64> {
        let r = self.transmit(&Mat::column(z), rng);
        let d = z.len();
        let mut w = Mat::zeros(d, d + 1);
        for i in 0..d {
            w[(i, i)] = r.gains[(i, 0)];
            w[(i, d)] = r.noise[(i, 0)];
        }
        self.last_equivalent = Some(w);
        r.v.into_vec()
    }
}

/// Scales a batch (one symbol per column) so that its mean squared norm is 1/M.
/// Returns the scaled batch and the factor applied.
pub fn power_normalize(x: &Mat, m: usize) -> Result<(Mat, f64)> {
    if x.cols() == 0 {
        return Err(Error::Domain("power normalization of an empty batch".into()));
    }
    let mean_sq = x.as_slice().iter().map(|v| v * v).sum::<f64>() / x.cols() as f64;
    if !(mean_sq > 0.0) || !mean_sq.is_finite() {
        return Err(Error::DegenerateEncoder);
    }
    let c = (1.0 / (mean_sq * m as f64)).sqrt();
    Ok((x.scale(c), c))
}

/// Gradient through [`power_normalize`]: the factor depends on the batch, so
/// ∂L/∂x_i = c·g_i − (c³M/B)(Σ_j g_j·x_j)·x_i.
pub fn power_normalize_backward(x: &Mat, c: f64, m: usize, g: &Mat) -> Mat {
    let b = x.cols() as f64;
    let s: f64 = g.as_slice().iter().zip(x.as_slice()).map(|(a, b)| a * b).sum();
    let k = c * c * c * m as f64 / b * s;
    let mut out = g.scale(c);
    out.axpy_in_place(-k, x);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct AeSystem {
    encoder: Network,
    channel: ChannelLayer,
    decoder: Network,
    m: usize,
    d: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: u64,
    pub eta: f64,
    pub seed: u64,
    /// Telemetry is kept every this many epochs, plus the first and last.
    pub record_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 10_000, eta: 0.02, seed: 0, record_every: 100 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainRecord {
    pub epoch: u64,
    pub loss: f64,
    /// Encoder layers then decoder layers.
    pub fro: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TrainRecord>,
    pub seed: u64,
    pub snr_db: f64,
    pub diverged_at: Option<u64>,
}

impl TrainTrace {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn last(&self) -> &TrainRecord {
        self.records.last().expect("a trace always holds the initial record")
    }
}

struct Pass {
    enc: crate::neural::Trace,
    scale: f64,
    real: Realization,
    dec: crate::neural::Trace,
}

impl AeSystem {
    /// Dense+ReLU(M) → Dense+linear(d) → normalization → channel →
    /// Dense+ReLU(M) → Dense+softmax(M).
    pub fn standard_layout(m: usize, d: usize, channel: ChannelLayer, rng: &mut Rng) -> Result<Self> {
        use ActivationKind::*;
        let encoder = Network::init(&[m, m, d], &[Relu, Linear], rng)?;
        let decoder = Network::init(&[d, m, m], &[Relu, Softmax], rng)?;
        AeSystem::new(encoder, channel, decoder)
    }

    pub fn new(encoder: Network, channel: ChannelLayer, decoder: Network) -> Result<Self> {
        let m = encoder.input_width();
        let d = encoder.output_width();
        if decoder.input_width() != d || decoder.output_width() != m {
            return Err(Error::Shape {
                op: "AeSystem::new",
                detail: format!(
                    "encoder {:?} and decoder {:?} do not form an M→d→M link",
                    encoder.widths(),
                    decoder.widths()
                ),
            });
        }
        if m < 2 {
            return Err(Error::Domain(format!("alphabet size {m} < 2")));
        }
        Ok(AeSystem { encoder, channel, decoder, m, d })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p_av(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn encoder(&self) -> &Network {
        &self.encoder
    }

    pub fn decoder(&self) -> &Network {
        &self.decoder
    }

    pub fn channel(&self) -> &ChannelLayer {
        &self.channel
    }

    pub fn channel_mut(&mut self) -> &mut ChannelLayer {
        &mut self.channel
    }

    pub fn snr_db(&self) -> f64 {
        snr_db_for_noise_var(self.channel.noise_var, self.m, self.d)
    }

    /// Frobenius norms of the encoder layers followed by the decoder layers.
    pub fn frobenius_norms(&self) -> Vec<f64> {
        let mut f = self.encoder.frobenius_norms();
        f.extend(self.decoder.frobenius_norms());
        f
    }

    /// Normalized transmit vectors for all M symbols, one per column.
    pub fn encode(&self) -> Result<Mat> {
        let x = self.encoder.predict(&Mat::identity(self.m))?;
        Ok(power_normalize(&x, self.m)?.0)
    }

    pub fn extract_constellation(&self) -> Result<Constellation> {
        Constellation::new(self.encode()?.transpose(), self.p_av())
    }

    fn pass(&self, rng: &mut Rng) -> Result<Pass> {
        let enc = self.encoder.forward_batch(&Mat::identity(self.m))?;
        let (z, scale) = power_normalize(enc.output(), self.m)?;
        let real = self.channel.transmit(&z, rng);
        let dec = self.decoder.forward_batch(&real.v)?;
        Ok(Pass { enc, scale, real, dec })
    }

    pub fn train(&mut self, cfg: &TrainConfig) -> TrainTrace {
        self.train_with(cfg, |_, _| {})
    }

    /// Full-batch gradient descent over the M one-hot symbols. `observe` sees
    /// the system at every recorded epoch.
    pub fn train_with(&mut self, cfg: &TrainConfig, mut observe: impl FnMut(u64, &AeSystem)) -> TrainTrace {
        let mut rng = Rng::derived(cfg.seed, "ae-channel", 0);
        let classes: Vec<usize> = (0..self.m).collect();
        let every = cfg.record_every.max(1);
        let mut trace = TrainTrace { records: Vec::new(), seed: cfg.seed, snr_db: self.snr_db(), diverged_at: None };
        for e in 0..=cfg.epochs {
            let pass = self.pass(&mut rng);
            let loss = pass
                .as_ref()
                .ok()
                .and_then(|p| loss_value(p.dec.output(), Loss::CrossEntropy, Target::Classes(&classes)).ok())
                .unwrap_or(f64::NAN);
            if !loss.is_finite() {
                trace.records.push(TrainRecord { epoch: e, loss, fro: self.frobenius_norms() });
                trace.diverged_at = Some(e);
                return trace;
            }
            if e % every == 0 || e == cfg.epochs {
                trace.records.push(TrainRecord { epoch: e, loss, fro: self.frobenius_norms() });
                observe(e, self);
            }
            if e == cfg.epochs {
                break;
            }
            let p = pass.expect("finite loss implies a pass");
            if self.step(&p, &classes, cfg.eta).is_err() {
                trace.records.push(TrainRecord { epoch: e + 1, loss: f64::NAN, fro: self.frobenius_norms() });
                trace.diverged_at = Some(e + 1);
                return trace;
            }
        }
        trace
    }

    fn step(&mut self, p: &Pass, classes: &[usize], eta: f64) -> Result<()> {
        let gd = self.decoder.backward(&p.dec, Loss::CrossEntropy, Target::Classes(classes))?;
        // the realized gains are constants of this pass: ∂v/∂z = diag(h)
        let gz = gd.input.hadamard(&p.real.gains);
        let gx = power_normalize_backward(p.enc.output(), p.scale, self.m, &gz);
        let ge = self.encoder.backward_from_output(&p.enc, &gx)?;
        self.decoder.sgd_step(&gd, eta);
        self.encoder.sgd_step(&ge, eta);
        let finite = |n: &Network| (0..n.depth()).all(|h| n.weight(h).is_finite());
        if !finite(&self.encoder) || !finite(&self.decoder) {
            return Err(Error::Diverged { step: 0 });
        }
        Ok(())
    }

    /// Cross-entropy of one noisy full-batch pass.
    pub fn loss(&self, rng: &mut Rng) -> Result<f64> {
        let p = self.pass(rng)?;
        let classes: Vec<usize> = (0..self.m).collect();
        loss_value(p.dec.output(), Loss::CrossEntropy, Target::Classes(&classes))
    }

    /// Monte-Carlo symbol error rate of the trained link with its own decoder.
    pub fn evaluate_ser(&self, n_symbols: usize, rng: &mut Rng) -> Result<f64> {
        let z = self.encode()?;
        let mut errors = 0usize;
        for_each_chunk(n_symbols, rng, self.m, |sent, rng| {
            let r = self.channel.transmit(&z.select_cols(sent), rng);
            let p = self.decoder.predict(&r.v)?;
            errors += (0..sent.len()).filter(|&j| argmax_col(&p, j) != sent[j]).count();
            Ok(())
        })?;
        Ok(errors as f64 / n_symbols.max(1) as f64)
    }
}

const CHUNK: usize = 4096;

fn for_each_chunk(
    n: usize,
    rng: &mut Rng,
    m: usize,
    mut f: impl FnMut(&[usize], &mut Rng) -> Result<()>,
) -> Result<()> {
    let mut left = n;
    let mut sent = Vec::with_capacity(CHUNK);
    while left > 0 {
        let b = left.min(CHUNK);
        sent.clear();
        sent.extend((0..b).map(|_| rng.below(m)));
        f(&sent, rng)?;
        left -= b;
    }
    Ok(())
}

fn argmax_col(p: &Mat, j: usize) -> usize {
    let mut best = 0;
    for i in 1..p.rows() {
        if p[(i, j)] > p[(best, j)] {
            best = i;
        }
    }
    best
}

/// SER of the coherent minimum-distance detector argmin_k ‖v − h∘c_k‖ on a
/// fixed constellation (gains known at the receiver).
pub fn nearest_neighbor_ser(c: &Constellation, channel: &ChannelLayer, n_symbols: usize, rng: &mut Rng) -> f64 {
    let pts = c.points().transpose();
    let (d, m) = pts.shape();
    let mut errors = 0usize;
    for_each_chunk(n_symbols, rng, m, |sent, rng| {
        let r = channel.transmit(&pts.select_cols(sent), rng);
        for (j, &s) in sent.iter().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for k in 0..m {
                let dist: f64 = (0..d).map(|i| (r.v[(i, j)] - r.gains[(i, j)] * pts[(i, k)]).powi(2)).sum();
                if dist < best.0 {
                    best = (dist, k);
                }
            }
            if best.1 != s {
                errors += 1;
            }
        }
        Ok(())
    })
    .expect("infallible");
    errors as f64 / n_symbols.max(1) as f64
}

/// Gaussian tail Q(x) = P(N(0,1) > x).
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / core::f64::consts::SQRT_2)
}

/// Decoder outputs for a batch of received vectors; exposed for inspection.
pub fn decode(sys: &AeSystem, v: &Mat) -> Result<Vec<usize>> {
    let p = sys.decoder.predict(v)?;
    Ok((0..v.cols()).map(|j| argmax_col(&p, j)).collect())
}

/// Mean squared norm of the columns; the transmitted power of a batch.
pub fn batch_power(z: &Mat) -> f64 {
    z.as_slice().iter().map(|v| v * v).sum::<f64>() / z.cols().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn normalize_unit_rows() {
        let x = Mat::identity(8);
        let (z, c) = power_normalize(&x, 8).unwrap();
        assert!((c - 1.0 / 8f64.sqrt()).abs() < 1e-15);
        assert!((batch_power(&z) - 0.125).abs() < 1e-15);
        let one = Mat::column(&[3.0, 4.0]);
        let (z, _) = power_normalize(&one, 4).unwrap();
        assert!((batch_power(&z) - 0.25).abs() < 1e-15);
        assert_eq!(power_normalize(&Mat::zeros(2, 3), 4).unwrap_err(), Error::DegenerateEncoder);
    }

    #[test]
    fn normalize_backward_matches_fd() {
        let mut rng = Rng::new(1);
        let mut x = Mat::zeros(2, 5);
        rng.fill_normal(x.as_mut_slice());
        let mut w = Mat::zeros(2, 5);
        rng.fill_normal(w.as_mut_slice());
        let f = |x: &Mat| -> f64 {
            let (z, _) = power_normalize(x, 5).unwrap();
            z.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b * a).sum()
        };
        let (z, c) = power_normalize(&x, 5).unwrap();
        let g = Mat::from_fn(2, 5, |i, j| 2.0 * w[(i, j)] * z[(i, j)]);
        let back = power_normalize_backward(&x, c, 5, &g);
        for k in 0..10 {
            let mut xp = x.clone();
            xp.as_mut_slice()[k] += 1e-6;
            let mut xm = x.clone();
            xm.as_mut_slice()[k] -= 1e-6;
            let fd = (f(&xp) - f(&xm)) / 2e-6;
            assert!((fd - back.as_slice()[k]).abs() < 1e-7, "{fd} {}", back.as_slice()[k]);
        }
    }

    #[test]
    fn noiseless_and_pinned_channels() {
        let mut rng = Rng::new(2);
        let mut ch = ChannelLayer::new(ChannelKind::Awgn, 0.0).unwrap();
        assert_eq!(ch.forward(&[0.3, -0.2], &mut rng), vec![0.3, -0.2]);
        let eq = ch.last_equivalent().unwrap();
        assert_eq!(eq.row(0), &[1.0, 0.0, 0.0]);

        let mut a = ChannelLayer::new(ChannelKind::Awgn, 0.1).unwrap();
        let mut r = ChannelLayer::new(ChannelKind::RayleighFlat, 0.1).unwrap();
        r.pin_gains(vec![1.0, 1.0]);
        let (mut r1, mut r2) = (Rng::new(5), Rng::new(5));
        let z = [0.5, 0.25];
        let va = a.forward(&z, &mut r1);
        let vr = r.forward(&z, &mut r2);
        assert_eq!(va, vr);
        // differences are exactly the noise column of the equivalent weights
        let n = a.last_equivalent().unwrap().col(2);
        assert!((va[0] - z[0] - n[0]).abs() < 1e-16);
    }

    #[test]
    fn fading_resamples_gains() {
        let ch = ChannelLayer::new(ChannelKind::RayleighFlat, 0.01).unwrap();
        let r = ch.transmit(&Mat::from_fn(2, 3, |_, _| 1.0), &mut Rng::new(3));
        assert_ne!(r.gains[(0, 0)], r.gains[(0, 1)]);
        assert_ne!(r.gains[(0, 0)], r.gains[(1, 0)]);
    }

    #[test]
    fn snr_convention_round_trips() {
        let s = noise_var_for_snr(25.0, 8, 2);
        assert!((snr_db_for_noise_var(s, 8, 2) - 25.0).abs() < 1e-12);
        assert!((noise_var_for_snr(0.0, 8, 2) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn eta_zero_keeps_norms() {
        let mut rng = Rng::new(9);
        let ch = ChannelLayer::new(ChannelKind::Awgn, noise_var_for_snr(10.0, 4, 2)).unwrap();
        let mut sys = AeSystem::standard_layout(4, 2, ch, &mut rng).unwrap();
        let t = sys.train(&TrainConfig { epochs: 20, eta: 0.0, seed: 1, record_every: 5 });
        assert_eq!(t.records.len(), 5);
        assert!(t.records.iter().all(|r| r.fro == t.records[0].fro));
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let build = || {
            let ch = ChannelLayer::new(ChannelKind::Awgn, noise_var_for_snr(15.0, 4, 2)).unwrap();
            AeSystem::standard_layout(4, 2, ch, &mut Rng::new(3)).unwrap()
        };
        let cfg = TrainConfig { epochs: 3000, eta: 0.05, seed: 4, record_every: 500 };
        let (mut a, mut b) = (build(), build());
        let ta = a.train(&cfg);
        let tb = b.train(&cfg);
        assert_eq!(ta, tb);
        assert!(!ta.diverged());
        assert!(ta.last().loss < 0.5 * ta.records[0].loss, "{:?}", ta.records);
        let c = a.extract_constellation().unwrap();
        assert!((c.average_power() - 0.25).abs() < 1e-12);
        assert!(a.evaluate_ser(2000, &mut Rng::new(1)).unwrap() < 0.05);
    }

    #[test]
    fn divergence_is_flagged() {
        let ch = ChannelLayer::new(ChannelKind::Awgn, 0.01).unwrap();
        let mut sys = AeSystem::standard_layout(4, 2, ch, &mut Rng::new(3)).unwrap();
        let t = sys.train(&TrainConfig { epochs: 50, eta: 1e200, seed: 0, record_every: 10 });
        assert!(t.diverged());
        assert!(!t.last().loss.is_finite());
    }

    #[test]
    fn q_function_values() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-16);
        assert!((q_function(1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
    }
}
