//! OFDM channel estimation: a Rayleigh multipath model with known frequency
//! correlation, LS and LMMSE estimators, and neural estimators trained on
//! (noisy observation, true response) pairs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::neural::{loss_value, ActivationKind, Loss, Network, Target};
use crate::numkit::{herm_logdet, herm_solve, CMat, Complex64, Mat, Rng};
use crate::{Error, Result};

/// Frequency response of an L-tap channel on N_c subcarriers, h = F·g with
/// F[k,l] = e^{−2πi·kl/N_c} and independent taps g_l ~ CN(0, pdp_l).
#[derive(Clone, Debug, PartialEq)]
pub struct OfdmChannelModel {
    n_c: usize,
    pdp: Vec<f64>,
    f: CMat,
    r_hh: CMat,
}

impl OfdmChannelModel {
    pub fn new(n_c: usize, pdp: Vec<f64>) -> Result<Self> {
        if n_c == 0 || pdp.is_empty() || pdp.len() > n_c {
            return Err(Error::Domain(format!("need 1 ≤ taps ≤ N_c, got {} taps for N_c = {n_c}", pdp.len())));
        }
        if pdp.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) || pdp.iter().all(|&p| p == 0.0) {
            return Err(Error::Domain("power-delay profile must be non-negative and not all zero".into()));
        }
        let l = pdp.len();
        let f = CMat::from_fn(n_c, l, |k, t| Complex64::from_polar(1.0, -2.0 * PI * (k * t) as f64 / n_c as f64));
        let r_hh = CMat::from_fn(n_c, n_c, |a, b| (0..l).map(|t| f[(a, t)] * f[(b, t)].conj() * pdp[t]).sum());
        Ok(OfdmChannelModel { n_c, pdp, f, r_hh })
    }

    /// Exponential profile e^{−l} over `taps` taps, normalized to unit power.
    pub fn exponential(n_c: usize, taps: usize) -> Result<Self> {
        let raw: Vec<f64> = (0..taps).map(|l| (-(l as f64)).exp()).collect();
        let s: f64 = raw.iter().sum();
        OfdmChannelModel::new(n_c, raw.into_iter().map(|p| p / s).collect())
    }

    /// Exponential profile with N_c/16 taps (at least one).
    pub fn standard(n_c: usize) -> Result<Self> {
        OfdmChannelModel::exponential(n_c, (n_c / 16).max(1))
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn taps(&self) -> usize {
        self.pdp.len()
    }

    pub fn pdp(&self) -> &[f64] {
        &self.pdp
    }

    pub fn r_hh(&self) -> &CMat {
        &self.r_hh
    }

    pub fn sample_channel(&self, rng: &mut Rng) -> Vec<Complex64> {
        let g: Vec<Complex64> = self.pdp.iter().map(|&p| rng.complex_normal(p)).collect();
        self.f.matvec(&g)
    }
}

/// Noise variance per subcarrier for a unit-power channel.
pub fn noise_var_for_snr(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// v = h + n with n ~ CN(0, σ²·I), the LS estimate under unit pilots.
pub fn ls_estimate(h: &[Complex64], noise_var: f64, rng: &mut Rng) -> Vec<Complex64> {
    h.iter().map(|&x| x + rng.complex_normal(noise_var)).collect()
}

/// The matrix W = R_hh(R_hh + σ²I)^{-1}, built once and applied to many observations.
#[derive(Clone, Debug)]
pub struct LmmseFilter {
    w: CMat,
    noise_var: f64,
}

impl LmmseFilter {
    pub fn new(model: &OfdmChannelModel, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0) {
            return Err(Error::Domain(format!("noise variance must be positive, got {noise_var}")));
        }
        let r = model.r_hh();
        let a = r.add_diag(noise_var);
        // R and R + σ²I commute, so W = (R + σ²I)^{-1}·R
        let w = herm_solve(&a, r)?;
        let resid = a.matmul(&w).sub(r).max_abs();
        if resid > 1e-8 * r.max_abs().max(1.0) {
            return Err(Error::Numerical(format!("LMMSE solve residual {resid:e}")));
        }
        Ok(LmmseFilter { w, noise_var })
    }

    pub fn matrix(&self) -> &CMat {
        &self.w
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.w.matvec(v)
    }

    /// tr[R_hh(I + R_hh/σ²)^{-1}] = σ²·tr(W).
    pub fn analytic_mse(&self) -> f64 {
        self.noise_var * self.w.trace().re
    }
}

pub fn lmmse_estimate(model: &OfdmChannelModel, v: &[Complex64], noise_var: f64) -> Result<Vec<Complex64>> {
    Ok(LmmseFilter::new(model, noise_var)?.apply(v))
}

pub fn mse_ls(model: &OfdmChannelModel, noise_var: f64) -> f64 {
    model.n_c as f64 * noise_var
}

pub fn mse_lmmse(model: &OfdmChannelModel, noise_var: f64) -> Result<f64> {
    Ok(LmmseFilter::new(model, noise_var)?.analytic_mse())
}

/// I(h; v) in nats for v = h + n, computed as log|I + R_hh/σ²|. This equals
/// log(|R_hh|/|R_ee|) whenever R_hh is non-singular and stays finite when the
/// channel has fewer taps than subcarriers.
pub fn analytic_gaussian_mi(model: &OfdmChannelModel, noise_var: f64) -> Result<f64> {
    if !(noise_var > 0.0) {
        return Err(Error::Domain(format!("noise variance must be positive, got {noise_var}")));
    }
    let a = model.r_hh().scale(1.0 / noise_var).add_diag(1.0);
    herm_logdet(&a)
}

/// Error covariance R_ee = R_hh − R_hv·R_vv^{-1}·R_vh of the LMMSE estimate.
pub fn error_covariance(model: &OfdmChannelModel, noise_var: f64) -> Result<CMat> {
    let w = LmmseFilter::new(model, noise_var)?;
    Ok(model.r_hh().sub(&w.w.matmul(model.r_hh())))
}

/// Linear interpolation of pilot observations at subcarriers 0, s, 2s, …,
/// with linear extrapolation past the last pilot.
pub fn interpolate_pilots(obs: &[Complex64], spacing: usize) -> Vec<Complex64> {
    let n = obs.len();
    if spacing <= 1 {
        return obs.to_vec();
    }
    let pilots: Vec<usize> = (0..n).step_by(spacing).collect();
    let last = *pilots.last().unwrap();
    (0..n)
        .map(|k| {
            if pilots.len() == 1 {
                return obs[0];
            }
            let (p0, p1) = if k >= last {
                (last - spacing, last)
            } else {
                (k / spacing * spacing, k / spacing * spacing + spacing)
            };
            let t = (k as f64 - p0 as f64) / spacing as f64;
            obs[p0] + (obs[p1] - obs[p0]) * t
        })
        .collect()
}

/// Paired observations and true responses, one sample per column.
#[derive(Clone, Debug)]
pub struct EstimationDataset {
    pub v: CMat,
    pub z: CMat,
    pub snr_db: f64,
    pub pilot_spacing: usize,
}

impl EstimationDataset {
    pub fn len(&self) -> usize {
        self.v.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.v.cols() == 0
    }

    pub fn n_c(&self) -> usize {
        self.v.rows()
    }

    pub fn inputs(&self) -> Mat {
        to_real(&self.v)
    }

    pub fn targets(&self) -> Mat {
        to_real(&self.z)
    }

    /// Mean ‖v − z‖² over the samples.
    pub fn observation_mse(&self) -> f64 {
        self.v.sub(&self.z).as_slice().iter().map(|x| x.norm_sqr()).sum::<f64>() / self.len() as f64
    }
}

/// Stacks real parts over imaginary parts: N_c × n complex → 2N_c × n real.
pub fn to_real(a: &CMat) -> Mat {
    let (r, c) = a.shape();
    Mat::from_fn(2 * r, c, |i, j| if i < r { a[(i, j)].re } else { a[(i - r, j)].im })
}

pub fn from_real(a: &Mat) -> CMat {
    let r = a.rows() / 2;
    CMat::from_fn(r, a.cols(), |i, j| Complex64::new(a[(i, j)], a[(i + r, j)]))
}

pub fn build_dataset(
    model: &OfdmChannelModel,
    n: usize,
    snr_db: f64,
    pilot_spacing: usize,
    rng: &mut Rng,
) -> Result<EstimationDataset> {
    if n == 0 {
        return Err(Error::Domain("dataset needs at least one sample".into()));
    }
    if pilot_spacing == 0 || model.n_c % pilot_spacing != 0 {
        return Err(Error::Domain(format!("pilot spacing {pilot_spacing} must divide N_c = {}", model.n_c)));
    }
    let s2 = noise_var_for_snr(snr_db);
    let mut v = CMat::zeros(model.n_c, n);
    let mut z = CMat::zeros(model.n_c, n);
    for j in 0..n {
        let h = model.sample_channel(rng);
        let obs = interpolate_pilots(&ls_estimate(&h, s2, rng), pilot_spacing);
        v.set_col(j, &obs);
        z.set_col(j, &h);
    }
    Ok(EstimationDataset { v, z, snr_db, pilot_spacing })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NnConfig {
    pub hidden_layers: usize,
    pub width: usize,
    pub activation: ActivationKind,
    pub epochs: u64,
    pub eta: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for NnConfig {
    fn default() -> Self {
        NnConfig {
            hidden_layers: 1,
            width: 128,
            activation: ActivationKind::Linear,
            epochs: 1000,
            eta: 0.001,
            batch: 100,
            seed: 0,
        }
    }
}

impl NnConfig {
    pub fn widths(&self, io: usize) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_layers + 2);
        w.push(io);
        w.extend(core::iter::repeat(self.width).take(self.hidden_layers));
        w.push(io);
        w
    }

    pub fn activations(&self) -> Vec<ActivationKind> {
        let mut a: Vec<ActivationKind> = core::iter::repeat(self.activation).take(self.hidden_layers).collect();
        a.push(ActivationKind::Linear);
        a
    }
}

#[derive(Clone, Debug)]
pub struct NnEstimator {
    pub net: Network,
    pub diverged_at: Option<u64>,
    pub steps: u64,
}

impl NnEstimator {
    /// Mean per-vector squared error on a dataset.
    pub fn mse(&self, ds: &EstimationDataset) -> Result<f64> {
        Ok(self.errors(ds)?.iter().sum::<f64>() / ds.len() as f64)
    }

    /// Squared error ‖ẑ − z‖² of every sample.
    pub fn errors(&self, ds: &EstimationDataset) -> Result<Vec<f64>> {
        let x = ds.inputs();
        let y = ds.targets();
        let mut out = Vec::with_capacity(ds.len());
        let mut start = 0;
        while start < ds.len() {
            let end = (start + 2048).min(ds.len());
            let p = self.net.predict(&x.col_range(start, end))?;
            let t = y.col_range(start, end);
            for j in 0..p.cols() {
                out.push((0..p.rows()).map(|i| (p[(i, j)] - t[(i, j)]).powi(2)).sum());
            }
            start = end;
        }
        Ok(out)
    }
}

/// Minibatch gradient descent on ½Σ‖ẑ − z‖². An epoch is one shuffled pass.
pub fn train_nn_estimator(ds: &EstimationDataset, cfg: &NnConfig) -> Result<NnEstimator> {
    train_nn_estimator_with(ds, cfg, |_, _| {})
}

/// As [`train_nn_estimator`], calling `observe(step, net)` before the first
/// step and after every step.
pub fn train_nn_estimator_with(
    ds: &EstimationDataset,
    cfg: &NnConfig,
    mut observe: impl FnMut(u64, &Network),
) -> Result<NnEstimator> {
    if cfg.batch == 0 || cfg.width == 0 {
        return Err(Error::Domain("batch and width must be positive".into()));
    }
    let io = 2 * ds.n_c();
    let mut init = Rng::derived(cfg.seed, "nn-init", cfg.hidden_layers as u64);
    let mut net = Network::init(&cfg.widths(io), &cfg.activations(), &mut init)?;
    let mut order_rng = Rng::derived(cfg.seed, "nn-batches", 0);
    let x = ds.inputs();
    let y = ds.targets();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut step = 0u64;
    observe(0, &net);
    for _ in 0..cfg.epochs {
        order_rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch) {
            let (xb, yb) = (x.select_cols(chunk), y.select_cols(chunk));
            let diverged = |step| Ok(NnEstimator { net: net.clone(), diverged_at: Some(step), steps: step });
            let trace = match net.forward_batch(&xb) {
                Ok(t) => t,
                Err(Error::Overflow { .. }) => return diverged(step),
                Err(e) => return Err(e),
            };
            let loss = loss_value(trace.output(), Loss::Square, Target::Values(&yb))?;
            if !loss.is_finite() {
                return diverged(step);
            }
            let g = net.backward(&trace, Loss::Square, Target::Values(&yb))?;
            net.sgd_step(&g, cfg.eta);
            step += 1;
            observe(step, &net);
        }
    }
    Ok(NnEstimator { net, diverged_at: None, steps: step })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorReport {
    pub estimator: String,
    pub snr_db: f64,
    pub n_train: usize,
    pub depth: usize,
    pub width: usize,
    pub mse: f64,
    /// Standard error of the mean squared error.
    pub std_err: f64,
    pub n_test: usize,
    pub seed: u64,
}

/// Mean and standard error of a list of per-sample errors.
pub fn mean_and_std_err(errs: &[f64]) -> (f64, f64) {
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Per-sample squared errors of the LS observation and of LMMSE on a test set.
pub fn classical_errors(model: &OfdmChannelModel, ds: &EstimationDataset) -> Result<(Vec<f64>, Vec<f64>)> {
    let filt = LmmseFilter::new(model, noise_var_for_snr(ds.snr_db))?;
    let mut ls = Vec::with_capacity(ds.len());
    let mut lm = Vec::with_capacity(ds.len());
    for j in 0..ds.len() {
        let v = ds.v.col(j);
        let z = ds.z.col(j);
        ls.push(v.iter().zip(&z).map(|(a, b)| (a - b).norm_sqr()).sum());
        lm.push(filt.apply(&v).iter().zip(&z).map(|(a, b)| (a - b).norm_sqr()).sum());
    }
    Ok((ls, lm))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthSweepConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub depths: Vec<usize>,
    pub trials: usize,
    pub snr_db: f64,
    pub pilot_spacing: usize,
    pub nn: NnConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthSweep {
    pub depths: Vec<usize>,
    /// trials × depths test MSEs.
    pub per_trial: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

impl DepthSweep {
    /// Trials whose MSE is non-decreasing across the depth list.
    pub fn ordered_trials(&self) -> usize {
        self.per_trial.iter().filter(|r| r.windows(2).all(|w| w[0] <= w[1])).count()
    }
}

/// Test MSE per depth, averaged over trials. Trial t draws its training set
/// from stream t; all trials share one test set.
pub fn depth_sweep(model: &OfdmChannelModel, cfg: &DepthSweepConfig) -> Result<DepthSweep> {
    if cfg.depths.windows(2).any(|w| w[0] >= w[1]) || cfg.depths.is_empty() {
        return Err(Error::Domain(format!("depths {:?} must be strictly ascending", cfg.depths)));
    }
    let seed = cfg.nn.seed;
    let test = build_dataset(model, cfg.n_test, cfg.snr_db, cfg.pilot_spacing, &mut Rng::derived(seed, "test", 0))?;
    let mut per_trial = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let mut rng = Rng::derived(seed, "train", t as u64);
        let train = build_dataset(model, cfg.n_train, cfg.snr_db, cfg.pilot_spacing, &mut rng)?;
        let mut row = Vec::with_capacity(cfg.depths.len());
        for &depth in &cfg.depths {
            let nn =
                NnConfig { hidden_layers: depth, seed: crate::numkit::derive_seed(seed, "trial", t as u64), ..cfg.nn };
            let est = train_nn_estimator(&train, &nn)?;
            if let Some(step) = est.diverged_at {
                return Err(Error::Diverged { step });
            }
            row.push(est.mse(&test)?);
        }
        per_trial.push(row);
    }
    let mean =
        (0..cfg.depths.len()).map(|k| per_trial.iter().map(|r| r[k]).sum::<f64>() / cfg.trials.max(1) as f64).collect();
    Ok(DepthSweep { depths: cfg.depths.clone(), per_trial, mean })
}
