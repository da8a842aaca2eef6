use physlab_core::chanest::{
    analytic_gaussian_mi, build_dataset, classical_errors, depth_sweep, ls_estimate, mean_and_std_err, mse_ls,
    train_nn_estimator, DepthSweepConfig, LmmseFilter, NnConfig, OfdmChannelModel,
};
use physlab_core::numkit::{herm_logdet, CMat, Complex64, Rng};

fn mc_mse(model: &OfdmChannelModel, s2: f64, n: usize, seed: u64) -> (f64, f64) {
    let filt = LmmseFilter::new(model, s2).unwrap();
    let mut rng = Rng::new(seed);
    let (mut ls, mut lm) = (0.0, 0.0);
    for _ in 0..n {
        let h = model.sample_channel(&mut rng);
        let v = ls_estimate(&h, s2, &mut rng);
        ls += v.iter().zip(&h).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        lm += filt.apply(&v).iter().zip(&h).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
    }
    (ls / n as f64, lm / n as f64)
}

#[test]
fn ls_mse_is_dimension_times_noise() {
    let model = OfdmChannelModel::standard(16).unwrap();
    for s2 in [0.01, 0.1, 1.0] {
        let (ls, _) = mc_mse(&model, s2, 100_000, 1);
        assert!((ls / mse_ls(&model, s2) - 1.0).abs() < 0.02, "{s2}: {ls}");
    }
}

#[test]
fn lmmse_mse_matches_trace_formula() {
    let model = OfdmChannelModel::standard(16).unwrap();
    for snr in [0.0, 10.0, 20.0] {
        let s2 = 10f64.powf(-snr / 10.0);
        let (ls, lm) = mc_mse(&model, s2, 100_000, 2);
        let want = LmmseFilter::new(&model, s2).unwrap().analytic_mse();
        assert!((lm / want - 1.0).abs() < 0.02, "{snr} dB: {lm} vs {want}");
        assert!(lm <= ls);
    }
}

#[test]
fn sampled_covariance_matches_model() {
    let model = OfdmChannelModel::exponential(16, 4).unwrap();
    let n = 10_000;
    let mut rng = Rng::new(4);
    let mut acc = CMat::zeros(16, 16);
    for _ in 0..n {
        let h = CMat::column(&model.sample_channel(&mut rng));
        acc = acc.add(&h.matmul(&h.adjoint()));
    }
    let emp = acc.scale(1.0 / n as f64);
    let dev = emp.sub(model.r_hh()).max_abs();
    assert!(dev < 0.05 * model.r_hh().max_abs(), "{dev}");
}

#[test]
fn lmmse_error_is_orthogonal_to_observation() {
    let model = OfdmChannelModel::standard(16).unwrap();
    let s2 = 0.1;
    let filt = LmmseFilter::new(&model, s2).unwrap();
    let n = 20_000;
    let mut rng = Rng::new(5);
    let mut corr = vec![Complex64::new(0.0, 0.0); 16 * 16];
    for _ in 0..n {
        let h = model.sample_channel(&mut rng);
        let v = ls_estimate(&h, s2, &mut rng);
        let e: Vec<Complex64> = h.iter().zip(filt.apply(&v)).map(|(a, b)| a - b).collect();
        for i in 0..16 {
            for j in 0..16 {
                corr[i * 16 + j] += e[i] * v[j].conj();
            }
        }
    }
    let bound = 3.0 / (n as f64).sqrt();
    for c in corr {
        assert!((c / n as f64).norm() < bound, "{c}");
    }
}

#[test]
fn mutual_information_falls_with_noise() {
    let model = OfdmChannelModel::standard(64).unwrap();
    let mut prev = f64::INFINITY;
    for k in 0..10 {
        let mi = analytic_gaussian_mi(&model, 0.01 * 2f64.powi(k)).unwrap();
        assert!(mi >= 0.0 && mi <= prev);
        prev = mi;
    }
}

#[test]
fn mutual_information_matches_plug_in_estimate() {
    // I(h; v) = h(v) − h(n): plug-in Gaussian entropies from 10⁵ joint samples
    let model = OfdmChannelModel::exponential(8, 4).unwrap();
    let s2 = 0.1;
    let n = 100_000;
    let mut rng = Rng::new(6);
    let (mut cv, mut cn) = (CMat::zeros(8, 8), CMat::zeros(8, 8));
    for _ in 0..n {
        let h = model.sample_channel(&mut rng);
        let v = ls_estimate(&h, s2, &mut rng);
        let noise: Vec<Complex64> = v.iter().zip(&h).map(|(a, b)| a - b).collect();
        let (v, noise) = (CMat::column(&v), CMat::column(&noise));
        cv = cv.add(&v.matmul(&v.adjoint()));
        cn = cn.add(&noise.matmul(&noise.adjoint()));
    }
    let est = herm_logdet(&cv.scale(1.0 / n as f64)).unwrap() - herm_logdet(&cn.scale(1.0 / n as f64)).unwrap();
    let want = analytic_gaussian_mi(&model, s2).unwrap();
    assert!((est / want - 1.0).abs() < 0.05, "{est} vs {want}");
}

#[test]
fn pilot_interpolation_costs_accuracy_at_high_snr() {
    let model = OfdmChannelModel::standard(64).unwrap();
    let ds = build_dataset(&model, 5000, 30.0, 4, &mut Rng::new(7)).unwrap();
    assert!(ds.observation_mse() > mse_ls(&model, 1e-3));
    let full = build_dataset(&model, 5000, 30.0, 1, &mut Rng::new(7)).unwrap();
    assert!((full.observation_mse() / mse_ls(&model, 1e-3) - 1.0).abs() < 0.05);
}

#[test]
fn small_network_beats_ls_but_not_lmmse() {
    let model = OfdmChannelModel::standard(64).unwrap();
    let train = build_dataset(&model, 100, 10.0, 1, &mut Rng::new(8)).unwrap();
    let test = build_dataset(&model, 5000, 10.0, 1, &mut Rng::new(9)).unwrap();
    let cfg = NnConfig { epochs: 4000, seed: 1, ..NnConfig::default() };
    let est = train_nn_estimator(&train, &cfg).unwrap();
    let (nn, _) = mean_and_std_err(&est.errors(&test).unwrap());
    let (ls, lm) = classical_errors(&model, &test).unwrap();
    let (ls, _) = mean_and_std_err(&ls);
    let (lm, lm_se) = mean_and_std_err(&lm);
    assert!(nn < ls, "nn {nn} ls {ls}");
    assert!(nn >= lm - 3.0 * lm_se, "nn {nn} lmmse {lm}");
}

#[test]
fn single_depth_sweep_equals_direct_evaluation() {
    let model = OfdmChannelModel::standard(16).unwrap();
    let nn = NnConfig { width: 16, epochs: 30, batch: 20, seed: 3, ..NnConfig::default() };
    let cfg =
        DepthSweepConfig { n_train: 40, n_test: 200, depths: vec![2], trials: 1, snr_db: 10.0, pilot_spacing: 1, nn };
    let sweep = depth_sweep(&model, &cfg).unwrap();
    assert_eq!(sweep.mean.len(), 1);
    assert_eq!(sweep.mean[0], sweep.per_trial[0][0]);
    assert!(depth_sweep(&model, &DepthSweepConfig { depths: vec![3, 1], ..cfg }).is_err());
}
