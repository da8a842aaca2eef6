use physlab_core::constellation::Constellation;
use physlab_core::endtoend::{
    nearest_neighbor_ser, noise_var_for_snr, q_function, AeSystem, ChannelKind, ChannelLayer, TrainConfig,
};
use physlab_core::numkit::{Mat, Rng};

fn trained(snr_db: f64) -> AeSystem {
    let ch = ChannelLayer::new(ChannelKind::Awgn, noise_var_for_snr(snr_db, 4, 2)).unwrap();
    let mut sys = AeSystem::standard_layout(4, 2, ch, &mut Rng::new(11)).unwrap();
    let t = sys.train(&TrainConfig { epochs: 6000, eta: 0.05, seed: 3, record_every: 1000 });
    assert!(!t.diverged());
    sys
}

#[test]
fn awgn_noise_power() {
    let sigma2 = 0.03;
    let ch = ChannelLayer::new(ChannelKind::Awgn, sigma2).unwrap();
    let z = Mat::from_fn(4, 100_000, |i, j| ((i + j) as f64).sin());
    let r = ch.transmit(&z, &mut Rng::new(1));
    let e = r.v.sub(&z).as_slice().iter().map(|x| x * x).sum::<f64>() / 100_000.0;
    assert!((e / (4.0 * sigma2) - 1.0).abs() < 0.02, "{e}");
}

#[test]
fn antipodal_ser_matches_q_function() {
    let c = Constellation::new(Mat::from_rows(&[&[0.5f64.sqrt()], &[-(0.5f64.sqrt())]]).unwrap(), 0.5).unwrap();
    let sigma2 = 0.2;
    let ch = ChannelLayer::new(ChannelKind::Awgn, sigma2).unwrap();
    let n = 1_000_000;
    let ser = nearest_neighbor_ser(&c, &ch, n, &mut Rng::new(8));
    let p = q_function(0.5f64.sqrt() / sigma2.sqrt());
    let bound = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
    assert!((ser - p).abs() < bound, "{ser} vs {p} ± {bound}");
}

#[test]
fn ae_decoder_close_to_nearest_neighbor() {
    let sys = trained(10.0);
    let ser_ae = sys.evaluate_ser(200_000, &mut Rng::new(5)).unwrap();
    let c = sys.extract_constellation().unwrap();
    let ser_nn = nearest_neighbor_ser(&c, sys.channel(), 200_000, &mut Rng::new(5));
    assert!(ser_ae <= 2.0 * ser_nn.max(1.0 / 200_000.0), "ae {ser_ae} nn {ser_nn}");
}

#[test]
fn noiseless_link_makes_no_errors() {
    let mut sys = trained(20.0);
    sys.channel_mut().set_noise_var(0.0);
    assert_eq!(sys.evaluate_ser(20_000, &mut Rng::new(2)).unwrap(), 0.0);
}

#[test]
fn ser_falls_with_snr() {
    let mut sys = trained(10.0);
    let mut prev = f64::INFINITY;
    for snr in [0.0, 5.0, 10.0, 15.0, 20.0] {
        sys.channel_mut().set_noise_var(noise_var_for_snr(snr, 4, 2));
        let ser = sys.evaluate_ser(1_000_000, &mut Rng::new(6)).unwrap();
        assert!(ser <= prev, "{snr} dB: {ser} > {prev}");
        prev = ser;
    }
}

#[test]
fn transmitted_power_is_budgeted() {
    for seed in 0..5 {
        let ch = ChannelLayer::new(ChannelKind::RayleighFlat, 0.01).unwrap();
        let sys = AeSystem::standard_layout(16, 3, ch, &mut Rng::new(seed)).unwrap();
        let z = sys.encode().unwrap();
        let p = z.as_slice().iter().map(|x| x * x).sum::<f64>() / 16.0;
        assert!((p - 1.0 / 16.0).abs() < 1e-12);
    }
}
