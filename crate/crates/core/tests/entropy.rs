use physlab_core::infoflow::{
    conditional_entropy, gram, joint_entropy, log_schedule, mutual_information, record_planes, renyi_entropy, risk_gap,
    GramMatrix, InfoPlaneConfig, KernelWidth,
};
use physlab_core::neural::{ActivationKind, Network};
use physlab_core::numkit::{sym_eigenvalues, Mat, Rng};
use proptest::prelude::*;

fn normal(rows: usize, cols: usize, rng: &mut Rng) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    rng.fill_normal(m.as_mut_slice());
    m
}

#[test]
fn random_grams_are_valid() {
    let mut rng = Rng::new(1);
    let g = gram(&normal(40, 5, &mut rng), KernelWidth::Auto).unwrap();
    let a = g.matrix();
    assert!(a.asymmetry().unwrap() < 1e-10);
    assert!((a.trace() - 1.0).abs() < 1e-10);
    assert!(sym_eigenvalues(a).unwrap().iter().all(|&e| e >= -1e-9));
    assert!(a.diag().iter().all(|&d| d == 1.0 / 40.0));
}

#[test]
fn joint_entropy_dominates_marginal() {
    let mut rng = Rng::new(2);
    for _ in 0..100 {
        let g = gram(&normal(12, 3, &mut rng), KernelWidth::Fixed(0.5 + rng.uniform())).unwrap();
        let s = renyi_entropy(&g, 1.01).unwrap();
        assert!(joint_entropy(&g, &g, 1.01).unwrap() >= s - 1e-9);
    }
}

#[test]
fn self_information_and_symmetry() {
    let mut rng = Rng::new(3);
    let ga = gram(&normal(30, 4, &mut rng), KernelWidth::Auto).unwrap();
    let gb = gram(&normal(30, 2, &mut rng), KernelWidth::Auto).unwrap();
    assert_eq!(mutual_information(&ga, &gb, 1.01).unwrap(), mutual_information(&gb, &ga, 1.01).unwrap());
    let self_mi = mutual_information(&ga, &ga, 1.01).unwrap();
    let joint_self = joint_entropy(&ga, &ga, 1.01).unwrap();
    let s = renyi_entropy(&ga, 1.01).unwrap();
    assert!((self_mi - (2.0 * s - joint_self)).abs() < 1e-12);
}

#[test]
fn independent_samples_share_little_information() {
    // narrow kernels saturate the joint Gram toward I/n, so use one on the data scale
    let mut rng = Rng::new(4);
    let ga = gram(&normal(500, 2, &mut rng), KernelWidth::Fixed(2.0)).unwrap();
    let gb = gram(&normal(500, 2, &mut rng), KernelWidth::Fixed(2.0)).unwrap();
    let mi = mutual_information(&ga, &gb, 1.01).unwrap();
    assert!(mi < 0.1, "{mi}");
}

#[test]
fn disjoint_halves_agree() {
    let mut rng = Rng::new(5);
    for _ in 0..10 {
        let x = normal(1000, 3, &mut rng);
        let a =
            renyi_entropy(&gram(&x.transpose().col_range(0, 500).transpose(), KernelWidth::Fixed(1.0)).unwrap(), 1.01);
        let b = renyi_entropy(
            &gram(&x.transpose().col_range(500, 1000).transpose(), KernelWidth::Fixed(1.0)).unwrap(),
            1.01,
        );
        assert!((a.unwrap() - b.unwrap()).abs() < 0.15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn entropy_is_bounded(seed in 0u64..10_000, n in 2usize..30, width in 0.05f64..5.0) {
        let mut rng = Rng::new(seed);
        let g = gram(&normal(n, 3, &mut rng), KernelWidth::Fixed(width)).unwrap();
        let s = renyi_entropy(&g, 1.01).unwrap();
        prop_assert!(s >= -1e-9 && s <= (n as f64).log2() + 1e-9);
    }

    #[test]
    fn kernel_scale_does_not_matter(seed in 0u64..10_000, c in 1e-3f64..1e3) {
        let mut rng = Rng::new(seed);
        let x = normal(15, 2, &mut rng);
        let k = Mat::from_fn(15, 15, |i, j| {
            let d: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d / 2.0).exp()
        });
        let a = GramMatrix::from_kernel(&k).unwrap();
        let b = GramMatrix::from_kernel(&k.scale(c)).unwrap();
        prop_assert!(a.matrix().sub(b.matrix()).max_abs() < 1e-12);
        let (sa, sb) = (renyi_entropy(&a, 1.01).unwrap(), renyi_entropy(&b, 1.01).unwrap());
        prop_assert!((sa - sb).abs() < 1e-12);
    }
}

fn regression_pair(n: usize, rng: &mut Rng) -> (Mat, Mat) {
    let w = normal(6, 6, &mut Rng::new(99)).scale(0.4);
    let x = normal(6, n, rng);
    let mut y = w.matmul(&x);
    for v in y.as_mut_slice() {
        *v += 0.3 * rng.normal();
    }
    (x, y)
}

#[test]
fn gap_vanishes_on_training_data_and_shrinks_with_data() {
    let mut rng = Rng::new(6);
    let (xt, yt) = regression_pair(2000, &mut rng);
    let fit = |n: usize, seed: u64| {
        let mut rng = Rng::new(seed);
        let (x, y) = regression_pair(n, &mut rng);
        let mut net = Network::init(&[6, 16, 6], &[ActivationKind::Linear; 2], &mut Rng::new(seed)).unwrap();
        let cfg = InfoPlaneConfig {
            alpha: 1.01,
            kernel_width: KernelWidth::Auto,
            snapshots: vec![0, 3000],
            eta: 0.01,
            batch: n.min(50),
            seed,
        };
        record_planes(&mut net, (&x, &y), (&x, &y), &cfg).unwrap();
        (net, x, y)
    };
    let mut small_gaps = Vec::new();
    let mut big_gaps = Vec::new();
    for seed in 0..5 {
        let (net, x, y) = fit(10, seed);
        let g = risk_gap(&net, (&x, &y), (&xt, &yt)).unwrap();
        assert!(g.gap > 0.0, "{g:?}");
        assert_eq!(risk_gap(&net, (&x, &y), (&x, &y)).unwrap().gap, 0.0);
        small_gaps.push(g.gap);
        let (net, x, y) = fit(100, seed);
        big_gaps.push(risk_gap(&net, (&x, &y), (&xt, &yt)).unwrap().gap);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&big_gaps) < mean(&small_gaps), "{big_gaps:?} vs {small_gaps:?}");
}

#[test]
fn information_planes_move_with_training() {
    let mut rng = Rng::new(7);
    let (x, y) = regression_pair(300, &mut rng);
    let mut net = Network::init(&[6, 8, 4, 8, 6], &[ActivationKind::Linear; 4], &mut Rng::new(3)).unwrap();
    let cfg = InfoPlaneConfig {
        alpha: 1.01,
        kernel_width: KernelWidth::Auto,
        snapshots: log_schedule(500),
        eta: 0.002,
        batch: 50,
        seed: 2,
    };
    let t = record_planes(&mut net, (&x, &y), (&x, &y), &cfg).unwrap();
    assert_eq!(t.iterations(), log_schedule(500));
    assert_eq!(t.at(0).len(), 3);
    let mse = t.mse_curve();
    assert!(mse.last().unwrap().1 < 0.5 * mse[0].1);
    for r in &t.records {
        assert!(r.i_tv.is_finite() && r.i_tvp.is_finite() && r.i_ttp.is_finite());
    }
    // an even number of hidden layers has no middle layer
    let mut even = Network::init(&[6, 8, 8, 6], &[ActivationKind::Linear; 3], &mut Rng::new(3)).unwrap();
    assert!(record_planes(&mut even, (&x, &y), (&x, &y), &cfg).is_err());
}

#[test]
fn rank_one_and_uniform_spectra_have_exact_entropies() {
    for n in [2, 10, 50] {
        let ones = GramMatrix::from_kernel(&Mat::from_fn(n, n, |_, _| 1.0)).unwrap();
        let eye = GramMatrix::from_kernel(&Mat::identity(n)).unwrap();
        for alpha in [0.5, 1.01, 2.0, 5.0] {
            assert!(renyi_entropy(&ones, alpha).unwrap().abs() < 1e-9);
            assert!((renyi_entropy(&eye, alpha).unwrap() - (n as f64).log2()).abs() < 1e-9);
        }
    }
}

#[test]
fn conditioning_on_itself_leaves_a_bounded_remainder() {
    // A∘A is a Gaussian Gram of half the width, so it carries more entropy than A
    let mut rng = Rng::new(8);
    let x = normal(200, 3, &mut rng);
    for w in [KernelWidth::Auto, KernelWidth::Fixed(1.0), KernelWidth::Fixed(3.0)] {
        let g = gram(&x, w).unwrap();
        let c = conditional_entropy(&g, &g, 1.01).unwrap();
        assert!(c >= 0.0 && c <= renyi_entropy(&g, 1.01).unwrap(), "{c}");
    }
}
