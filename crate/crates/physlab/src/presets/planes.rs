//! Information-plane presets on the channel-estimation task.

use physlab_core::chanest::{build_dataset, OfdmChannelModel};
use physlab_core::infoflow::{log_schedule, record_planes, InfoPlaneConfig, KernelWidth};
use physlab_core::neural::{ActivationKind, Network};
use physlab_core::numkit::Rng;

use super::{cost, Preset};
use crate::config::{Param, Resolved, Violation};
use crate::error::{HarnessError, Result};
use crate::output::{num, Csv, Sink, WeightSnapshot};

fn params(topology: &'static str, iterations: [&'static str; 3]) -> Vec<Param> {
    vec![
        Param::int("n_c", ["64"; 3], "subcarriers").with_min(2),
        Param::snr(["10"; 3]),
        Param::topology([topology; 3], "layer widths from input to output, an odd number of hidden layers"),
        Param::choice("activation", &["linear", "relu", "softplus"], "linear", "hidden-layer activation"),
        Param::int("n_train", ["200", "1000", "10000"], "training pairs"),
        Param::int("n_probe", ["100", "500", "1000"], "samples behind each Gram matrix").with_min(2),
        Param::int("iterations", iterations, "gradient steps"),
        Param::float("eta", ["0.001"; 3], "learning rate"),
        Param::int("batch", ["100"; 3], "minibatch size"),
        Param::alpha(),
        Param::width("auto"),
        Param::int("pilot_spacing", ["4"; 3], "subcarriers between pilots"),
    ]
}

fn check(c: &Resolved) -> Vec<Violation> {
    let t = c.usizes("topology");
    let io = 2 * c.usize("n_c");
    let mut v = Vec::new();
    if t[0] != io || t[t.len() - 1] != io {
        v.push(Violation::error(Some("topology"), format!("input and output widths must equal 2·n_c = {io}")));
    }
    if (t.len() - 2) % 2 == 0 {
        v.push(Violation::error(
            Some("topology"),
            "needs an odd number of hidden layers so that every layer has a mirror",
        ));
    }
    if c.usize("n_c") % c.usize("pilot_spacing") != 0 {
        v.push(Violation::error(Some("pilot_spacing"), "must divide n_c"));
    }
    v
}

fn estimate(c: &Resolved) -> f64 {
    let t = c.usizes("topology");
    let hidden = t.len() - 2;
    let snaps = log_schedule(c.u64("iterations")).len() as f64;
    let n = c.usize("n_probe");
    let grams: usize = t.iter().map(|w| n * n * w).sum();
    let per_snapshot = (4 * hidden + 2) as f64 * cost::eig(n) + 4e-9 * grams as f64;
    c.float("iterations") * cost::nn_step(&t, c.usize("batch")) + snaps * per_snapshot
}

pub fn deep() -> Preset {
    Preset {
        name: "fig9_ip_deep",
        figure: "Fig. 9",
        summary: "information planes IP-I/II/III of the deep estimator 128-64-32-16-8-16-32-64-128",
        schema: || params("128-64-32-16-8-16-32-64-128", ["50", "1000", "10000"]),
        check,
        cost: estimate,
        run,
    }
}

pub fn slfn() -> Preset {
    Preset {
        name: "fig10_ip_slfn",
        figure: "Fig. 10",
        summary: "information planes IP-I/II/III of the single-hidden-layer estimator 128-128-128",
        schema: || params("128-128-128", ["50", "500", "10000"]),
        check,
        cost: estimate,
        run,
    }
}

fn run(c: &Resolved, seed: u64, sink: &mut Sink) -> Result<()> {
    let model = OfdmChannelModel::standard(c.usize("n_c")).map_err(HarnessError::core("channel model"))?;
    let (snr, sp) = (c.float("snr_db"), c.usize("pilot_spacing"));
    let train = build_dataset(&model, c.usize("n_train"), snr, sp, &mut Rng::derived(seed, "ip-train", 0))
        .map_err(HarnessError::core("training set"))?;
    let probe = build_dataset(&model, c.usize("n_probe"), snr, sp, &mut Rng::derived(seed, "ip-probe", 0))
        .map_err(HarnessError::core("probe set"))?;
    let widths = c.usizes("topology");
    let act: ActivationKind = c.text("activation").parse().expect("schema restricts activation names");
    let mut acts = vec![act; widths.len() - 2];
    acts.push(ActivationKind::Linear);
    let mut net =
        Network::init(&widths, &acts, &mut Rng::derived(seed, "ip-init", 0)).map_err(HarnessError::core("network"))?;
    let cfg = InfoPlaneConfig {
        alpha: c.float("alpha"),
        kernel_width: c.width("kernel_width").map_or(KernelWidth::Auto, KernelWidth::Fixed),
        snapshots: log_schedule(c.u64("iterations")),
        eta: c.float("eta"),
        batch: c.usize("batch"),
        seed,
    };
    let trace = record_planes(&mut net, (&train.inputs(), &train.targets()), (&probe.inputs(), &probe.targets()), &cfg)
        .map_err(HarnessError::core("information planes"))?;
    let mut csv = Csv::new(&["iteration", "layer", "i_tv", "i_tvp", "i_ttp", "mse", "alpha", "kernel_width", "seed"]);
    // raw estimates can dip a hair below zero; reports clip them
    let mi = |x: f64| num(x.max(0.0));
    for r in &trace.records {
        csv.row(&[
            r.iteration.to_string(),
            r.layer.to_string(),
            mi(r.i_tv),
            mi(r.i_tvp),
            mi(r.i_ttp),
            num(r.mse),
            num(cfg.alpha),
            num(r.kernel_width),
            seed.to_string(),
        ]);
    }
    sink.csv("infoplane.csv", csv)?;
    sink.json("weights_final.json", &WeightSnapshot::of(&net))
}
