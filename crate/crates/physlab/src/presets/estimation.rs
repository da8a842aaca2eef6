//! OFDM channel-estimation presets.

use physlab_core::chanest::{
    build_dataset, classical_errors, depth_sweep, mean_and_std_err, noise_var_for_snr, train_nn_estimator,
    DepthSweepConfig, EstimationDataset, LmmseFilter, NnConfig, OfdmChannelModel,
};
use physlab_core::infoflow::{gram_columns, joint_entropy, renyi_entropy, KernelWidth};
use physlab_core::neural::ActivationKind;
use physlab_core::numkit::{derive_seed, Rng};

use super::{cost, Divergence, Preset};
use crate::config::{Param, Resolved, Rule, Violation};
use crate::error::{HarnessError, Result};
use crate::output::{num, Csv, Sink};

const ACTIVATIONS: &[&str] = &["linear", "relu", "softplus"];

const SWEEP_HEADER: [&str; 8] = ["estimator", "snr_db", "n_train", "depth", "width", "mse", "n_test", "seed"];

fn spacing_check(c: &Resolved) -> Vec<Violation> {
    let (n_c, sp) = (c.usize("n_c"), c.usize("pilot_spacing"));
    let mut v = Vec::new();
    if n_c % sp != 0 {
        v.push(Violation::error(Some("pilot_spacing"), format!("must divide n_c = {n_c}, got {sp}")));
    }
    v
}

fn model(c: &Resolved) -> Result<OfdmChannelModel> {
    OfdmChannelModel::standard(c.usize("n_c")).map_err(HarnessError::core("channel model"))
}

fn activation(c: &Resolved) -> ActivationKind {
    c.text("activation").parse().expect("schema restricts activation names")
}

fn nn_params() -> Vec<Param> {
    vec![
        Param::int("n_c", ["64"; 3], "subcarriers").with_min(2),
        Param::int("width", ["128"; 3], "hidden-layer width"),
        Param::float("eta", ["0.001"; 3], "learning rate"),
        Param::int("batch", ["100"; 3], "minibatch size"),
        Param::int("pilot_spacing", ["1"; 3], "subcarriers between pilots; 1 observes every subcarrier"),
        Param::choice("activation", ACTIVATIONS, "linear", "hidden-layer activation"),
    ]
}

fn epochs_for_steps(steps: u64, n: usize, batch: usize) -> u64 {
    let per_epoch = n.div_ceil(batch) as u64;
    steps.div_ceil(per_epoch).max(1)
}

fn nn_widths(c: &Resolved, depth: usize) -> Vec<usize> {
    let io = 2 * c.usize("n_c");
    let mut w = vec![io];
    w.extend(std::iter::repeat(c.usize("width")).take(depth));
    w.push(io);
    w
}

/// Classical rows for one test set. LMMSE assumes every subcarrier is
/// observed, so it is only reported without pilot interpolation.
fn classical_rows(csv: &mut Csv, model: &OfdmChannelModel, test: &EstimationDataset, seed: u64) -> Result<()> {
    let (ls, lm) = classical_errors(model, test).map_err(HarnessError::core("classical estimators"))?;
    let snr = num(test.snr_db);
    let n_test = test.len().to_string();
    let mut row = |name: &str, mse: f64| csv.row(&[name, &snr, "0", "0", "0", &num(mse), &n_test, &seed.to_string()]);
    row("ls", mean_and_std_err(&ls).0);
    if test.pilot_spacing == 1 {
        row("lmmse", mean_and_std_err(&lm).0);
        let f = LmmseFilter::new(model, noise_var_for_snr(test.snr_db)).map_err(HarnessError::core("LMMSE filter"))?;
        row("lmmse_analytic", f.analytic_mse());
    }
    Ok(())
}

fn dataset_csv(ds: &EstimationDataset) -> Csv {
    let mut csv = Csv::new(&["sample", "subcarrier", "v_re", "v_im", "z_re", "z_im"]);
    for j in 0..ds.len() {
        for k in 0..ds.n_c() {
            let (v, z) = (ds.v[(k, j)], ds.z[(k, j)]);
            csv.row(&[j.to_string(), k.to_string(), num(v.re), num(v.im), num(z.re), num(z.im)]);
        }
    }
    csv
}

pub fn mse_samples() -> Preset {
    Preset {
        name: "fig7m_mse_samples",
        figure: "Fig. 7 (estimation panel)",
        summary: "MSE versus SNR of LS, LMMSE and a one-hidden-layer estimator for several training-set sizes",
        schema: || {
            let mut p = nn_params();
            p.extend([
                Param::snrs(["10", "0,5,10,15,20,25", "0,5,10,15,20,25"]),
                Param::ints("n_train", ["100", "100,1000,10000", "100,1000,10000"], "training-set sizes"),
                Param::int("n_test", ["200", "2000", "100000"], "test-set size"),
                Param::int(
                    "steps",
                    ["200", "4000", "100000"],
                    "gradient steps per network, rounded up to whole epochs",
                ),
                Param::int("depth", ["1"; 3], "hidden layers"),
                Param::boolean("write_dataset", "false", "also write each test set as a dataset CSV"),
            ]);
            p
        },
        check: spacing_check,
        cost: |c| {
            let per = cost::nn_step(&nn_widths(c, c.usize("depth")), c.usize("batch"));
            let eval =
                c.float("n_test") * (cost::nn_step(&nn_widths(c, c.usize("depth")), 1) + 2e-8 * c.float("n_c").powi(2));
            let nets = c.usizes("n_train").len() as f64;
            c.floats("snr_db").len() as f64 * (nets * (per * c.float("steps") + eval) + eval)
        },
        run: run_mse_samples,
    }
}

fn run_mse_samples(c: &Resolved, seed: u64, sink: &mut Sink) -> Result<()> {
    let model = model(c)?;
    let sp = c.usize("pilot_spacing");
    let (batch, depth, width) = (c.usize("batch"), c.usize("depth"), c.usize("width"));
    let mut csv = Csv::new(&SWEEP_HEADER);
    let mut div = Divergence::default();
    for (k, snr) in c.floats("snr_db").into_iter().enumerate() {
        let test = build_dataset(&model, c.usize("n_test"), snr, sp, &mut Rng::derived(seed, "test", k as u64))
            .map_err(HarnessError::core("test set"))?;
        if c.flag("write_dataset") {
            sink.csv(&format!("test_snr{}.csv", num(snr)), dataset_csv(&test))?;
        }
        classical_rows(&mut csv, &model, &test, seed)?;
        for (j, n) in c.usizes("n_train").into_iter().enumerate() {
            let idx = ((k as u64) << 16) | j as u64;
            let train = build_dataset(&model, n, snr, sp, &mut Rng::derived(seed, "train", idx))
                .map_err(HarnessError::core("training set"))?;
            let nn = NnConfig {
                hidden_layers: depth,
                width,
                activation: activation(c),
                epochs: epochs_for_steps(c.u64("steps"), n, batch),
                eta: c.float("eta"),
                batch,
                seed: derive_seed(seed, "nn", idx),
            };
            let est = train_nn_estimator(&train, &nn).map_err(HarnessError::core("estimator training"))?;
            div.note(|| format!("estimator n_train={n} at {} dB", num(snr)), est.diverged_at);
            let mse = if est.diverged_at.is_some() {
                f64::NAN
            } else {
                est.mse(&test).map_err(HarnessError::core("evaluation"))?
            };
            csv.row(&[
                "nn".into(),
                num(snr),
                n.to_string(),
                depth.to_string(),
                width.to_string(),
                num(mse),
                test.len().to_string(),
                nn.seed.to_string(),
            ]);
        }
    }
    sink.csv("sweep.csv", csv)?;
    div.finish()
}

pub fn depth() -> Preset {
    Preset {
        name: "fig8_depth",
        figure: "Fig. 8",
        summary: "test MSE of estimators with 1, 3 and 5 hidden layers versus SNR at a fixed small training set",
        schema: || {
            let mut p = nn_params();
            p.extend([
                Param::snrs(["10", "0,10,20", "0,5,10,15,20,25"]),
                Param::int("n_train", ["100"; 3], "training-set size"),
                Param::int("n_test", ["200", "2000", "100000"], "test-set size"),
                Param::ints("depths", ["1,3,5"; 3], "hidden-layer counts").rule(Rule::Ascending),
                Param::int("trials", ["2", "10", "10"], "training sets per SNR"),
                Param::int("epochs", ["100", "4000", "1000000"], "training epochs"),
            ]);
            p
        },
        check: spacing_check,
        cost: |c| {
            let steps = c.float("epochs") * c.usize("n_train").div_ceil(c.usize("batch")) as f64;
            let per_trial: f64 = c
                .usizes("depths")
                .into_iter()
                .map(|h| {
                    let w = nn_widths(c, h);
                    steps * cost::nn_step(&w, c.usize("batch")) + c.float("n_test") * cost::nn_step(&w, 1)
                })
                .sum();
            c.floats("snr_db").len() as f64 * c.float("trials") * per_trial
        },
        run: run_depth,
    }
}

fn run_depth(c: &Resolved, seed: u64, sink: &mut Sink) -> Result<()> {
    let model = model(c)?;
    let mut csv = Csv::new(&SWEEP_HEADER);
    let mut order = Csv::new(&["snr_db", "trials", "ordered_trials"]);
    let (width, n_train) = (c.usize("width"), c.usize("n_train"));
    for (k, snr) in c.floats("snr_db").into_iter().enumerate() {
        let nn = NnConfig {
            hidden_layers: 1,
            width,
            activation: activation(c),
            epochs: c.u64("epochs"),
            eta: c.float("eta"),
            batch: c.usize("batch"),
            seed: derive_seed(seed, "snr", k as u64),
        };
        let cfg = DepthSweepConfig {
            n_train,
            n_test: c.usize("n_test"),
            depths: c.usizes("depths"),
            trials: c.usize("trials"),
            snr_db: snr,
            pilot_spacing: c.usize("pilot_spacing"),
            nn,
        };
        let sweep = depth_sweep(&model, &cfg).map_err(HarnessError::core(format!("depth sweep at {} dB", num(snr))))?;
        // the sweep draws its shared test set from this stream
        let test = build_dataset(&model, cfg.n_test, snr, cfg.pilot_spacing, &mut Rng::derived(nn.seed, "test", 0))
            .map_err(HarnessError::core("test set"))?;
        classical_rows(&mut csv, &model, &test, nn.seed)?;
        let s = num(snr);
        for (t, row) in sweep.per_trial.iter().enumerate() {
            let trial_seed = derive_seed(nn.seed, "trial", t as u64);
            for (&h, &mse) in sweep.depths.iter().zip(row) {
                csv.row(&[
                    "nn".into(),
                    s.clone(),
                    n_train.to_string(),
                    h.to_string(),
                    width.to_string(),
                    num(mse),
                    cfg.n_test.to_string(),
                    trial_seed.to_string(),
                ]);
            }
        }
        for (&h, &mse) in sweep.depths.iter().zip(&sweep.mean) {
            csv.row(&[
                "nn_mean".into(),
                s.clone(),
                n_train.to_string(),
                h.to_string(),
                width.to_string(),
                num(mse),
                cfg.n_test.to_string(),
                nn.seed.to_string(),
            ]);
        }
        order.row(&[s, cfg.trials.to_string(), sweep.ordered_trials().to_string()]);
    }
    sink.csv("sweep.csv", csv)?;
    sink.csv("ordering.csv", order)?;
    Ok(())
}

pub fn entropy_vs_n() -> Preset {
    Preset {
        name: "fig_entropy_vs_n",
        figure: "Fig. 11",
        summary: "conditional entropy S_α(z | LS estimate) versus training-set size n",
        schema: || {
            vec![
                Param::int("n_c", ["64"; 3], "subcarriers").with_min(2),
                Param::snr(["10"; 3]),
                Param::ints("n", ["100,200,400", "100,500,1000,5000", "100,500,1000,5000"], "sample counts")
                    .with_min(2)
                    .rule(Rule::Ascending),
                Param::int("replicates", ["1", "5", "20"], "independent draws per n"),
                Param::alpha(),
                Param::width("auto"),
                Param::int("pilot_spacing", ["4"; 3], "subcarriers between pilots"),
            ]
        },
        check: spacing_check,
        cost: |c| {
            let per: f64 =
                c.usizes("n").into_iter().map(|n| 2.0 * cost::eig(n) + 2e-8 * (n * n * c.usize("n_c")) as f64).sum();
            c.float("replicates") * per
        },
        run: run_entropy,
    }
}

fn run_entropy(c: &Resolved, seed: u64, sink: &mut Sink) -> Result<()> {
    let model = model(c)?;
    let (snr, alpha, sp) = (c.float("snr_db"), c.float("alpha"), c.usize("pilot_spacing"));
    let width = c.width("kernel_width").map_or(KernelWidth::Auto, KernelWidth::Fixed);
    let mut csv = Csv::new(&[
        "n",
        "replicate",
        "seed",
        "snr_db",
        "alpha",
        "kernel_width_z",
        "kernel_width_v",
        "s_joint",
        "s_v",
        "s_cond",
    ]);
    for r in 0..c.u64("replicates") {
        for (k, n) in c.usizes("n").into_iter().enumerate() {
            let ds = build_dataset(&model, n, snr, sp, &mut Rng::derived(seed, "entropy", (r << 16) | k as u64))
                .map_err(HarnessError::core("dataset"))?;
            let gz = gram_columns(&ds.targets(), width).map_err(HarnessError::core("Gram of z"))?;
            let gv = gram_columns(&ds.inputs(), width).map_err(HarnessError::core("Gram of the LS estimate"))?;
            let joint = joint_entropy(&gz, &gv, alpha).map_err(HarnessError::core("joint entropy"))?;
            let sv = renyi_entropy(&gv, alpha).map_err(HarnessError::core("entropy"))?;
            csv.row(&[
                n.to_string(),
                r.to_string(),
                seed.to_string(),
                num(snr),
                num(alpha),
                num(gz.kernel_width()),
                num(gv.kernel_width()),
                num(joint),
                num(sv),
                num(joint - sv),
            ]);
        }
    }
    sink.csv("entropy.csv", csv)
}
