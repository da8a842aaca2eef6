//! Autoencoder link and constellation presets.

use physlab_core::constellation::{optimize, Constellation, GsConfig};
use physlab_core::endtoend::{noise_var_for_snr, AeSystem, ChannelKind, ChannelLayer, TrainConfig, TrainTrace};
use physlab_core::ntk::{fading_drift, DriftTrace};
use physlab_core::numkit::{derive_seed, Rng};

use super::{cost, no_checks, Divergence, Preset};
use crate::config::{Param, Resolved, Rule};
use crate::error::{HarnessError, Result};
use crate::output::{constellation_csv, num, Csv, Sink, WeightSnapshot};

// Encoder and decoder of the default layout have two weight layers each.
const AE_LAYERS: usize = 4;

fn ae_system(m: usize, d: usize, kind: ChannelKind, snr: f64, init_seed: u64) -> Result<AeSystem> {
    let ch = ChannelLayer::new(kind, noise_var_for_snr(snr, m, d)).map_err(HarnessError::core("channel"))?;
    AeSystem::standard_layout(m, d, ch, &mut Rng::derived(init_seed, "ae-init", 0)).map_err(HarnessError::core("autoencoder"))
}

fn trace_csv() -> Csv {
    let mut header: Vec<String> = ["epoch", "loss", "snr_db", "seed"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=AE_LAYERS).map(|h| format!("fro_{h}")));
    Csv::new(&header)
}

fn trace_rows(csv: &mut Csv, t: &TrainTrace) {
    for r in &t.records {
        let mut row = vec![r.epoch.to_string(), num(r.loss), num(t.snr_db), t.seed.to_string()];
        row.extend(r.fro.iter().map(|&f| num(f)));
        csv.row(&row);
    }
}

fn extract(sys: &AeSystem) -> Result<Constellation> {
    sys.extract_constellation().map_err(HarnessError::core("constellation extraction"))
}

fn ae_params(m: [&'static str; 3], epochs: [&'static str; 3]) -> Vec<Param> {
    vec![
        Param::int("M", m, "alphabet size (one-hot input width)").with_min(2).rule(Rule::PowerOfTwo),
        Param::int("d", ["2"; 3], "channel uses per symbol"),
        Param::int("epochs", epochs, "full-batch training epochs"),
        Param::float("eta", ["0.02"; 3], "learning rate"),
    ]
}

pub fn fro_awgn() -> Preset {
    Preset {
        name: "fig4_fro_awgn",
        figure: "Fig. 4",
        summary: "layer Frobenius norms of the AE versus epochs under AWGN at low and high SNR",
        schema: || {
            let mut p = ae_params(["8"; 3], ["2000", "40000", "1000000"]);
            p.push(Param::snrs(["0,25"; 3]));
            p.push(Param::int("record_every", ["50", "200", "1000"], "epochs between trace rows"));
            p
        },
        check: no_checks,
        cost: |c| {
            let per = cost::ae_epoch(c.usize("M"), c.usize("d"));
            per * c.float("epochs") * c.floats("snr_db").len() as f64
        },
        run: run_fro_awgn,
    }
}

fn run_fro_awgn(c: &Resolved, seed: u64, sink: &mut Sink) -> Result<()> {
    let (m, d) = (c.usize("M"), c.usize("d"));
    let cfg = TrainConfig { epochs: c.u64("epochs"), eta: c.float("eta"), seed, record_every: c.u64("record_every") };
    let mut csv = trace_csv();
    let mut div = Divergence::default();
    for snr in c.floats("snr_db") {
        // every SNR starts from the same weights so the curves are comparable
        let mut sys = ae_system(m, d, ChannelKind::Awgn, snr, seed)?;
        let trace = sys.train(&cfg);
        trace_rows(&mut csv, &trace);
        div.note(|| format!("AE at {} dB", num(snr)), trace.diverged_at);
        if trace.diverged() {
            continue;
        }
        let tag = num(snr);
        sink.csv(&format!("constellation_snr{tag}.csv"), constellation_csv(&extract(&sys)?))?;
        sink.json(&format!("encoder_snr{tag}.json"), &WeightSnapshot::of(sys.encoder()))?;
        sink.json(&format!("decoder_snr{tag}.json"), &WeightSnapshot::of(sys.decoder()))?;
    }
    sink.csv("fro_trace.csv", csv)?;
    div.finish()
}

fn constellation_params(d: &'static str) -> Vec<Param> {
    vec![
        Param::ints("M", ["8,16"; 3], "alphabet sizes").with_min(2).rule(Rule::PowerOfTwo),
        Param::int("d", [d; 3], "dimensions"),
        Param::snr(["25"; 3]),
        Param::int("epochs", ["2000", "100000", "1000000"], "AE training epochs"),
        Param::float("eta", ["0.02"; 3], "AE learning rate"),
        Param::int("ae_seeds", ["1", "5", "5"], "AE trainings per M; the best is kept"),
        Param::int("gs_steps", ["1000"; 3], "gradient-search steps per restart"),
        Param::int("restarts", ["10", "50", "50"], "gradient-search restarts"),
        Param::float("gs_step", ["2e-4"; 3], "gradient-search step size"),
        Param::float("n0", ["0.005"; 3], "noise level of the error-probability proxy"),
    ]
}

fn constellation_cost(c: &Resolved) -> f64 {
    let d = c.usize("d");
    c.usizes("M")
        .into_iter()
        .map(|m| {
            cost::gs_step(m, d) * c.float("gs_steps") * c.float("restarts")
                + cost::ae_epoch(m, d) * c.float("epochs") * c.float("ae_seeds")
        })
        .sum()
}

pub fn constellations_2d() -> Preset {
    Preset {
        name: "fig5_constellations",
        figure: "Fig. 5",
        summary: "gradient-search optimum versus AE-learned constellations, d = 2, M = 8 and 16",
        schema: || constellation_params("2"),
        check: no_checks,
        cost: constellation_cost,
        run: run_constellations,
    }
}

pub fn constellations_3d() -> Preset {
    Preset {
        name: "fig6_constellations_3d",
        figure: "Fig. 6",
        summary: "gradient-search optimum versus AE-learned constellations, d = 3, M = 8 and 16",
        schema: || constellation_params("3"),
        check: no_checks,
        cost: constellation_cost,
        run: run_constellations,
    }
}

fn run_constellations(c: &Resolved, seed: u64, sink: &mut Sink) -> Result<()> {
    let d = c.usize("d");
    let snr = c.float("snr_db");
    let mut summary = Csv::new(&["M", "d", "method", "seed", "min_distance", "mean_norm", "ratio_to_gs"]);
    let mut div = Divergence::default();
    for m in c.usizes("M") {
        let gs_cfg = GsConfig {
            n0: c.float("n0"),
            step: c.float("gs_step"),
            max_steps: c.usize("gs_steps"),
            restarts: c.usize("restarts"),
            seed: derive_seed(seed, "gs", m as u64),
            p_av: None,
        };
        let gs = optimize(m, d, &gs_cfg).map_err(HarnessError::core("gradient search"))?;
        let champion = gs.best.min_distance();
        sink.csv(&format!("gs_M{m}.csv"), constellation_csv(&gs.best))?;
        summary.row(&[
            m.to_string(),
            d.to_string(),
            "gs".into(),
            gs_cfg.seed.to_string(),
            num(champion),
            num(gs.best.mean_norm()),
            "1".into(),
        ]);

        let mut best: Option<Constellation> = None;
        for s in 0..c.u64("ae_seeds") {
            let ae_seed = derive_seed(seed, "ae", s);
            let mut sys = ae_system(m, d, ChannelKind::Awgn, snr, ae_seed)?;
            let epochs = c.u64("epochs");
            let trace = sys.train(&TrainConfig { epochs, eta: c.float("eta"), seed: ae_seed, record_every: epochs });
            div.note(|| format!("AE M={m} seed {ae_seed}"), trace.diverged_at);
            if trace.diverged() {
                summary.row(&[
                    m.to_string(),
                    d.to_string(),
                    "ae".into(),
                    ae_seed.to_string(),
                    "nan".into(),
                    "nan".into(),
                    "nan".into(),
                ]);
                continue;
            }
            let con = extract(&sys)?;
            let dm = con.min_distance();
            summary.row(&[
                m.to_string(),
                d.to_string(),
                "ae".into(),
                ae_seed.to_string(),
                num(dm),
                num(con.mean_norm()),
                num(dm / champion),
            ]);
            if best.as_ref().map_or(true, |b| dm > b.min_distance()) {
                best = Some(con);
            }
        }
        if let Some(b) = best {
            sink.csv(&format!("ae_M{m}.csv"), constellation_csv(&b))?;
        }
    }
    sink.csv("summary.csv", summary)?;
    div.finish()
}

pub fn rayleigh_ae() -> Preset {
    Preset {
        name: "fig7_rayleigh_ae",
        figure: "Fig. 7",
        summary: "AE under Rayleigh flat fading: transmitter weight drift against AWGN and the collapsed constellation",
        schema: || {
            let mut p = ae_params(["8"; 3], ["2000", "10000", "1000000"]);
            p.push(Param::snr(["25"; 3]));
            p.push(Param::int("seeds", ["2", "5", "5"], "matched Rayleigh/AWGN pairs"));
            p.push(Param::int("record_every", ["50", "100", "1000"], "epochs between drift rows"));
            p
        },
        check: no_checks,
        cost: |c| 2.0 * cost::ae_epoch(c.usize("M"), c.usize("d")) * c.float("epochs") * c.float("seeds"),
        run: run_rayleigh,
    }
}

fn drift_rows(csv: &mut Csv, t: &DriftTrace) {
    for r in &t.records {
        csv.row(&[
            r.iteration.to_string(),
            r.layer.to_string(),
            num(r.drift),
            t.channel.name().to_string(),
            t.seed.to_string(),
        ]);
    }
}

fn run_rayleigh(c: &Resolved, seed: u64, sink: &mut Sink) -> Result<()> {
    let (m, d) = (c.usize("M"), c.usize("d"));
    let snr = c.float("snr_db");
    let mut drift = Csv::new(&["iteration", "layer", "drift", "channel_kind", "seed"]);
    let (mut tr_ray, mut tr_awgn) = (trace_csv(), trace_csv());
    let mut summary = Csv::new(&[
        "seed",
        "channel_kind",
        "terminal_transmitter_drift",
        "min_distance",
        "mean_norm",
        "overlap_ratio",
        "diverged_at",
    ]);
    let mut div = Divergence::default();
    for s in 0..c.u64("seeds") {
        let run_seed = derive_seed(seed, "fading", s);
        let sys = ae_system(m, d, ChannelKind::RayleighFlat, snr, run_seed)?;
        let cfg = TrainConfig {
            epochs: c.u64("epochs"),
            eta: c.float("eta"),
            seed: run_seed,
            record_every: c.u64("record_every"),
        };
        let (ray, awgn) = fading_drift(&sys, &cfg).map_err(HarnessError::core("fading drift"))?;
        for (run, traces) in [(&ray, &mut tr_ray), (&awgn, &mut tr_awgn)] {
            let kind = run.drift.channel.name();
            drift_rows(&mut drift, &run.drift);
            trace_rows(traces, &run.trace);
            div.note(|| format!("AE over {kind}, seed {run_seed}"), run.trace.diverged_at);
            let (dm, norm) = if run.trace.diverged() {
                (f64::NAN, f64::NAN)
            } else {
                let con = extract(&run.system)?;
                sink.csv(&format!("constellation_{kind}_seed{s}.csv"), constellation_csv(&con))?;
                (con.min_distance(), con.mean_norm())
            };
            let diverged = run.trace.diverged_at.map(|e| e.to_string()).unwrap_or_default();
            summary.row(&[
                run_seed.to_string(),
                kind.to_string(),
                num(run.drift.terminal_transmitter_drift()),
                num(dm),
                num(norm),
                num(dm / norm),
                diverged,
            ]);
        }
    }
    sink.csv("drift.csv", drift)?;
    sink.csv("fro_trace_rayleigh.csv", tr_ray)?;
    sink.csv("fro_trace_awgn.csv", tr_awgn)?;
    sink.csv("summary.csv", summary)?;
    div.finish()
}
