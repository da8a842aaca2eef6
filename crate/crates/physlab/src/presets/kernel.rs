//! Tangent-kernel concentration preset.

use physlab_core::neural::ActivationKind;
use physlab_core::ntk;
use physlab_core::numkit::{Mat, Rng};

use super::{cost, Preset};
use crate::config::{Param, Resolved, Rule, Violation};
use crate::error::{HarnessError, Result};
use crate::output::{num, Csv, Sink};

pub fn width_sweep() -> Preset {
    Preset {
        name: "ntk_width_sweep",
        figure: "Sec. III-C width claim (no figure)",
        summary: "spectral distance between the initial empirical tangent-kernel Gram and its infinite-width limit versus width",
        schema: || {
            vec![
                Param::int("input_dim", ["8"; 3], "input dimension"),
                Param::int("n_points", ["12"; 3], "inputs, drawn Gaussian and normalized to unit norm").with_min(2),
                Param::int("depth", ["2"; 3], "hidden layers"),
                Param::choice("activation", &["relu", "linear", "softplus"], "relu", "hidden-layer activation"),
                Param::ints("widths", ["50,200", "50,200,800", "50,200,800,3200"], "hidden widths").rule(Rule::Ascending),
                Param::int("seeds", ["3", "10", "50"], "networks per width"),
            ]
        },
        check: |_| Vec::<Violation>::new(),
        cost: |c: &Resolved| {
            let (d, n, h) = (c.usize("input_dim"), c.usize("n_points"), c.usize("depth"));
            let per: f64 = c
                .usizes("widths")
                .into_iter()
                .map(|m| {
                    let mut w = vec![d];
                    w.extend(std::iter::repeat(m).take(h));
                    w.push(1);
                    3.0 * cost::nn_step(&w, n) + 1e-9 * (h * n * n * m) as f64 + 2e-6 * (m * d) as f64 + cost::eig(n)
                })
                .sum();
            c.float("seeds") * per
        },
        run,
    }
}

fn run(c: &Resolved, seed: u64, sink: &mut Sink) -> Result<()> {
    let (d, n, depth) = (c.usize("input_dim"), c.usize("n_points"), c.usize("depth"));
    let kind: ActivationKind = c.text("activation").parse().expect("schema restricts activation names");
    let mut x = Mat::zeros(d, n);
    Rng::derived(seed, "ntk-inputs", 0).fill_normal(x.as_mut_slice());
    let sweep = ntk::width_sweep(&x, depth, kind, &c.usizes("widths"), c.usize("seeds"), seed)
        .map_err(HarnessError::core("width sweep"))?;
    let mut csv = Csv::new(&["width", "depth", "seed", "layer", "distance"]);
    for p in &sweep.points {
        csv.row(&[p.width.to_string(), depth.to_string(), p.seed.to_string(), p.layer.to_string(), num(p.distance)]);
    }
    sink.csv("width_sweep.csv", csv)?;
    let mut summary = Csv::new(&["width", "depth", "mean_distance", "std_distance"]);
    for ((w, m), s) in sweep.widths.iter().zip(&sweep.mean).zip(&sweep.std) {
        summary.row(&[w.to_string(), depth.to_string(), num(*m), num(*s)]);
    }
    sink.csv("summary.csv", summary)?;
    let k = ntk::limit_gram(&ntk::unit_normalize(&x).map_err(HarnessError::core("inputs"))?, depth, kind)
        .map_err(HarnessError::core("limit Gram"))?;
    let mut header = vec!["i".to_string()];
    header.extend((0..n).map(|j| format!("k{j}")));
    let mut lim = Csv::new(&header);
    for i in 0..n {
        let mut row = vec![i.to_string()];
        row.extend(k.row(i).iter().map(|&v| num(v)));
        lim.row(&row);
    }
    sink.csv("limit_gram.csv", lim)
}
