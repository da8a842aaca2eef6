//! Feedforward networks without biases, Gaussian-initialized weights and the
//! √(c_σ/m) forward scaling that keeps activation norms stable with depth.
//!
//! Batches are stored one sample per column, so a layer is `W · X`.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::numkit::quad::gauss_hermite;
use crate::numkit::{Mat, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Softplus,
    Relu,
    Linear,
    Softmax,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] =
        [ActivationKind::Softplus, ActivationKind::Relu, ActivationKind::Linear, ActivationKind::Softmax];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Softplus => "softplus",
            ActivationKind::Relu => "relu",
            ActivationKind::Linear => "linear",
            ActivationKind::Softmax => "softmax",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ActivationKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown activation '{s}' (softplus, relu, linear, softmax)")))
    }
}

/// Overflow-safe softplus: max(z, 0) + ln(1 + e^{−|z|}).
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Logistic function, the derivative of softplus.
#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// An activation tag with its normalizing constant c_σ = 1/E[σ(X)²], X ~ N(0,1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Activation {
    kind: ActivationKind,
    c_sigma: f64,
}

impl Activation {
    pub fn new(kind: ActivationKind) -> Self {
        let c_sigma = match kind {
            ActivationKind::Relu => 2.0,
            ActivationKind::Linear | ActivationKind::Softmax => 1.0,
            ActivationKind::Softplus => {
                let rule = gauss_hermite(96);
                let m2: f64 = rule.nodes.iter().zip(&rule.weights).map(|(&x, &w)| w * softplus(x).powi(2)).sum();
                1.0 / m2
            }
        };
        Activation { kind, c_sigma }
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn c_sigma(&self) -> f64 {
        self.c_sigma
    }

    /// Elementwise σ; softmax is handled per column by the network.
    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match self.kind {
            ActivationKind::Softplus => softplus(z),
            ActivationKind::Relu => z.max(0.0),
            ActivationKind::Linear => z,
            ActivationKind::Softmax => panic!("softmax is not elementwise"),
        }
    }

    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match self.kind {
            ActivationKind::Softplus => logistic(z),
            ActivationKind::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Linear => 1.0,
            ActivationKind::Softmax => panic!("softmax is not elementwise"),
        }
    }
}

/// Column-wise softmax with the max subtracted for stability.
pub fn softmax_columns(z: &Mat) -> Mat {
    let (r, c) = z.shape();
    let mut out = Mat::zeros(r, c);
    for j in 0..c {
        let mx = (0..r).fold(f64::NEG_INFINITY, |m, i| m.max(z[(i, j)]));
        let mut s = 0.0;
        for i in 0..r {
            let e = (z[(i, j)] - mx).exp();
            out[(i, j)] = e;
            s += e;
        }
        for i in 0..r {
            out[(i, j)] /= s;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    weight: Mat,
    activation: Activation,
    scale: f64,
}

impl Layer {
    pub fn weight(&self) -> &Mat {
        &self.weight
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// The forward multiplier √(c_σ/m), or 1 for softmax and unscaled heads.
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// x^(h) = √(c_σ/m_h)·σ(W^(h) x^(h−1)) with m_h the width of layer h.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    widths: Vec<usize>,
    layers: Vec<Layer>,
    output_scaled: bool,
}

/// Every intermediate of a batched forward pass. `post[0]` is the input and
/// `post[h]` the output of layer h; `pre[h-1]` is W^(h)·post[h-1].
#[derive(Clone, Debug)]
pub struct Trace {
    pub pre: Vec<Mat>,
    pub post: Vec<Mat>,
}

impl Trace {
    pub fn output(&self) -> &Mat {
        self.post.last().expect("trace holds the input")
    }
}

#[derive(Clone, Debug)]
pub struct Gradients {
    /// ∂L/∂W^(h) in layer order.
    pub weights: Vec<Mat>,
    /// ∂L/∂(input batch), needed to continue backpropagation upstream.
    pub input: Mat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    /// Mean over the batch of −ln p_target.
    CrossEntropy,
    /// ½ Σ over the batch of ‖ŷ − y‖².
    Square,
}

#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    Classes(&'a [usize]),
    Values(&'a Mat),
}

fn layer_scale(kind: ActivationKind, c_sigma: f64, width: usize) -> f64 {
    match kind {
        ActivationKind::Softmax => 1.0,
        _ => (c_sigma / width as f64).sqrt(),
    }
}

impl Network {
    /// Widths (w_0, …, w_H) and one activation per layer; weights ~ N(0,1),
    /// drawn layer by layer in row-major order.
    pub fn init(widths: &[usize], activations: &[ActivationKind], rng: &mut Rng) -> Result<Self> {
        check_topology(widths, activations)?;
        let weights = (1..widths.len())
            .map(|h| {
                let mut w = Mat::zeros(widths[h], widths[h - 1]);
                rng.fill_normal(w.as_mut_slice());
                w
            })
            .collect();
        Network::from_parts(weights, activations, true)
    }

    /// Assembles a network from explicit weights. With `output_scaled` false
    /// the last layer is applied without the √(c_σ/m) factor.
    pub fn from_parts(weights: Vec<Mat>, activations: &[ActivationKind], output_scaled: bool) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain("a network needs at least one layer".into()));
        }
        let mut widths = Vec::with_capacity(weights.len() + 1);
        widths.push(weights[0].cols());
        for w in &weights {
            widths.push(w.rows());
        }
        check_topology(&widths, activations)?;
        for (h, w) in weights.iter().enumerate() {
            if w.cols() != widths[h] {
                return Err(Error::Shape {
                    op: "Network::from_parts",
                    detail: format!("layer {} is {:?} but receives width {}", h + 1, w.shape(), widths[h]),
                });
            }
        }
        let last = weights.len() - 1;
        let layers = weights
            .into_iter()
            .zip(activations)
            .enumerate()
            .map(|(h, (weight, &kind))| {
                let activation = Activation::new(kind);
                let scale = if h == last && !output_scaled {
                    1.0
                } else {
                    layer_scale(kind, activation.c_sigma(), weight.rows())
                };
                Layer { weight, activation, scale }
            })
            .collect();
        Ok(Network { widths, layers, output_scaled })
    }

    /// Drops the forward scaling of the last layer (a plain linear read-out).
    pub fn with_unscaled_output(self) -> Self {
        let weights = self.layers.iter().map(|l| l.weight.clone()).collect();
        Network::from_parts(weights, &self.activations(), false).expect("same topology")
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn weight(&self, h: usize) -> &Mat {
        &self.layers[h].weight
    }

    pub fn activations(&self) -> Vec<ActivationKind> {
        self.layers.iter().map(|l| l.activation.kind).collect()
    }

    pub fn output_scaled(&self) -> bool {
        self.output_scaled
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Per-layer activations for one input vector, input first.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let t = self.forward_batch(&Mat::column(x))?;
        Ok(t.post.into_iter().map(|m| m.into_vec()).collect())
    }

    pub fn forward_batch(&self, x: &Mat) -> Result<Trace> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len() + 1);
        post.push(x.clone());
        for (h, layer) in self.layers.iter().enumerate() {
            let z = layer.weight.matmul(&post[h]);
            let y = layer.activate(&z);
            if !y.is_finite() {
                return Err(Error::Overflow { layer: h + 1 });
            }
            pre.push(z);
            post.push(y);
        }
        Ok(Trace { pre, post })
    }

    /// Output only, without keeping intermediates.
    pub fn predict(&self, x: &Mat) -> Result<Mat> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for (h, layer) in self.layers.iter().enumerate() {
            cur = layer.activate(&layer.weight.matmul(&cur));
            if !cur.is_finite() {
                return Err(Error::Overflow { layer: h + 1 });
            }
        }
        Ok(cur)
    }

    fn check_input(&self, x: &Mat) -> Result<()> {
        if x.rows() != self.widths[0] {
            return Err(Error::Shape {
                op: "forward",
                detail: format!("input has {} rows, network expects {}", x.rows(), self.widths[0]),
            });
        }
        Ok(())
    }

    /// Gradients of `loss` for a trace produced by [`Network::forward_batch`].
    pub fn backward(&self, trace: &Trace, loss: Loss, target: Target<'_>) -> Result<Gradients> {
        self.check_trace(trace)?;
        let out = trace.output();
        let last = self.layers.len() - 1;
        let softmax_out = self.layers[last].activation.kind == ActivationKind::Softmax;
        match (loss, target) {
            (Loss::CrossEntropy, Target::Classes(t)) if softmax_out => {
                check_classes(out, t)?;
                // softmax + cross-entropy: ∂L/∂z = (p − onehot)/B
                let b = out.cols() as f64;
                let mut delta = out.clone();
                for (j, &c) in t.iter().enumerate() {
                    delta[(c, j)] -= 1.0;
                }
                delta.scale_in_place(1.0 / b);
                self.backward_from_pre(trace, delta)
            }
            _ => {
                let g = loss_output_gradient(out, loss, target)?;
                self.backward_from_output(trace, &g)
            }
        }
    }

    /// Backpropagates a given ∂L/∂(network output).
    pub fn backward_from_output(&self, trace: &Trace, out_grad: &Mat) -> Result<Gradients> {
        self.check_trace(trace)?;
        if out_grad.shape() != trace.output().shape() {
            return Err(Error::Shape {
                op: "backward",
                detail: format!("output gradient {:?} vs output {:?}", out_grad.shape(), trace.output().shape()),
            });
        }
        let last = self.layers.len() - 1;
        let delta = self.layers[last].pre_delta(&trace.pre[last], &trace.post[last + 1], out_grad);
        self.backward_from_pre(trace, delta)
    }

    /// ∂L/∂(pre-activation) of every layer, one column per sample, for a
    /// given ∂L/∂(output). Column j only depends on sample j.
    pub fn deltas(&self, trace: &Trace, out_grad: &Mat) -> Result<Vec<Mat>> {
        self.check_trace(trace)?;
        if out_grad.shape() != trace.output().shape() {
            return Err(Error::Shape {
                op: "deltas",
                detail: format!("output gradient {:?} vs output {:?}", out_grad.shape(), trace.output().shape()),
            });
        }
        let n = self.layers.len();
        let mut out = Vec::with_capacity(n);
        out.push(self.layers[n - 1].pre_delta(&trace.pre[n - 1], &trace.post[n], out_grad));
        for h in (0..n - 1).rev() {
            let up = self.layers[h + 1].weight.t_matmul(out.last().unwrap());
            out.push(self.layers[h].pre_delta(&trace.pre[h], &trace.post[h + 1], &up));
        }
        out.reverse();
        Ok(out)
    }

    fn backward_from_pre(&self, trace: &Trace, mut delta: Mat) -> Result<Gradients> {
        let n = self.layers.len();
        let mut weights = Vec::with_capacity(n);
        let mut h = n;
        loop {
            h -= 1;
            let layer = &self.layers[h];
            weights.push(delta.matmul_t(&trace.post[h]));
            let up = layer.weight.t_matmul(&delta);
            if h == 0 {
                weights.reverse();
                return Ok(Gradients { weights, input: up });
            }
            delta = self.layers[h - 1].pre_delta(&trace.pre[h - 1], &trace.post[h], &up);
        }
    }

    fn check_trace(&self, trace: &Trace) -> Result<()> {
        let ok = trace.pre.len() == self.layers.len()
            && trace.post.len() == self.layers.len() + 1
            && trace.pre.iter().zip(&self.layers).all(|(z, l)| z.rows() == l.weight.rows())
            && trace.post[0].rows() == self.widths[0];
        if !ok {
            return Err(Error::Shape { op: "backward", detail: "trace does not match this network".into() });
        }
        Ok(())
    }

    /// W^(h) ← W^(h) − η·∂L/∂W^(h) for every layer.
    pub fn sgd_step(&mut self, grads: &Gradients, eta: f64) {
        assert_eq!(grads.weights.len(), self.layers.len(), "gradient count");
        if eta == 0.0 {
            return;
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.weights) {
            layer.weight.axpy_in_place(-eta, g);
        }
    }

    pub fn frobenius_norms(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.weight.frobenius_norm()).collect()
    }
}

impl Layer {
    fn activate(&self, z: &Mat) -> Mat {
        match self.activation.kind {
            ActivationKind::Softmax => softmax_columns(z),
            ActivationKind::Linear => z.scale(self.scale),
            _ => {
                let (a, s) = (self.activation, self.scale);
                z.map(|x| s * a.apply(x))
            }
        }
    }

    /// ∂L/∂(pre-activation) from ∂L/∂(post-activation).
    fn pre_delta(&self, z: &Mat, y: &Mat, g: &Mat) -> Mat {
        match self.activation.kind {
            ActivationKind::Softmax => {
                let (r, c) = y.shape();
                let mut d = Mat::zeros(r, c);
                for j in 0..c {
                    let s: f64 = (0..r).map(|i| y[(i, j)] * g[(i, j)]).sum();
                    for i in 0..r {
                        d[(i, j)] = y[(i, j)] * (g[(i, j)] - s);
                    }
                }
                d
            }
            ActivationKind::Linear => g.scale(self.scale),
            _ => {
                let (a, s) = (self.activation, self.scale);
                let mut d = g.clone();
                for (di, &zi) in d.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    *di *= s * a.derivative(zi);
                }
                d
            }
        }
    }
}

fn check_topology(widths: &[usize], activations: &[ActivationKind]) -> Result<()> {
    if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
        return Err(Error::Domain(format!("widths {widths:?} need at least two positive entries")));
    }
    if activations.len() != widths.len() - 1 {
        return Err(Error::Domain(format!(
            "{} layers need {} activations, got {}",
            widths.len() - 1,
            widths.len() - 1,
            activations.len()
        )));
    }
    if let Some(h) = activations[..activations.len() - 1].iter().position(|&k| k == ActivationKind::Softmax) {
        return Err(Error::Domain(format!("softmax is only allowed on the output layer, found at layer {}", h + 1)));
    }
    Ok(())
}

fn check_classes(out: &Mat, t: &[usize]) -> Result<()> {
    if t.len() != out.cols() {
        return Err(Error::Shape { op: "loss", detail: format!("{} targets for {} samples", t.len(), out.cols()) });
    }
    if let Some(&c) = t.iter().find(|&&c| c >= out.rows()) {
        return Err(Error::Domain(format!("class {c} out of range for {} outputs", out.rows())));
    }
    Ok(())
}

fn check_probabilities(out: &Mat) -> Result<()> {
    for j in 0..out.cols() {
        let mut s = 0.0;
        for i in 0..out.rows() {
            let p = out[(i, j)];
            if !(p >= 0.0) {
                return Err(Error::Domain(format!("cross-entropy needs probabilities; sample {j} has {p}")));
            }
            s += p;
        }
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("cross-entropy needs probabilities; sample {j} sums to {s}")));
        }
    }
    Ok(())
}

/// Loss of a batch of network outputs.
pub fn loss_value(out: &Mat, loss: Loss, target: Target<'_>) -> Result<f64> {
    match (loss, target) {
        (Loss::CrossEntropy, Target::Classes(t)) => {
            check_classes(out, t)?;
            check_probabilities(out)?;
            let s: f64 = t.iter().enumerate().map(|(j, &c)| -out[(c, j)].ln()).sum();
            Ok(s / out.cols() as f64)
        }
        (Loss::Square, Target::Values(y)) => {
            check_values(out, y)?;
            Ok(0.5 * out.as_slice().iter().zip(y.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        }
        (Loss::Square, Target::Classes(t)) => {
            check_classes(out, t)?;
            loss_value(out, loss, Target::Values(&one_hot(t, out.rows())))
        }
        (Loss::CrossEntropy, Target::Values(_)) => Err(Error::Domain("cross-entropy needs class targets".into())),
    }
}

fn check_values(out: &Mat, y: &Mat) -> Result<()> {
    if out.shape() != y.shape() {
        return Err(Error::Shape { op: "loss", detail: format!("output {:?} vs target {:?}", out.shape(), y.shape()) });
    }
    Ok(())
}

fn loss_output_gradient(out: &Mat, loss: Loss, target: Target<'_>) -> Result<Mat> {
    match (loss, target) {
        (Loss::Square, Target::Values(y)) => {
            check_values(out, y)?;
            Ok(out.sub(y))
        }
        (Loss::Square, Target::Classes(t)) => {
            check_classes(out, t)?;
            Ok(out.sub(&one_hot(t, out.rows())))
        }
        (Loss::CrossEntropy, Target::Classes(t)) => {
            check_classes(out, t)?;
            check_probabilities(out)?;
            let b = out.cols() as f64;
            let mut g = Mat::zeros(out.rows(), out.cols());
            for (j, &c) in t.iter().enumerate() {
                g[(c, j)] = -1.0 / (b * out[(c, j)]);
            }
            Ok(g)
        }
        (Loss::CrossEntropy, Target::Values(_)) => Err(Error::Domain("cross-entropy needs class targets".into())),
    }
}

/// Columns e_{t_j} of an `m`-row one-hot batch.
pub fn one_hot(t: &[usize], m: usize) -> Mat {
    let mut y = Mat::zeros(m, t.len());
    for (j, &c) in t.iter().enumerate() {
        y[(c, j)] = 1.0;
    }
    y
}
