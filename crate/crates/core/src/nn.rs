//! Dense multilayer perceptrons with hand-written backpropagation, Adam
//! and SGD optimizers, Polyak averaging, and a bit-exact checkpoint format.
//!
//! Weights are stored row-major (`out x in`). ReLU uses subgradient 0 at 0.

use std::io::{Read, Write};

use rand::Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Tanh),
            2 => Ok(Activation::Identity),
            _ => Err(Error::Checkpoint(format!("unknown activation code {c}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_width: usize,
    pub out_width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_width: usize, out_width: usize, activation: Activation) -> Self {
        Self { in_width, out_width, activation }
    }
}

/// Actor stack: four ReLU layers of width `actions`, then a tanh output.
pub fn actor_layers(states: usize, actions: usize) -> Vec<LayerSpec> {
    let mut out = vec![LayerSpec::new(states, actions, Activation::Relu)];
    for _ in 0..3 {
        out.push(LayerSpec::new(actions, actions, Activation::Relu));
    }
    out.push(LayerSpec::new(actions, actions, Activation::Tanh));
    out
}

/// Critic hidden widths as multiples of the action count, rounded to the
/// nearest integer with a floor of 1.
pub const CRITIC_WIDTH_FACTORS: [f64; 6] = [2.0, 3.46, 1.8, 0.96, 0.54, 0.26];

pub fn critic_widths(actions: usize) -> Vec<usize> {
    CRITIC_WIDTH_FACTORS.iter().map(|f| ((f * actions as f64).round() as usize).max(1)).collect()
}

/// Critic stack over the concatenated `[state, action]` input: six ReLU
/// layers, then a linear scalar output.
pub fn critic_layers(states: usize, actions: usize) -> Vec<LayerSpec> {
    let mut out = Vec::new();
    let mut width = states + actions;
    for w in critic_widths(actions) {
        out.push(LayerSpec::new(width, w, Activation::Relu));
        width = w;
    }
    out.push(LayerSpec::new(width, 1, Activation::Identity));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// Row-major `out_width x in_width`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Per-layer activations recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[l]` feeds layer `l`; the last entry is the network output.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().expect("cache holds at least the input")
    }

    /// Sign of every pre-activation. A perturbation that changes this
    /// pattern crossed a ReLU kink, where finite differences are meaningless.
    pub fn sign_pattern(&self) -> Vec<bool> {
        self.pre.iter().flatten().map(|z| *z > 0.0).collect()
    }
}

/// Gradient (or any other tensor) with the same shapes as an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn check_like(&self, net: &Mlp) -> Result<()> {
        let ok = self.weights.len() == net.layers.len()
            && self.bias.len() == net.layers.len()
            && net.layers.iter().enumerate().all(|(i, l)| {
                self.weights[i].len() == l.weights.len() && self.bias[i].len() == l.bias.len()
            });
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("gradient shapes do not match network".into()))
        }
    }

    fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().zip(&self.bias).flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().zip(self.bias.iter_mut()).flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        self.iter_mut().zip(other.iter()).for_each(|(a, b)| *a += b);
    }

    pub fn scale(&mut self, s: f64) {
        self.iter_mut().for_each(|a| *a *= s);
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.iter().copied().collect()
    }
}

fn check_chain(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::ShapeMismatch("network needs at least one layer".into()));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.in_width == 0 || s.out_width == 0 {
            return Err(Error::ShapeMismatch(format!("layer {i} has zero width")));
        }
        if i > 0 && specs[i - 1].out_width != s.in_width {
            return Err(Error::ShapeMismatch(format!(
                "layer {} outputs {} but layer {i} expects {}",
                i - 1,
                specs[i - 1].out_width,
                s.in_width
            )));
        }
    }
    Ok(())
}

impl Mlp {
    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        check_chain(specs)?;
        let layers = specs
            .iter()
            .map(|s| {
                let bound = 1.0 / (s.in_width as f64).sqrt();
                let mut draw = || rng.random_range(-bound..bound);
                let weights = (0..s.in_width * s.out_width).map(|_| draw()).collect();
                let bias = (0..s.out_width).map(|_| draw()).collect();
                Layer { spec: *s, weights, bias }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(specs: &[LayerSpec]) -> Result<Self> {
        check_chain(specs)?;
        Ok(Self {
            layers: specs
                .iter()
                .map(|s| Layer { spec: *s, weights: vec![0.0; s.in_width * s.out_width], bias: vec![0.0; s.out_width] })
                .collect(),
        })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let specs: Vec<_> = layers.iter().map(|l| l.spec).collect();
        check_chain(&specs)?;
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.spec.in_width * l.spec.out_width || l.bias.len() != l.spec.out_width {
                return Err(Error::ShapeMismatch(format!("layer {i} parameter sizes disagree with its spec")));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].spec.in_width
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").spec.out_width
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        for l in &self.layers {
            cur = affine(l, &cur).into_iter().map(|z| l.spec.activation.apply(z)).collect();
        }
        Ok(cur)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        self.check_input(x)?;
        let mut inputs = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let z = affine(l, inputs.last().expect("non-empty"));
            let y = z.iter().map(|&v| l.spec.activation.apply(v)).collect();
            pre.push(z);
            inputs.push(y);
        }
        Ok(ForwardCache { inputs, pre })
    }

    /// Accumulates `d(objective)/d(params)` into `grads` for the objective
    /// whose gradient w.r.t. the output is `upstream`, and returns the
    /// gradient w.r.t. the input.
    pub fn backward_into(&self, cache: &ForwardCache, upstream: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        grads.check_like(self)?;
        if cache.pre.len() != self.layers.len() {
            return Err(Error::ShapeMismatch("forward cache belongs to another network".into()));
        }
        if upstream.len() != self.output_width() {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient has length {}, output is {}",
                upstream.len(),
                self.output_width()
            )));
        }
        let mut delta = upstream.to_vec();
        for (li, l) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre[li];
            let y = &cache.inputs[li + 1];
            for o in 0..delta.len() {
                delta[o] *= l.spec.activation.derivative(z[o], y[o]);
            }
            let x = &cache.inputs[li];
            let n_in = l.spec.in_width;
            let gw = &mut grads.weights[li];
            let gb = &mut grads.bias[li];
            let mut next = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                let row = &l.weights[o * n_in..(o + 1) * n_in];
                let grow = &mut gw[o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    grow[i] += d * x[i];
                    next[i] += d * row[i];
                }
            }
            delta = next;
        }
        Ok(delta)
    }

    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let mut grads = Gradients::zeros_like(self);
        let input_grad = self.backward_into(cache, upstream, &mut grads)?;
        Ok((grads, input_grad))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::ShapeMismatch(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_width()
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// Flat parameter view: layer by layer, weights then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        self.params().copied().collect()
    }

    pub fn param_mut(&mut self, index: usize) -> &mut f64 {
        self.params_mut().nth(index).expect("parameter index in range")
    }

    fn same_shape(&self, other: &Mlp) -> Result<()> {
        if self.specs() != other.specs() {
            return Err(Error::ShapeMismatch("networks have different layer specs".into()));
        }
        Ok(())
    }

    /// `self <- tau * source + (1 - tau) * self`.
    pub fn soft_update(&mut self, source: &Mlp, tau: f64) -> Result<()> {
        self.same_shape(source)?;
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::InvalidParameter(format!("soft-update rate {tau} outside (0, 1]")));
        }
        for (t, s) in self.params_mut().zip(source.params()) {
            *t = tau * s + (1.0 - tau) * *t;
        }
        Ok(())
    }

    pub fn distance(&self, other: &Mlp) -> f64 {
        self.params().zip(other.params()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// Layout: `b"SPNN"`, u32 version, u32 layer count, then per layer
    /// (u32 in, u32 out, u8 activation), then per layer the row-major
    /// weights followed by the bias, all little-endian f64.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for l in &self.layers {
            w.write_all(&(l.spec.in_width as u32).to_le_bytes())?;
            w.write_all(&(l.spec.out_width as u32).to_le_bytes())?;
            w.write_all(&[l.spec.activation.code()])?;
        }
        for v in self.params() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let count = read_u32(&mut r)? as usize;
        let mut specs = Vec::with_capacity(count);
        for _ in 0..count {
            let in_width = read_u32(&mut r)? as usize;
            let out_width = read_u32(&mut r)? as usize;
            let mut code = [0u8; 1];
            r.read_exact(&mut code)?;
            specs.push(LayerSpec::new(in_width, out_width, Activation::from_code(code[0])?));
        }
        let mut net = Mlp::zeros(&specs)?;
        for v in net.params_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        Ok(net)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"SPNN";
const CHECKPOINT_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn affine(l: &Layer, x: &[f64]) -> Vec<f64> {
    let n_in = l.spec.in_width;
    (0..l.spec.out_width)
        .map(|o| {
            let row = &l.weights[o * n_in..(o + 1) * n_in];
            l.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Gradients,
    v: Gradients,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    /// One bias-corrected descent step along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        grads.check_like(net)?;
        self.m.check_like(net)?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in net.params_mut().zip(grads.iter()).zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
        Ok(())
    }
}

/// Descent optimizer selected by configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Adam(AdamState),
    Sgd { lr: f64 },
}

impl Optimizer {
    pub fn adam(net: &Mlp, lr: f64) -> Self {
        Optimizer::Adam(AdamState::new(net, lr))
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        match self {
            Optimizer::Adam(s) => s.step(net, grads),
            Optimizer::Sgd { lr } => {
                grads.check_like(net)?;
                let lr = *lr;
                net.params_mut().zip(grads.iter()).for_each(|(p, g)| *p -= lr * g);
                Ok(())
            }
        }
    }
}
