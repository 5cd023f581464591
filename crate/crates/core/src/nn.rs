//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! Weights are stored row-major with shape `(output_width, input_width)`.
//! [`Mlp::forward`] caches every layer's pre- and post-activations so that
//! [`Mlp::backward`] can return both parameter gradients (averaged over the
//! batch) and per-example gradients with respect to the inputs.
//!
//! Output gradients handed to `backward` are per-example derivatives
//! `d loss_i / d output_i`; the batch loss is taken to be the mean of the
//! per-example losses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the cached pre- and post-activation.
    #[inline]
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => post * (1.0 - post),
            Activation::Linear => 1.0,
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_width: usize, output_width: usize, activation: Activation) -> Self {
        Self {
            input_width,
            output_width,
            activation,
        }
    }
}

/// Checks widths are positive and that consecutive layers chain.
pub fn validate_chain(layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::config("a network needs at least one layer"));
    }
    for (i, layer) in layers.iter().enumerate() {
        if layer.input_width == 0 || layer.output_width == 0 {
            return Err(Error::config(format!("layer {i} has a zero width")));
        }
    }
    for (i, pair) in layers.windows(2).enumerate() {
        if pair[0].output_width != pair[1].input_width {
            return Err(Error::config(format!(
                "layer {} outputs {} values but layer {} expects {}",
                i,
                pair[0].output_width,
                i + 1,
                pair[1].input_width
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_epsilon")]
    pub adam_epsilon: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl OptimizerSpec {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            adam_beta1: default_beta1(),
            adam_beta2: default_beta2(),
            adam_epsilon: default_epsilon(),
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            ..Self::sgd(learning_rate)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        let betas_ok = [self.adam_beta1, self.adam_beta2]
            .iter()
            .all(|b| (0.0..1.0).contains(b));
        if !betas_ok || !(self.adam_epsilon > 0.0) {
            return Err(Error::config("adam moments need betas in [0, 1) and epsilon > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    spec: LayerSpec,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Dense {
    pub fn spec(&self) -> LayerSpec {
        self.spec
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    fn affine_into(&self, input: &[f64], out: &mut [f64]) {
        let n_in = self.spec.input_width;
        for (o, slot) in out.iter_mut().enumerate() {
            let row = &self.weights[o * n_in..(o + 1) * n_in];
            *slot = self.biases[o] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
    }
}

/// Gradients for one layer, same layout as the layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|g| g.is_finite()))
    }

    /// All gradient entries flattened in parameter order.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }
}

/// Pre- and post-activation values of one layer for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRecord {
    pub pre: Batch,
    pub post: Batch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    version: u64,
    input: Batch,
    records: Vec<ActivationRecord>,
}

impl ForwardCache {
    pub fn input(&self) -> &Batch {
        &self.input
    }

    pub fn records(&self) -> &[ActivationRecord] {
        &self.records
    }

    pub fn output(&self) -> &Batch {
        &self.records.last().expect("cache holds at least one layer").post
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
}

/// Per-parameter accumulators. `moments` is populated lazily by Adam.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimizerState {
    step_count: u64,
    moments: Option<Vec<(Moments, Moments)>>,
}

impl OptimizerState {
    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    optimizer: OptimizerState,
    /// Bumped on every parameter update; caches remember the version they saw.
    version: u64,
}

impl Mlp {
    /// Xavier-uniform weights, zero biases.
    pub fn new(layers: &[LayerSpec], seed: u64) -> Result<Self> {
        validate_chain(layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layers
            .iter()
            .map(|&spec| {
                let limit = (6.0 / (spec.input_width + spec.output_width) as f64).sqrt();
                let weights = (0..spec.input_width * spec.output_width)
                    .map(|_| rng.random_range(-limit..=limit))
                    .collect();
                Dense {
                    spec,
                    weights,
                    biases: vec![0.0; spec.output_width],
                }
            })
            .collect();
        Ok(Self {
            layers,
            optimizer: OptimizerState::default(),
            version: 0,
        })
    }

    /// All weights and biases zero.
    pub fn zeroed(layers: &[LayerSpec]) -> Result<Self> {
        validate_chain(layers)?;
        Ok(Self {
            layers: layers
                .iter()
                .map(|&spec| Dense {
                    spec,
                    weights: vec![0.0; spec.input_width * spec.output_width],
                    biases: vec![0.0; spec.output_width],
                })
                .collect(),
            optimizer: OptimizerState::default(),
            version: 0,
        })
    }

    /// Builds a model from explicit parameters, one `(weights, biases)` pair per layer.
    pub fn from_parameters(layers: &[LayerSpec], params: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        let mut model = Self::zeroed(layers)?;
        if params.len() != layers.len() {
            return Err(Error::Shape {
                context: "parameter layer count",
                expected: layers.len(),
                actual: params.len(),
            });
        }
        for (dense, (w, b)) in model.layers.iter_mut().zip(params) {
            if w.len() != dense.weights.len() {
                return Err(Error::Shape {
                    context: "weight count",
                    expected: dense.weights.len(),
                    actual: w.len(),
                });
            }
            if b.len() != dense.biases.len() {
                return Err(Error::Shape {
                    context: "bias count",
                    expected: dense.biases.len(),
                    actual: b.len(),
                });
            }
            if !w.iter().chain(&b).all(|v| v.is_finite()) {
                return Err(Error::numerical("parameters must be finite"));
            }
            dense.weights = w;
            dense.biases = b;
        }
        Ok(model)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].spec.input_width
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.output_width
    }

    pub fn optimizer_state(&self) -> &OptimizerState {
        &self.optimizer
    }

    /// Drops accumulated moments and the step counter.
    pub fn reset_optimizer(&mut self) {
        self.optimizer = OptimizerState::default();
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Weights and biases flattened layer by layer (weights first).
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    /// Overwrites parameters from a flat vector in [`Mlp::parameters`] order.
    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::Shape {
                context: "flat parameter count",
                expected: self.parameter_count(),
                actual: flat.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        self.version += 1;
        Ok(())
    }

    fn check_input(&self, inputs: &Batch) -> Result<()> {
        if inputs.cols() != self.input_width() {
            return Err(Error::Shape {
                context: "network input width",
                expected: self.input_width(),
                actual: inputs.cols(),
            });
        }
        Ok(())
    }

    /// Forward pass without keeping intermediate activations.
    pub fn predict(&self, inputs: &Batch) -> Result<Batch> {
        self.check_input(inputs)?;
        let mut current = inputs.clone();
        for layer in &self.layers {
            let spec = layer.spec;
            let mut next = Batch::zeros(current.rows(), spec.output_width);
            for r in 0..current.rows() {
                let out = next.row_mut(r);
                layer.affine_into(current.row(r), out);
                for v in out.iter_mut() {
                    *v = spec.activation.apply(*v);
                }
            }
            current = next;
        }
        Ok(current)
    }

    pub fn forward(&self, inputs: &Batch) -> Result<(Batch, ForwardCache)> {
        self.check_input(inputs)?;
        let mut records: Vec<ActivationRecord> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let spec = layer.spec;
            let input = records.last().map_or(inputs, |r| &r.post);
            let mut pre = Batch::zeros(inputs.rows(), spec.output_width);
            for r in 0..input.rows() {
                layer.affine_into(input.row(r), pre.row_mut(r));
            }
            let mut post = pre.clone();
            for v in post.as_mut_slice() {
                *v = spec.activation.apply(*v);
            }
            records.push(ActivationRecord { pre, post });
        }
        let cache = ForwardCache {
            version: self.version,
            input: inputs.clone(),
            records,
        };
        Ok((cache.output().clone(), cache))
    }

    /// Reverse-mode pass. Parameter gradients are averaged over the batch;
    /// input gradients are per example.
    pub fn backward(&self, cache: &ForwardCache, output_grads: &Batch) -> Result<(Gradients, Batch)> {
        if cache.version != self.version || cache.records.len() != self.layers.len() {
            return Err(Error::contract("forward cache does not belong to this model state"));
        }
        let matches_shapes = self
            .layers
            .iter()
            .zip(&cache.records)
            .all(|(l, r)| r.pre.cols() == l.spec.output_width)
            && cache.input.cols() == self.input_width();
        if !matches_shapes {
            return Err(Error::contract("forward cache shapes do not match the model"));
        }
        let batch = cache.input.rows();
        if output_grads.rows() != batch || output_grads.cols() != self.output_width() {
            return Err(Error::Shape {
                context: "output gradient batch",
                expected: batch * self.output_width(),
                actual: output_grads.rows() * output_grads.cols(),
            });
        }
        let scale = if batch == 0 { 0.0 } else { 1.0 / batch as f64 };

        let mut grads: Vec<LayerGrad> = Vec::with_capacity(self.layers.len());
        let mut upstream = output_grads.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let spec = layer.spec;
            let record = &cache.records[idx];
            let input = if idx == 0 {
                &cache.input
            } else {
                &cache.records[idx - 1].post
            };
            let n_in = spec.input_width;
            let n_out = spec.output_width;

            let mut delta = upstream;
            for (d, (pre, post)) in delta
                .as_mut_slice()
                .iter_mut()
                .zip(record.pre.as_slice().iter().zip(record.post.as_slice()))
            {
                *d *= spec.activation.derivative(*pre, *post);
            }

            let mut gw = vec![0.0; n_out * n_in];
            let mut gb = vec![0.0; n_out];
            let mut downstream = Batch::zeros(batch, n_in);
            for r in 0..batch {
                let d_row = delta.row(r);
                let x_row = input.row(r);
                let g_in = downstream.row_mut(r);
                for o in 0..n_out {
                    let d = d_row[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let w_row = &layer.weights[o * n_in..(o + 1) * n_in];
                    let gw_row = &mut gw[o * n_in..(o + 1) * n_in];
                    for i in 0..n_in {
                        gw_row[i] += d * x_row[i];
                        g_in[i] += d * w_row[i];
                    }
                }
            }
            gw.iter_mut().for_each(|g| *g *= scale);
            gb.iter_mut().for_each(|g| *g *= scale);
            grads.push(LayerGrad {
                weights: gw,
                biases: gb,
            });
            upstream = downstream;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, upstream))
    }

    /// One optimizer step. The step counter advances before Adam's bias
    /// correction, so the first update uses `t = 1`.
    ///
    /// On error the model is left untouched.
    pub fn apply_update(&mut self, grads: &Gradients, spec: &OptimizerSpec) -> Result<()> {
        spec.validate()?;
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Shape {
                context: "gradient layer count",
                expected: self.layers.len(),
                actual: grads.layers.len(),
            });
        }
        for (l, g) in self.layers.iter().zip(&grads.layers) {
            if g.weights.len() != l.weights.len() || g.biases.len() != l.biases.len() {
                return Err(Error::Shape {
                    context: "gradient parameter count",
                    expected: l.weights.len() + l.biases.len(),
                    actual: g.weights.len() + g.biases.len(),
                });
            }
        }
        if !grads.is_finite() {
            return Err(Error::numerical("non-finite gradient"));
        }

        let mut layers = self.layers.clone();
        let mut optimizer = self.optimizer.clone();
        optimizer.step_count += 1;
        let lr = spec.learning_rate;
        match spec.kind {
            OptimizerKind::Sgd => {
                for (layer, g) in layers.iter_mut().zip(&grads.layers) {
                    sgd(&mut layer.weights, &g.weights, lr);
                    sgd(&mut layer.biases, &g.biases, lr);
                }
            }
            OptimizerKind::Adam => {
                let moments = optimizer.moments.get_or_insert_with(|| {
                    self.layers
                        .iter()
                        .map(|l| (Moments::zeros(l.weights.len()), Moments::zeros(l.biases.len())))
                        .collect()
                });
                let t = optimizer.step_count as i32;
                let correction1 = 1.0 - spec.adam_beta1.powi(t);
                let correction2 = 1.0 - spec.adam_beta2.powi(t);
                for ((layer, g), (mw, mb)) in layers.iter_mut().zip(&grads.layers).zip(moments.iter_mut()) {
                    adam(&mut layer.weights, &g.weights, mw, spec, correction1, correction2);
                    adam(&mut layer.biases, &g.biases, mb, spec, correction1, correction2);
                }
            }
        }
        let finite = layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()));
        if !finite {
            return Err(Error::numerical("update produced non-finite parameters"));
        }
        self.layers = layers;
        self.optimizer = optimizer;
        self.version += 1;
        Ok(())
    }
}

impl Moments {
    fn zeros(n: usize) -> Self {
        Self {
            first: vec![0.0; n],
            second: vec![0.0; n],
        }
    }
}

fn sgd(params: &mut [f64], grads: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

fn adam(params: &mut [f64], grads: &[f64], m: &mut Moments, spec: &OptimizerSpec, c1: f64, c2: f64) {
    let (b1, b2) = (spec.adam_beta1, spec.adam_beta2);
    for i in 0..params.len() {
        let g = grads[i];
        m.first[i] = b1 * m.first[i] + (1.0 - b1) * g;
        m.second[i] = b2 * m.second[i] + (1.0 - b2) * g * g;
        let m_hat = m.first[i] / c1;
        let v_hat = m.second[i] / c2;
        params[i] -= spec.learning_rate * m_hat / (v_hat.sqrt() + spec.adam_epsilon);
    }
}
