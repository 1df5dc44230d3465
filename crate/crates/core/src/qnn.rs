//! Heterogeneously quantized MLPs for amplitude regression and their quantization-aware training.
//!
//! Every tensor lives on a symmetric fixed-point grid with a static scale of 1: weights and
//! biases of layer `i` at `weight_bits[i]`, hidden activations at the bit-width of the weights
//! that produced them, network input and output at `io_bits`. Training keeps full-precision
//! shadow weights and back-propagates through the quantizers with a straight-through estimator.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::container::Container;
use crate::error::{domain, Error, Result};
use crate::pulsegen::{Dataset, Window};

pub const DEPTH_RANGE: RangeInclusive<usize> = 1..=3;
pub const WIDTH_RANGE: RangeInclusive<usize> = 2..=18;
pub const BITS_RANGE: RangeInclusive<u32> = 2..=16;

fn default_input_width() -> usize {
    9
}

/// MLP topology and per-tensor precision. Hidden layers use a rectifier, the output is linear.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    /// Window length fed to the network.
    #[serde(default = "default_input_width")]
    pub input_width: usize,
    pub hidden_layer_widths: Vec<usize>,
    /// One bit-width per weight matrix (hidden layers first, output layer last).
    pub weight_bits: Vec<u32>,
    /// Shared input/output quantization.
    pub io_bits: u32,
}

impl MlpSpec {
    pub fn depth(&self) -> usize {
        self.hidden_layer_widths.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.depth();
        if !DEPTH_RANGE.contains(&d) {
            return Err(domain(format!("hidden layer count must be in 1..=3, got {d}")));
        }
        if let Some(w) = self.hidden_layer_widths.iter().find(|w| !WIDTH_RANGE.contains(w)) {
            return Err(domain(format!("hidden layer width must be in 2..=18, got {w}")));
        }
        if self.weight_bits.len() != d + 1 {
            return Err(domain(format!(
                "expected {} weight bit-widths for {d} hidden layers, got {}",
                d + 1,
                self.weight_bits.len()
            )));
        }
        if let Some(b) = self
            .weight_bits
            .iter()
            .chain(std::iter::once(&self.io_bits))
            .find(|b| !BITS_RANGE.contains(b))
        {
            return Err(domain(format!("bit-width must be in 2..=16, got {b}")));
        }
        if self.input_width == 0 {
            return Err(domain("input width must be positive"));
        }
        Ok(())
    }

    /// `(inputs, outputs)` of each weight matrix.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.depth() + 1);
        let mut prev = self.input_width;
        for &w in &self.hidden_layer_widths {
            dims.push((prev, w));
            prev = w;
        }
        dims.push((prev, 1));
        dims
    }

    /// Bit-width of the values leaving layer `i`.
    pub fn activation_bits(&self, layer: usize) -> u32 {
        if layer < self.depth() {
            self.weight_bits[layer]
        } else {
            self.io_bits
        }
    }

    /// Bit-width of the values entering layer `i`.
    pub fn input_bits(&self, layer: usize) -> u32 {
        if layer == 0 {
            self.io_bits
        } else {
            self.activation_bits(layer - 1)
        }
    }

    /// Multiply-accumulate count `sum n_i * n_(i+1)`.
    pub fn mac_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o).sum()
    }

    pub fn precision(&self) -> Precision {
        Precision {
            input: Some(self.io_bits),
            layers: (0..=self.depth())
                .map(|i| LayerPrecision {
                    weight: Some(self.weight_bits[i]),
                    activation: Some(self.activation_bits(i)),
                })
                .collect(),
        }
    }
}

/// Grid step of a `bits`-wide quantizer with the given scale.
pub fn quant_step(bits: u32, scale: f64) -> f64 {
    scale * (1.0 - bits as f64).exp2()
}

/// Symmetric uniform fixed-point quantizer with range `[-scale, scale - step]`.
pub fn quantize(x: f64, bits: u32, scale: f64) -> f64 {
    let step = quant_step(bits, scale);
    ((x / step).round() * step).clamp(-scale, scale - step)
}

/// Whether the straight-through estimator passes gradient at `x`.
fn ste_pass(x: f64, bits: Option<u32>) -> bool {
    match bits {
        Some(b) => (-1.0..=1.0 - quant_step(b, 1.0)).contains(&x),
        None => true,
    }
}

fn quant_opt(x: f64, bits: Option<u32>) -> f64 {
    match bits {
        Some(b) => quantize(x, b, 1.0),
        None => x,
    }
}

/// Quantizer settings per tensor; `None` disables a quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Precision {
    pub input: Option<u32>,
    pub layers: Vec<LayerPrecision>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerPrecision {
    pub weight: Option<u32>,
    pub activation: Option<u32>,
}

impl Precision {
    pub fn float(layers: usize) -> Self {
        Precision {
            input: None,
            layers: vec![LayerPrecision { weight: None, activation: None }; layers],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        LayerParams {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn quantized(&self, bits: Option<u32>) -> Self {
        LayerParams {
            inputs: self.inputs,
            outputs: self.outputs,
            weights: self.weights.iter().map(|&w| quant_opt(w, bits)).collect(),
            biases: self.biases.iter().map(|&b| quant_opt(b, bits)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub layers: Vec<LayerParams>,
}

impl MlpWeights {
    pub fn zeros(dims: &[(usize, usize)]) -> Self {
        MlpWeights { layers: dims.iter().map(|&(i, o)| LayerParams::zeros(i, o)).collect() }
    }

    /// Uniform `+-1/sqrt(fan_in)` weights, zero biases.
    pub fn init(dims: &[(usize, usize)], rng: &mut impl Rng) -> Self {
        let layers = dims
            .iter()
            .map(|&(i, o)| {
                let bound = 1.0 / (i as f64).sqrt();
                let mut l = LayerParams::zeros(i, o);
                for w in &mut l.weights {
                    *w = rng.random_range(-bound..=bound);
                }
                l
            })
            .collect();
        MlpWeights { layers }
    }

    pub fn quantized(&self, precision: &Precision) -> Self {
        MlpWeights {
            layers: self
                .layers
                .iter()
                .zip(&precision.layers)
                .map(|(l, p)| l.quantized(p.weight))
                .collect(),
        }
    }

    fn check_dims(&self, dims: &[(usize, usize)]) -> Result<()> {
        if self.layers.len() != dims.len() {
            return Err(Error::Shape(format!(
                "expected {} layers, weights have {}",
                dims.len(),
                self.layers.len()
            )));
        }
        for (k, (l, &(i, o))) in self.layers.iter().zip(dims).enumerate() {
            if l.inputs != i || l.outputs != o || l.weights.len() != i * o || l.biases.len() != o {
                return Err(Error::Shape(format!(
                    "layer {k}: expected {o}x{i}, weights are {}x{} ({} values, {} biases)",
                    l.outputs,
                    l.inputs,
                    l.weights.len(),
                    l.biases.len()
                )));
            }
        }
        Ok(())
    }

    pub fn to_container(&self, spec: &MlpSpec) -> Container {
        let mut c = Container::new(json!({ "kind": "weights", "spec": spec }));
        for (i, l) in self.layers.iter().enumerate() {
            c.push(format!("layer{i}_weights"), l.weights.iter().map(|&v| v as f32).collect());
            c.push(format!("layer{i}_biases"), l.biases.iter().map(|&v| v as f32).collect());
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<(MlpSpec, Self)> {
        if c.header.get("kind").and_then(|k| k.as_str()) != Some("weights") {
            return Err(Error::Format("container does not hold weights".into()));
        }
        let spec: MlpSpec = serde_json::from_value(c.header["spec"].clone())?;
        let mut layers = Vec::new();
        for (i, (inputs, outputs)) in spec.layer_dims().into_iter().enumerate() {
            let get = |name: String| {
                c.array(&name)
                    .map(|a| a.iter().map(|&v| f64::from(v)).collect::<Vec<_>>())
                    .ok_or_else(|| Error::Format(format!("missing array {name}")))
            };
            layers.push(LayerParams {
                inputs,
                outputs,
                weights: get(format!("layer{i}_weights"))?,
                biases: get(format!("layer{i}_biases"))?,
            });
        }
        let w = MlpWeights { layers };
        w.check_dims(&spec.layer_dims())?;
        Ok((spec, w))
    }
}

/// Per-layer quantizer constants used on the hot path.
#[derive(Debug, Clone, Copy)]
struct ActQuant {
    bits: Option<u32>,
    step: f64,
    inv_step: f64,
    max: f64,
}

impl ActQuant {
    fn new(bits: Option<u32>) -> Self {
        match bits {
            Some(b) => {
                let step = quant_step(b, 1.0);
                ActQuant { bits, step, inv_step: 1.0 / step, max: 1.0 - step }
            }
            None => ActQuant { bits, step: 0.0, inv_step: 0.0, max: f64::INFINITY },
        }
    }

    #[inline]
    fn apply(&self, x: f64) -> f64 {
        if self.bits.is_some() {
            ((x * self.inv_step).round() * self.step).clamp(-1.0, self.max)
        } else {
            x
        }
    }

    #[inline]
    fn passes(&self, x: f64) -> bool {
        self.bits.is_none() || (-1.0..=self.max).contains(&x)
    }
}

/// Forward/backward evaluator for one precision configuration.
struct Engine {
    input: ActQuant,
    acts: Vec<ActQuant>,
}

/// Per-sample activations kept for back-propagation.
struct Trace {
    /// `pre[l]` holds pre-activations of layer `l`.
    pre: Vec<Vec<f64>>,
    /// `post[0]` is the quantized input, `post[l + 1]` the quantized output of layer `l`.
    post: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Trace {
    fn new(width: usize, layers: &[LayerParams]) -> Self {
        let mut post = vec![vec![0.0; width]];
        post.extend(layers.iter().map(|l| vec![0.0; l.outputs]));
        Trace {
            pre: layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
            post,
            delta: layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
        }
    }
}

impl Engine {
    fn new(precision: &Precision) -> Self {
        Engine {
            input: ActQuant::new(precision.input),
            acts: precision.layers.iter().map(|p| ActQuant::new(p.activation)).collect(),
        }
    }

    /// Runs with already-quantized parameters, filling `trace`; returns the network output.
    fn forward(&self, layers: &[LayerParams], x: &[f64], trace: &mut Trace) -> f64 {
        for (dst, &v) in trace.post[0].iter_mut().zip(x) {
            *dst = self.input.apply(v);
        }
        let last = layers.len() - 1;
        for (l, layer) in layers.iter().enumerate() {
            let (head, tail) = trace.post.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            let pre = &mut trace.pre[l];
            let q = self.acts[l];
            for o in 0..layer.outputs {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                let z = layer.biases[o] + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
                pre[o] = z;
                let a = if l < last { z.max(0.0) } else { z };
                out[o] = q.apply(a);
            }
        }
        trace.post[layers.len()][0]
    }

    /// Accumulates parameter gradients for one sample given `dloss/doutput`.
    fn backward(&self, layers: &[LayerParams], trace: &mut Trace, grad_out: f64, grads: &mut [LayerParams]) {
        let last = layers.len() - 1;
        for l in (0..layers.len()).rev() {
            let q = self.acts[l];
            if l == last {
                let z = trace.pre[l][0];
                trace.delta[l][0] = if q.passes(z) { grad_out } else { 0.0 };
            } else {
                let next = &layers[l + 1];
                let (head, tail) = trace.delta.split_at_mut(l + 1);
                let delta = &mut head[l];
                let next_delta = &tail[0];
                for j in 0..layers[l].outputs {
                    let z = trace.pre[l][j];
                    delta[j] = if z > 0.0 && q.passes(z) {
                        (0..next.outputs)
                            .map(|k| next.weights[k * next.inputs + j] * next_delta[k])
                            .sum()
                    } else {
                        0.0
                    };
                }
            }
            let g = &mut grads[l];
            let input = &trace.post[l];
            for (o, &d) in trace.delta[l].iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                let row = &mut g.weights[o * g.inputs..(o + 1) * g.inputs];
                for (gw, a) in row.iter_mut().zip(input) {
                    *gw += d * a;
                }
            }
        }
    }
}

/// Quantized prediction for one window.
pub fn forward(spec: &MlpSpec, weights: &MlpWeights, input: &[f64]) -> Result<f64> {
    spec.validate()?;
    weights.check_dims(&spec.layer_dims())?;
    forward_with(&spec.precision(), weights, input)
}

/// Prediction under an explicit precision configuration; parameters are quantized on the fly.
pub fn forward_with(precision: &Precision, weights: &MlpWeights, input: &[f64]) -> Result<f64> {
    if weights.layers.is_empty() || precision.layers.len() != weights.layers.len() {
        return Err(Error::Shape("precision and weights disagree on layer count".into()));
    }
    let dims: Vec<_> = weights.layers.iter().map(|l| (l.inputs, l.outputs)).collect();
    weights.check_dims(&dims)?;
    if dims.windows(2).any(|w| w[0].1 != w[1].0) || dims.last().map(|d| d.1) != Some(1) {
        return Err(Error::Shape("layer shapes do not chain to a scalar output".into()));
    }
    if input.len() != dims[0].0 {
        return Err(Error::Shape(format!(
            "input has {} samples, network expects {}",
            input.len(),
            dims[0].0
        )));
    }
    let q = weights.quantized(precision);
    let engine = Engine::new(precision);
    let mut trace = Trace::new(input.len(), &q.layers);
    Ok(engine.forward(&q.layers, input, &mut trace))
}

/// Flattened view of a split.
#[derive(Debug, Clone)]
pub struct Samples {
    pub width: usize,
    pub inputs: Vec<f64>,
    pub labels: Vec<f64>,
}

impl Samples {
    pub fn from_windows(windows: &[Window]) -> Self {
        let width = windows.first().map_or(0, |w| w.samples.len());
        Samples {
            width,
            inputs: windows
                .iter()
                .flat_map(|w| w.samples.iter().map(|&v| f64::from(v)))
                .collect(),
            labels: windows.iter().map(|w| f64::from(w.amplitude_label)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.width..(i + 1) * self.width]
    }
}

fn mse(engine: &Engine, layers: &[LayerParams], data: &Samples, trace: &mut Trace) -> f64 {
    let total: f64 = (0..data.len())
        .map(|i| (engine.forward(layers, data.row(i), trace) - data.labels[i]).powi(2))
        .sum();
    total / data.len() as f64
}

/// Mean squared error of a quantized network over a set of windows.
pub fn evaluate_mse(spec: &MlpSpec, weights: &MlpWeights, windows: &[Window]) -> Result<f64> {
    spec.validate()?;
    weights.check_dims(&spec.layer_dims())?;
    let data = Samples::from_windows(windows);
    if data.is_empty() {
        return Err(domain("cannot evaluate on an empty split"));
    }
    if data.width != spec.input_width {
        return Err(Error::Shape(format!(
            "windows have {} samples, network expects {}",
            data.width, spec.input_width
        )));
    }
    let precision = spec.precision();
    let q = weights.quantized(&precision);
    let engine = Engine::new(&precision);
    let mut trace = Trace::new(data.width, &q.layers);
    Ok(mse(&engine, &q.layers, &data, &mut trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { epochs: 30, batch_size: 256, learning_rate: 0.01, momentum: 0.9, seed: 0 }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(domain("batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(domain(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(domain(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Validation MSE of the best epoch.
    pub val_mse: f64,
    /// Training MSE of the best-epoch weights.
    pub train_mse: f64,
    pub epochs_run: usize,
    /// Epoch whose weights were kept; 0 is the initialization.
    pub best_epoch: usize,
    /// Validation MSE after each epoch, starting with the initialization.
    pub val_history: Vec<f64>,
    /// Quantized parameters of the best epoch.
    pub weights: MlpWeights,
    pub baseline_mse: f64,
}

/// MSE on the validation split of the constant predictor equal to the mean training label.
pub fn baseline_mse(dataset: &Dataset) -> Result<f64> {
    if dataset.train.is_empty() || dataset.val.is_empty() {
        return Err(domain("baseline requires nonempty train and validation splits"));
    }
    let mean = dataset.train.iter().map(|w| f64::from(w.amplitude_label)).sum::<f64>()
        / dataset.train.len() as f64;
    Ok(dataset
        .val
        .iter()
        .map(|w| (f64::from(w.amplitude_label) - mean).powi(2))
        .sum::<f64>()
        / dataset.val.len() as f64)
}

/// Quantization-aware training with mini-batch SGD and momentum.
pub fn train(spec: &MlpSpec, dataset: &Dataset, hp: &TrainParams) -> Result<TrainReport> {
    spec.validate()?;
    let baseline = baseline_mse(dataset)?;
    let train_set = Samples::from_windows(&dataset.train);
    let val_set = Samples::from_windows(&dataset.val);
    if train_set.width != spec.input_width || val_set.width != spec.input_width {
        return Err(Error::Shape(format!(
            "dataset windows have {} samples, spec expects {}",
            train_set.width, spec.input_width
        )));
    }
    let mut report = train_samples(&spec.precision(), &spec.layer_dims(), &train_set, &val_set, hp)?;
    report.baseline_mse = baseline;
    Ok(report)
}

/// Training loop over explicit sample sets; `baseline_mse` is left at zero.
pub fn train_samples(
    precision: &Precision,
    dims: &[(usize, usize)],
    train_set: &Samples,
    val_set: &Samples,
    hp: &TrainParams,
) -> Result<TrainReport> {
    hp.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(domain("training requires nonempty train and validation data"));
    }
    if precision.layers.len() != dims.len() {
        return Err(Error::Shape("precision and topology disagree on layer count".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut shadow = MlpWeights::init(dims, &mut rng);
    let mut velocity = MlpWeights::zeros(dims);
    let mut grads = MlpWeights::zeros(dims);
    let engine = Engine::new(precision);
    let mut trace = Trace::new(train_set.width, &shadow.layers);

    let mut q = shadow.quantized(precision);
    let initial = mse(&engine, &q.layers, val_set, &mut trace);
    if !initial.is_finite() {
        return Err(Error::Diverged { epoch: 0 });
    }
    let mut best = (initial, 0usize, q.clone());
    let mut history = vec![initial];

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=hp.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hp.batch_size) {
            for g in &mut grads.layers {
                g.weights.iter_mut().for_each(|v| *v = 0.0);
                g.biases.iter_mut().for_each(|v| *v = 0.0);
            }
            let scale = 2.0 / batch.len() as f64;
            let mut loss = 0.0;
            for &i in batch {
                let y = engine.forward(&q.layers, train_set.row(i), &mut trace);
                let err = y - train_set.labels[i];
                loss += err * err;
                engine.backward(&q.layers, &mut trace, scale * err, &mut grads.layers);
            }
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            for ((s, v), (g, p)) in shadow
                .layers
                .iter_mut()
                .zip(&mut velocity.layers)
                .zip(grads.layers.iter().zip(&precision.layers))
            {
                let params = s.weights.iter_mut().chain(s.biases.iter_mut());
                let vel = v.weights.iter_mut().chain(v.biases.iter_mut());
                let grad = g.weights.iter().chain(g.biases.iter());
                for ((w, vw), &gw) in params.zip(vel).zip(grad) {
                    let gw = if ste_pass(*w, p.weight) { gw } else { 0.0 };
                    *vw = hp.momentum * *vw - hp.learning_rate * gw;
                    *w += *vw;
                }
            }
            q = shadow.quantized(precision);
        }
        let val = mse(&engine, &q.layers, val_set, &mut trace);
        if !val.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(val);
        if val < best.0 {
            best = (val, epoch, q.clone());
        }
    }

    let (val_mse, best_epoch, weights) = best;
    let train_mse = mse(&engine, &weights.layers, train_set, &mut trace);
    Ok(TrainReport {
        val_mse,
        train_mse,
        epochs_run: hp.epochs,
        best_epoch,
        val_history: history,
        weights,
        baseline_mse: 0.0,
    })
}

/// Loss `mean (f(x) - y)^2` and its gradient with respect to every parameter, used for gradient checks.
pub fn loss_and_gradient(
    precision: &Precision,
    weights: &MlpWeights,
    data: &Samples,
) -> Result<(f64, MlpWeights)> {
    let dims: Vec<_> = weights.layers.iter().map(|l| (l.inputs, l.outputs)).collect();
    weights.check_dims(&dims)?;
    if data.is_empty() || data.width != dims[0].0 {
        return Err(Error::Shape("sample width does not match the network".into()));
    }
    let engine = Engine::new(precision);
    let q = weights.quantized(precision);
    let mut grads = MlpWeights::zeros(&dims);
    let mut trace = Trace::new(data.width, &q.layers);
    let scale = 2.0 / data.len() as f64;
    let mut loss = 0.0;
    for i in 0..data.len() {
        let err = engine.forward(&q.layers, data.row(i), &mut trace) - data.labels[i];
        loss += err * err;
        engine.backward(&q.layers, &mut trace, scale * err, &mut grads.layers);
    }
    for (g, (w, p)) in grads.layers.iter_mut().zip(weights.layers.iter().zip(&precision.layers)) {
        for (gv, wv) in g.weights.iter_mut().zip(&w.weights).chain(g.biases.iter_mut().zip(&w.biases)) {
            if !ste_pass(*wv, p.weight) {
                *gv = 0.0;
            }
        }
    }
    Ok((loss / data.len() as f64, grads))
}
