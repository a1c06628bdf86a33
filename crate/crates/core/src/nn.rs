//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! The networks here are deliberately small and fully connected: an SDF
//! decoder, a point encoder, and a grasp success head. Everything is f64,
//! single-threaded, and deterministic for a fixed seed.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use std::io::{Read, Write};
use std::path::Path;

const MODEL_MAGIC: &[u8; 4] = b"SDFG";
const MODEL_VERSION: u32 = 1;

/// Probabilities are clamped to [PROB_CLAMP, 1 - PROB_CLAMP] wherever a log
/// of them is taken.
pub const PROB_CLAMP: f64 = 1e-7;

/// Elementwise activation applied after each affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative at pre-activation `x`. ReLU subgradient at 0 is 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 - s)
            }
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
            Activation::Sigmoid => 3,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Relu),
            2 => Ok(Activation::Tanh),
            3 => Ok(Activation::Sigmoid),
            other => Err(Error::ModelFormat(format!(
                "unknown activation tag {other}"
            ))),
        }
    }
}

/// One affine layer followed by its activation. `weights` is fan_out x fan_in.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    pub layers: Vec<DenseLayer>,
}

/// Cached per-layer pre- and post-activations from one forward pass.
pub struct ForwardTrace {
    input: DVector<f64>,
    pre: Vec<DVector<f64>>,
    post: Vec<DVector<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &DVector<f64> {
        self.post.last().unwrap_or(&self.input)
    }
}

/// Per-parameter gradients with the same shapes as the network.
#[derive(Debug, Clone)]
pub struct NetworkGradient {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl NetworkGradient {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| DMatrix::zeros(l.fan_out(), l.fan_in()))
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| DVector::zeros(l.fan_out()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &NetworkGradient) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.biases {
            *b *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

impl DenseNetwork {
    /// Builds a network with `widths.len() - 1` layers. Weights are drawn
    /// uniformly from ±sqrt(6 / fan_in), biases start at zero.
    pub fn new<R: Rng>(widths: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "network needs at least one layer (two widths)".into(),
            ));
        }
        if activations.len() != widths.len() - 1 {
            return Err(Error::DimensionMismatch {
                expected: widths.len() - 1,
                got: activations.len(),
                context: "one activation per layer",
            });
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument("zero-width layer".into()));
        }
        let mut layers = Vec::with_capacity(activations.len());
        for (i, &act) in activations.iter().enumerate() {
            let (fan_in, fan_out) = (widths[i], widths[i + 1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let weights = DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-bound..bound));
            layers.push(DenseLayer {
                weights,
                biases: DVector::zeros(fan_out),
                activation: act,
            });
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.fan_in())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.fan_out())
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.fan_in() * l.fan_out() + l.fan_out())
            .sum()
    }

    /// Layer widths in `new` order: input dimension followed by each fan-out.
    pub fn layer_widths(&self) -> Vec<usize> {
        let mut widths = vec![self.input_dim()];
        widths.extend(self.layers.iter().map(|l| l.fan_out()));
        widths
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let trace = self.forward_trace(DVector::from_column_slice(input))?;
        Ok(trace.output().iter().copied().collect())
    }

    pub fn forward_trace(&self, input: DVector<f64>) -> Result<ForwardTrace> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
                context: "network input",
            });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for layer in &self.layers {
            let z = &layer.weights * &current + &layer.biases;
            current = z.map(|v| layer.activation.apply(v));
            pre.push(z);
            post.push(current.clone());
        }
        Ok(ForwardTrace { input, pre, post })
    }

    /// Backpropagates `upstream` (dL/d output) through the pass recorded in
    /// `trace`, returning parameter gradients and dL/d input.
    pub fn backward_trace(
        &self,
        trace: &ForwardTrace,
        upstream: &DVector<f64>,
    ) -> Result<(NetworkGradient, DVector<f64>)> {
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
                context: "backward upstream",
            });
        }
        let mut grads = NetworkGradient::zeros_like(self);
        let mut delta = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let z = &trace.pre[i];
            for (d, zv) in delta.iter_mut().zip(z.iter()) {
                *d *= layer.activation.derivative(*zv);
            }
            let below = if i == 0 { &trace.input } else { &trace.post[i - 1] };
            grads.weights[i] = &delta * below.transpose();
            grads.biases[i] = delta.clone();
            delta = layer.weights.transpose() * delta;
        }
        Ok((grads, delta))
    }

    pub fn backward(
        &self,
        input: &[f64],
        upstream: &[f64],
    ) -> Result<(NetworkGradient, Vec<f64>)> {
        let trace = self.forward_trace(DVector::from_column_slice(input))?;
        let (grads, input_grad) =
            self.backward_trace(&trace, &DVector::from_column_slice(upstream))?;
        Ok((grads, input_grad.iter().copied().collect()))
    }

    pub fn write_to<W: Write>(&self, writer: &mut W) -> Result<()> {
        writer.write_all(MODEL_MAGIC)?;
        writer.write_all(&MODEL_VERSION.to_le_bytes())?;
        writer.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for layer in &self.layers {
            writer.write_all(&(layer.fan_in() as u32).to_le_bytes())?;
            writer.write_all(&(layer.fan_out() as u32).to_le_bytes())?;
            writer.write_all(&[layer.activation.tag()])?;
            for r in 0..layer.fan_out() {
                for c in 0..layer.fan_in() {
                    writer.write_all(&layer.weights[(r, c)].to_le_bytes())?;
                }
            }
            for b in layer.biases.iter() {
                writer.write_all(&b.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(reader: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        reader.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::ModelFormat("bad magic bytes".into()));
        }
        let version = read_u32(reader)?;
        if version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model version {version}"
            )));
        }
        let layer_count = read_u32(reader)? as usize;
        if layer_count == 0 || layer_count > 64 {
            return Err(Error::ModelFormat(format!(
                "implausible layer count {layer_count}"
            )));
        }
        let mut layers = Vec::with_capacity(layer_count);
        for _ in 0..layer_count {
            let fan_in = read_u32(reader)? as usize;
            let fan_out = read_u32(reader)? as usize;
            if fan_in == 0 || fan_out == 0 || fan_in > 1 << 20 || fan_out > 1 << 20 {
                return Err(Error::ModelFormat("implausible layer shape".into()));
            }
            let mut tag = [0u8; 1];
            reader.read_exact(&mut tag)?;
            let activation = Activation::from_tag(tag[0])?;
            let mut weights = DMatrix::zeros(fan_out, fan_in);
            for r in 0..fan_out {
                for c in 0..fan_in {
                    weights[(r, c)] = read_f64(reader)?;
                }
            }
            let mut biases = DVector::zeros(fan_out);
            for b in biases.iter_mut() {
                *b = read_f64(reader)?;
            }
            layers.push(DenseLayer {
                weights,
                biases,
                activation,
            });
        }
        Ok(Self { layers })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut file)
    }
}

fn read_u32<R: Read>(reader: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(reader: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    reader.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.is_empty() {
        return Err(Error::EmptyInput("mse_loss".into()));
    }
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: pred.len(),
            context: "mse_loss operands",
        });
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (p, t) in pred.iter().zip(target) {
        let d = p - t;
        loss += d * d;
        grad.push(2.0 * d / n);
    }
    Ok((loss / n, grad))
}

/// Binary cross-entropy for one probability. The probability is clamped to
/// [1e-7, 1 - 1e-7] before the logs so the loss and gradient stay finite.
pub fn bce_loss(prob: f64, label: f64) -> Result<(f64, f64)> {
    if label != 0.0 && label != 1.0 {
        return Err(Error::InvalidArgument(format!(
            "binary label must be 0 or 1, got {label}"
        )));
    }
    let eps = PROB_CLAMP;
    let p = prob.clamp(eps, 1.0 - eps);
    let loss = -label * p.ln() - (1.0 - label) * (1.0 - p).ln();
    let grad = if prob <= eps || prob >= 1.0 - eps {
        0.0
    } else {
        -label / p + (1.0 - label) / (1.0 - p)
    };
    Ok((loss, grad))
}

/// Adam first and second moments, one slot per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: NetworkGradient,
    v: NetworkGradient,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(net: &DenseNetwork) -> Self {
        Self {
            m: NetworkGradient::zeros_like(net),
            v: NetworkGradient::zeros_like(net),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One Adam update. Rejects non-finite gradients without touching the
/// parameters or the moment estimates.
pub fn adam_step(
    net: &mut DenseNetwork,
    grads: &NetworkGradient,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFinite("adam_step gradients".into()));
    }
    state.step += 1;
    let t = state.step as f64;
    let bias1 = 1.0 - state.beta1.powf(t);
    let bias2 = 1.0 - state.beta2.powf(t);
    for (i, layer) in net.layers.iter_mut().enumerate() {
        update_tensor(
            layer.weights.as_mut_slice(),
            grads.weights[i].as_slice(),
            state.m.weights[i].as_mut_slice(),
            state.v.weights[i].as_mut_slice(),
            state.beta1,
            state.beta2,
            state.epsilon,
            lr,
            bias1,
            bias2,
        );
        update_tensor(
            layer.biases.as_mut_slice(),
            grads.biases[i].as_slice(),
            state.m.biases[i].as_mut_slice(),
            state.v.biases[i].as_mut_slice(),
            state.beta1,
            state.beta2,
            state.epsilon,
            lr,
            bias1,
            bias2,
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn update_tensor(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    lr: f64,
    bias1: f64,
    bias2: f64,
) {
    for i in 0..params.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
    }
}
