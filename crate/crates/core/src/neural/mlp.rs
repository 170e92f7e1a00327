use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::loss::softmax_xent_from_logits;
use super::NeuralError;
use crate::types::{CueVector, MatchLabel, CUE_COUNT};

/// `(inputs, outputs)` of the four fully connected layers.
pub const LAYER_SHAPES: [(usize, usize); 4] = [(CUE_COUNT, 32), (32, 16), (16, 8), (8, 2)];

/// Total number of weights and biases.
pub const PARAM_COUNT: usize = {
    let mut n = 0;
    let mut i = 0;
    while i < LAYER_SHAPES.len() {
        n += LAYER_SHAPES[i].0 * LAYER_SHAPES[i].1 + LAYER_SHAPES[i].1;
        i += 1;
    }
    n
};

const fn layer_offset(layer: usize) -> usize {
    let mut n = 0;
    let mut i = 0;
    while i < layer {
        n += LAYER_SHAPES[i].0 * LAYER_SHAPES[i].1 + LAYER_SHAPES[i].1;
        i += 1;
    }
    n
}

/// Weights and biases of the fusion network, stored flat.
///
/// Layer `l` occupies `outputs * inputs` row-major weights (row = output
/// unit) followed by `outputs` biases. Gradients share this layout.
#[derive(Clone, PartialEq, Debug)]
pub struct MlpParams {
    data: Vec<f64>,
}

pub struct Layer<'a> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

impl MlpParams {
    pub fn zeros() -> Self {
        MlpParams { data: vec![0.0; PARAM_COUNT] }
    }

    pub fn from_flat(data: Vec<f64>) -> Result<Self, NeuralError> {
        if data.len() != PARAM_COUNT {
            return Err(NeuralError::ParamCount { expected: PARAM_COUNT, actual: data.len() });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(NeuralError::NonFiniteParam { index });
        }
        Ok(MlpParams { data })
    }

    /// Assembles parameters from per-layer `(weights, bias)` pairs.
    pub fn from_layers(layers: &[(Vec<f64>, Vec<f64>)]) -> Result<Self, NeuralError> {
        if layers.len() != LAYER_SHAPES.len() {
            return Err(NeuralError::LayerShape {
                layer: layers.len(),
                detail: format!("expected {} layers", LAYER_SHAPES.len()),
            });
        }
        let mut data = Vec::with_capacity(PARAM_COUNT);
        for (l, ((w, b), &(inputs, outputs))) in layers.iter().zip(LAYER_SHAPES.iter()).enumerate() {
            if w.len() != inputs * outputs || b.len() != outputs {
                return Err(NeuralError::LayerShape {
                    layer: l,
                    detail: format!(
                        "expected {}x{} weights and {} biases, got {} and {}",
                        outputs,
                        inputs,
                        outputs,
                        w.len(),
                        b.len()
                    ),
                });
            }
            data.extend_from_slice(w);
            data.extend_from_slice(b);
        }
        Self::from_flat(data)
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut p = Self::zeros();
        for (l, &(inputs, outputs)) in LAYER_SHAPES.iter().enumerate() {
            let limit = (6.0 / (inputs + outputs) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
            let (w, _) = p.layer_mut(l);
            for v in w.iter_mut() {
                *v = dist.sample(rng);
            }
        }
        p
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn layer(&self, l: usize) -> Layer<'_> {
        let (inputs, outputs) = LAYER_SHAPES[l];
        let start = layer_offset(l);
        let mid = start + inputs * outputs;
        Layer { inputs, outputs, weights: &self.data[start..mid], bias: &self.data[mid..mid + outputs] }
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (inputs, outputs) = LAYER_SHAPES[l];
        let start = layer_offset(l);
        let (w, rest) = self.data[start..start + inputs * outputs + outputs].split_at_mut(inputs * outputs);
        (w, rest)
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Activations recorded during a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `layers[0]` is the input; `layers[1..=3]` are tanh outputs.
    pub layers: Vec<Vec<f64>>,
    pub logits: [f64; 2],
    pub probs: [f64; 2],
}

fn dense(layer: &Layer<'_>, input: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for o in 0..layer.outputs {
        let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
        let z = row.iter().zip(input).fold(layer.bias[o], |acc, (w, x)| acc + w * x);
        out.push(z);
    }
}

/// Two-class softmax, shifted by the max logit.
pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

pub fn forward_trace(params: &MlpParams, input: &[f64; CUE_COUNT]) -> ForwardTrace {
    let mut layers = Vec::with_capacity(4);
    layers.push(input.to_vec());
    let mut z = Vec::new();
    for l in 0..3 {
        dense(&params.layer(l), &layers[l], &mut z);
        layers.push(z.iter().map(|v| v.tanh()).collect());
    }
    dense(&params.layer(3), &layers[3], &mut z);
    let logits = [z[0], z[1]];
    ForwardTrace { layers, logits, probs: softmax2(logits) }
}

pub fn mlp_logits(params: &MlpParams, cues: &CueVector) -> [f64; 2] {
    forward_trace(params, &cues.to_array()).logits
}

/// `(p_genuine, p_impostor)` from the softmax output layer.
pub fn mlp_forward(params: &MlpParams, cues: &CueVector) -> Result<(f64, f64), NeuralError> {
    let t = forward_trace(params, &cues.to_array());
    if !(t.logits[0].is_finite() && t.logits[1].is_finite()) {
        return Err(NeuralError::NonFiniteOutput);
    }
    Ok((t.probs[0], t.probs[1]))
}

/// Loss and analytic gradient of softmax cross-entropy through the network.
pub fn mlp_gradient(params: &MlpParams, cues: &CueVector, label: MatchLabel) -> (f64, MlpParams) {
    let mut grad = MlpParams::zeros();
    let loss = accumulate_gradient(params, &cues.to_array(), label, 1.0, &mut grad);
    (loss, grad)
}

/// Adds `scale * dL/dθ` into `grad` and returns the unscaled loss.
pub(crate) fn accumulate_gradient(
    params: &MlpParams,
    input: &[f64; CUE_COUNT],
    label: MatchLabel,
    scale: f64,
    grad: &mut MlpParams,
) -> f64 {
    let trace = forward_trace(params, input);
    let loss = softmax_xent_from_logits(trace.logits, label);

    // dL/dlogits = p - onehot
    let mut delta: Vec<f64> = trace.probs.to_vec();
    delta[label.class_index()] -= 1.0;

    for l in (0..4).rev() {
        let layer = params.layer(l);
        let input = &trace.layers[l];
        {
            let (gw, gb) = grad.layer_mut(l);
            for o in 0..layer.outputs {
                let d = delta[o] * scale;
                gb[o] += d;
                for (gwi, xi) in gw[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(input) {
                    *gwi += d * xi;
                }
            }
        }
        if l == 0 {
            break;
        }
        // Back through the weights, then through tanh of the previous layer.
        let mut prev = vec![0.0; layer.inputs];
        for (row, d) in layer.weights.chunks(layer.inputs).zip(&delta) {
            for (p, w) in prev.iter_mut().zip(row) {
                *p += w * d;
            }
        }
        for (p, h) in prev.iter_mut().zip(input) {
            *p *= 1.0 - h * h;
        }
        delta = prev;
    }
    loss
}
