use serde::{Deserialize, Serialize};

use super::IoError;
use crate::fusion::NormalizationParams;
use crate::neural::{MlpParams, TrainConfig, TrainOutcome, LAYER_SHAPES};

pub const CHECKPOINT_FORMAT: &str = "irisfuse-mlp";
pub const CHECKPOINT_VERSION: u32 = 1;
const ACTIVATIONS: [&str; 4] = ["tanh", "tanh", "tanh", "softmax"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: String,
    /// One row of `inputs` weights per output unit.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// Trained fusion network plus everything needed to score with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub layers: Vec<LayerRecord>,
    pub normalization: NormalizationParams,
    pub train_config: TrainConfig,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs_run: usize,
}

impl Checkpoint {
    pub fn new(outcome: &TrainOutcome, normalization: NormalizationParams, train_config: TrainConfig) -> Self {
        let params = &outcome.params;
        let layers = (0..LAYER_SHAPES.len())
            .map(|l| {
                let layer = params.layer(l);
                LayerRecord {
                    inputs: layer.inputs,
                    outputs: layer.outputs,
                    activation: ACTIVATIONS[l].to_string(),
                    weights: layer.weights.chunks(layer.inputs).map(<[f64]>::to_vec).collect(),
                    bias: layer.bias.to_vec(),
                }
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            layers,
            normalization,
            train_config,
            initial_loss: outcome.initial_loss,
            final_loss: outcome.final_loss,
            epochs_run: outcome.epochs_run,
        }
    }

    /// Rebuilds the flat parameter vector, checking every shape.
    pub fn params(&self) -> Result<MlpParams, IoError> {
        let bad = |m: String| IoError::Checkpoint(m);
        if self.layers.len() != LAYER_SHAPES.len() {
            return Err(bad(format!("expected {} layers, found {}", LAYER_SHAPES.len(), self.layers.len())));
        }
        let mut flat = Vec::new();
        for (l, (rec, &(inputs, outputs))) in self.layers.iter().zip(&LAYER_SHAPES).enumerate() {
            if (rec.inputs, rec.outputs) != (inputs, outputs) {
                return Err(bad(format!("layer {l} is {}x{}, expected {inputs}x{outputs}", rec.inputs, rec.outputs)));
            }
            if rec.activation != ACTIVATIONS[l] {
                return Err(bad(format!("layer {l} activation {:?}, expected {:?}", rec.activation, ACTIVATIONS[l])));
            }
            if rec.weights.len() != outputs || rec.weights.iter().any(|row| row.len() != inputs) || rec.bias.len() != outputs {
                return Err(bad(format!("layer {l} weight or bias shape does not match {inputs}x{outputs}")));
            }
            rec.weights.iter().for_each(|row| flat.extend_from_slice(row));
            flat.extend_from_slice(&rec.bias);
        }
        MlpParams::from_flat(flat).map_err(|e| bad(e.to_string()))
    }
}

pub fn encode_checkpoint(c: &Checkpoint) -> Result<Vec<u8>, IoError> {
    let mut out = serde_json::to_vec_pretty(c).map_err(|e| IoError::Checkpoint(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, IoError> {
    let c: Checkpoint = serde_json::from_slice(bytes)
        .map_err(|e| IoError::Parse { line: e.line() as u64, detail: format!("checkpoint: {e}") })?;
    if c.format != CHECKPOINT_FORMAT {
        return Err(IoError::Checkpoint(format!("format {:?}, expected {CHECKPOINT_FORMAT:?}", c.format)));
    }
    if c.version != CHECKPOINT_VERSION {
        return Err(IoError::Checkpoint(format!("unsupported version {}", c.version)));
    }
    c.params()?;
    NormalizationParams::new(c.normalization.perioc_min, c.normalization.perioc_max)
        .map_err(|e| IoError::Checkpoint(e.to_string()))?;
    c.train_config.validate().map_err(|e| IoError::Checkpoint(e.to_string()))?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let params = MlpParams::glorot(&mut ChaCha8Rng::seed_from_u64(9));
        let outcome =
            TrainOutcome { params, initial_loss: 0.7, final_loss: 0.1, epochs_run: 42, best_epoch: 40, history: vec![] };
        Checkpoint::new(&outcome, NormalizationParams::new(12.5, 40.0).unwrap(), TrainConfig::default())
    }

    #[test]
    fn round_trip_is_lossless() {
        let c = sample();
        let bytes = encode_checkpoint(&c).unwrap();
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.params().unwrap(), MlpParams::glorot(&mut ChaCha8Rng::seed_from_u64(9)));
        assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
    }

    #[test]
    fn shape_metadata() {
        let c = sample();
        let shapes: Vec<(usize, usize)> = c.layers.iter().map(|l| (l.inputs, l.outputs)).collect();
        assert_eq!(shapes, vec![(8, 32), (32, 16), (16, 8), (8, 2)]);
        assert_eq!(c.layers[3].activation, "softmax");
    }

    #[test]
    fn rejects_tampering() {
        let mut c = sample();
        c.layers[1].weights[3].pop();
        assert!(matches!(decode_checkpoint(&encode_checkpoint(&c).unwrap()), Err(IoError::Checkpoint(_))));
        let mut c = sample();
        c.version = 2;
        assert!(decode_checkpoint(&encode_checkpoint(&c).unwrap()).is_err());
        let mut c = sample();
        c.layers[0].activation = "relu".into();
        assert!(decode_checkpoint(&encode_checkpoint(&c).unwrap()).is_err());
        let mut c = sample();
        c.normalization.perioc_max = 1.0;
        assert!(decode_checkpoint(&encode_checkpoint(&c).unwrap()).is_err());
        let text = String::from_utf8(encode_checkpoint(&sample()).unwrap()).unwrap();
        assert!(decode_checkpoint(text.replacen("\"version\"", "\"extra\": 1,\n  \"version\"", 1).as_bytes()).is_err());
        assert!(matches!(decode_checkpoint(b"{\n\"format\": 3"), Err(IoError::Parse { line: 2, .. })));
    }
}
