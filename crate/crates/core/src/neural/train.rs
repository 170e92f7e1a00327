use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::loss::softmax_xent_from_logits;
use super::mlp::{accumulate_gradient, forward_trace, MlpParams, PARAM_COUNT};
use crate::types::{CueVector, MatchLabel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training data has no {missing} samples")]
    SingleClass { missing: &'static str },
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Impostor samples drawn per genuine sample in every epoch.
    pub genuine_impostor_ratio: f64,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    /// Stop once the monitored loss has not improved by `min_rel_improvement`
    /// (relative) for this many epochs. Zero disables early stopping.
    pub patience: usize,
    pub min_rel_improvement: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 500,
            seed: 0,
            genuine_impostor_ratio: 2.0,
            optimizer: OptimizerKind::SgdMomentum,
            momentum: 0.9,
            patience: 20,
            min_rel_improvement: 1e-6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.genuine_impostor_ratio > 0.0 && self.genuine_impostor_ratio.is_finite()) {
            return bad("genuine_impostor_ratio must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the lowest monitored loss.
    pub params: MlpParams,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Monitored loss after every epoch.
    pub history: Vec<f64>,
}

/// Per-class cap on the fixed monitoring subset.
const MONITOR_CAP: usize = 4096;

struct Monitor {
    genuine: Vec<usize>,
    impostor: Vec<usize>,
    ratio: f64,
}

impl Monitor {
    /// Class-weighted mean loss, weighting impostors by the sampling ratio.
    fn loss(&self, params: &MlpParams, data: &[(CueVector, MatchLabel)]) -> f64 {
        let mean = |idx: &[usize]| {
            idx.iter()
                .map(|&i| {
                    let (c, l) = &data[i];
                    softmax_xent_from_logits(forward_trace(params, &c.to_array()).logits, *l)
                })
                .sum::<f64>()
                / idx.len() as f64
        };
        (mean(&self.genuine) + self.ratio * mean(&self.impostor)) / (1.0 + self.ratio)
    }
}

fn subsample(rng: &mut ChaCha8Rng, pool: &[usize], n: usize) -> Vec<usize> {
    if n >= pool.len() {
        return pool.to_vec();
    }
    let mut picked: Vec<usize> = index::sample(rng, pool.len(), n).into_iter().map(|k| pool[k]).collect();
    picked.sort_unstable();
    picked
}

enum Optimizer {
    Momentum { velocity: Vec<f64>, momentum: f64 },
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
}

impl Optimizer {
    fn new(config: &TrainConfig) -> Self {
        match config.optimizer {
            OptimizerKind::SgdMomentum => Optimizer::Momentum { velocity: vec![0.0; PARAM_COUNT], momentum: config.momentum },
            OptimizerKind::Adam => Optimizer::Adam { m: vec![0.0; PARAM_COUNT], v: vec![0.0; PARAM_COUNT], t: 0 },
        }
    }

    fn step(&mut self, params: &mut MlpParams, grad: &MlpParams, lr: f64) {
        let theta = params.as_mut_slice();
        let g = grad.as_slice();
        match self {
            Optimizer::Momentum { velocity, momentum } => {
                for ((p, v), g) in theta.iter_mut().zip(velocity.iter_mut()).zip(g) {
                    *v = *momentum * *v - lr * g;
                    *p += *v;
                }
            }
            Optimizer::Adam { m, v, t } => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                const EPS: f64 = 1e-8;
                *t += 1;
                let c1 = 1.0 - B1.powi(*t);
                let c2 = 1.0 - B2.powi(*t);
                for (((p, m), v), g) in theta.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                    *m = B1 * *m + (1.0 - B1) * g;
                    *v = B2 * *v + (1.0 - B2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                }
            }
        }
    }
}

/// Mini-batch training of the fusion network with softmax cross-entropy.
///
/// Each epoch draws a class-balanced sample (all of the scarcer class, the
/// other class subsampled to `genuine_impostor_ratio`), shuffles it and takes
/// one optimizer step per mini-batch. Everything random derives from
/// `config.seed`, so identical inputs give bit-identical parameters.
pub fn train_mlp(data: &[(CueVector, MatchLabel)], config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let genuine: Vec<usize> = (0..data.len()).filter(|&i| data[i].1 == MatchLabel::Genuine).collect();
    let impostor: Vec<usize> = (0..data.len()).filter(|&i| data[i].1 == MatchLabel::Impostor).collect();
    if genuine.is_empty() {
        return Err(TrainError::SingleClass { missing: "genuine" });
    }
    if impostor.is_empty() {
        return Err(TrainError::SingleClass { missing: "impostor" });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = MlpParams::glorot(&mut rng);
    let ratio = config.genuine_impostor_ratio;

    let monitor = Monitor {
        genuine: subsample(&mut rng, &genuine, MONITOR_CAP),
        impostor: subsample(&mut rng, &impostor, MONITOR_CAP),
        ratio,
    };
    let initial_loss = monitor.loss(&params, data);
    if !initial_loss.is_finite() {
        return Err(TrainError::Diverged { epoch: 0 });
    }

    let wanted_impostors = (ratio * genuine.len() as f64).round() as usize;
    let (n_gen, n_imp) = if wanted_impostors <= impostor.len() {
        (genuine.len(), wanted_impostors.max(1))
    } else {
        (((impostor.len() as f64 / ratio).round() as usize).clamp(1, genuine.len()), impostor.len())
    };

    let mut optimizer = Optimizer::new(config);
    let mut grad = MlpParams::zeros();
    let mut best = (initial_loss, params.clone(), 0usize);
    let mut plateau_ref = (initial_loss, 0usize);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let mut order = subsample(&mut rng, &genuine, n_gen);
        order.extend(subsample(&mut rng, &impostor, n_imp));
        order.shuffle(&mut rng);

        for batch in order.chunks(config.batch_size) {
            grad.as_mut_slice().fill(0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (c, l) = &data[i];
                accumulate_gradient(&params, &c.to_array(), *l, scale, &mut grad);
            }
            if grad.as_slice().iter().any(|g| !g.is_finite()) {
                return Err(TrainError::Diverged { epoch });
            }
            optimizer.step(&mut params, &grad, config.learning_rate);
            if params.as_slice().iter().any(|p| !p.is_finite()) {
                return Err(TrainError::Diverged { epoch });
            }
        }

        let loss = monitor.loss(&params, data);
        if !loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        history.push(loss);
        if loss < best.0 {
            best = (loss, params.clone(), epoch);
        }
        if loss < plateau_ref.0 * (1.0 - config.min_rel_improvement) {
            plateau_ref = (loss, epoch);
        } else if config.patience > 0 && epoch - plateau_ref.1 >= config.patience {
            break;
        }
    }

    let (final_loss, params, best_epoch) = best;
    Ok(TrainOutcome { params, initial_loss, final_loss, epochs_run: history.len(), best_epoch, history })
}

/// Fraction of samples whose larger softmax output matches the label.
pub fn accuracy(params: &MlpParams, data: &[(CueVector, MatchLabel)]) -> f64 {
    let correct = data
        .iter()
        .filter(|(c, l)| {
            let p = forward_trace(params, &c.to_array()).probs;
            let predicted = if p[0] >= p[1] { MatchLabel::Genuine } else { MatchLabel::Impostor };
            predicted == *l
        })
        .count();
    correct as f64 / data.len() as f64
}
