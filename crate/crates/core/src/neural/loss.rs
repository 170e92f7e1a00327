//! Loss functions with analytic gradients.

use serde::{Deserialize, Serialize};

use super::NeuralError;
use crate::types::MatchLabel;

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_xent_from_logits(logits: [f64; 2], label: MatchLabel) -> f64 {
    let own = logits[label.class_index()];
    let other = logits[1 - label.class_index()];
    softplus(other - own)
}

/// `-ln softmax(logits)[label]`; genuine is class 0.
pub fn softmax_xent(logits: [f64; 2], label: MatchLabel) -> Result<f64, NeuralError> {
    if !(logits[0].is_finite() && logits[1].is_finite()) {
        return Err(NeuralError::NonFiniteInput);
    }
    Ok(softmax_xent_from_logits(logits, label))
}

fn check_batch(anchor: &[Vec<f64>], positive: &[Vec<f64>], negative: &[Vec<f64>], margin: f64) -> Result<(), NeuralError> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(NeuralError::InvalidMargin(margin));
    }
    if anchor.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    if positive.len() != anchor.len() || negative.len() != anchor.len() {
        return Err(NeuralError::ShapeMismatch(format!(
            "batch sizes differ: anchor {}, positive {}, negative {}",
            anchor.len(),
            positive.len(),
            negative.len()
        )));
    }
    let dim = anchor[0].len();
    for (i, ((a, p), n)) in anchor.iter().zip(positive).zip(negative).enumerate() {
        if a.len() != dim || p.len() != dim || n.len() != dim {
            return Err(NeuralError::ShapeMismatch(format!(
                "sample {i}: map sizes {}, {}, {} (expected {dim})",
                a.len(),
                p.len(),
                n.len()
            )));
        }
    }
    Ok(())
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Zeroes feature map entries outside the validity mask.
pub fn apply_mask(features: &[f64], mask: &[u8]) -> Vec<f64> {
    features.iter().zip(mask).map(|(f, &m)| if m == 1 { *f } else { 0.0 }).collect()
}

/// Batch-mean triplet hinge `max(|P-A|^2 - |N-A|^2 + margin, 0)` over
/// (already masked) feature maps, one flattened map per batch entry.
pub fn etl_loss(anchor: &[Vec<f64>], positive: &[Vec<f64>], negative: &[Vec<f64>], margin: f64) -> Result<f64, NeuralError> {
    check_batch(anchor, positive, negative, margin)?;
    let total: f64 =
        anchor.iter().zip(positive).zip(negative).map(|((a, p), n)| (sq_dist(p, a) - sq_dist(n, a) + margin).max(0.0)).sum();
    Ok(total / anchor.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtlGradient {
    pub loss: f64,
    pub anchor: Vec<Vec<f64>>,
    pub positive: Vec<Vec<f64>>,
    pub negative: Vec<Vec<f64>>,
}

pub fn etl_gradient(
    anchor: &[Vec<f64>],
    positive: &[Vec<f64>],
    negative: &[Vec<f64>],
    margin: f64,
) -> Result<EtlGradient, NeuralError> {
    check_batch(anchor, positive, negative, margin)?;
    let scale = 1.0 / anchor.len() as f64;
    let mut out = EtlGradient {
        loss: 0.0,
        anchor: Vec::with_capacity(anchor.len()),
        positive: Vec::with_capacity(anchor.len()),
        negative: Vec::with_capacity(anchor.len()),
    };
    for ((a, p), n) in anchor.iter().zip(positive).zip(negative) {
        let hinge = sq_dist(p, a) - sq_dist(n, a) + margin;
        let dim = a.len();
        if hinge > 0.0 {
            out.loss += hinge * scale;
            out.anchor.push((0..dim).map(|k| 2.0 * scale * (n[k] - p[k])).collect());
            out.positive.push((0..dim).map(|k| 2.0 * scale * (p[k] - a[k])).collect());
            out.negative.push((0..dim).map(|k| -2.0 * scale * (n[k] - a[k])).collect());
        } else {
            out.anchor.push(vec![0.0; dim]);
            out.positive.push(vec![0.0; dim]);
            out.negative.push(vec![0.0; dim]);
        }
    }
    Ok(out)
}

fn check_target(t: u8) -> Result<f64, NeuralError> {
    match t {
        0 => Ok(0.0),
        1 => Ok(1.0),
        _ => Err(NeuralError::InvalidTarget(t)),
    }
}

/// Sigmoid cross-entropy `-[t ln σ(s) + (1-t) ln(1-σ(s))]` of a transformed
/// pair distance `s`, with `t = 1` for genuine pairs.
pub fn dsc_loss(s: f64, t: u8) -> Result<f64, NeuralError> {
    let t = check_target(t)?;
    if !s.is_finite() {
        return Err(NeuralError::NonFiniteInput);
    }
    // -ln σ(s) = softplus(-s), -ln(1-σ(s)) = softplus(s)
    Ok(t * softplus(-s) + (1.0 - t) * softplus(s))
}

/// `d dsc_loss / ds = σ(s) - t`.
pub fn dsc_gradient(s: f64, t: u8) -> Result<f64, NeuralError> {
    let t = check_target(t)?;
    if !s.is_finite() {
        return Err(NeuralError::NonFiniteInput);
    }
    Ok(sigmoid(s) - t)
}

/// Batch mean of [`dsc_loss`].
pub fn dsc_batch_loss(batch: &[(f64, u8)]) -> Result<f64, NeuralError> {
    if batch.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    let mut total = 0.0;
    for &(s, t) in batch {
        total += dsc_loss(s, t)?;
    }
    Ok(total / batch.len() as f64)
}

/// Affine map from a Euclidean distance to the logit `s = beta * (tau - d)`,
/// so small distances give confident genuine predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceTransform {
    pub beta: f64,
    pub tau: f64,
}

impl DistanceTransform {
    /// `beta = 1`, `tau` = median of the training distances.
    pub fn fit_median(distances: &[f64]) -> Option<Self> {
        let mut d: Vec<f64> = distances.iter().copied().filter(|v| v.is_finite()).collect();
        if d.is_empty() {
            return None;
        }
        d.sort_by(f64::total_cmp);
        let m = d.len() / 2;
        let tau = if d.len() % 2 == 1 { d[m] } else { 0.5 * (d[m - 1] + d[m]) };
        Some(DistanceTransform { beta: 1.0, tau })
    }

    pub fn apply(&self, distance: f64) -> f64 {
        self.beta * (self.tau - distance)
    }

    /// DSC loss of a raw distance and its derivative with respect to the distance.
    pub fn loss_and_gradient(&self, distance: f64, t: u8) -> Result<(f64, f64), NeuralError> {
        let s = self.apply(distance);
        Ok((dsc_loss(s, t)?, -self.beta * dsc_gradient(s, t)?))
    }
}
