//! Masked comparison of binary iris templates.
//!
//! Every score is computed over jointly valid pixels and searched over
//! circular column offsets. At offset `s`, column `j` of the first template is
//! compared with column `j + s` (mod width) of the second, so a second
//! template that equals the first rotated right by `k` columns aligns at
//! `s = k`.

mod kernel;
pub mod oracle;
pub mod reference;

pub use kernel::{PackedTemplate, PairKernel, ShiftCounts};

use crate::types::IrisTemplate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default weight parameter of the weighted similarity.
pub const DEFAULT_ALPHA: f64 = 0.3;
pub const DEFAULT_MAX_SHIFT: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("template shapes differ: {a_height}x{a_width} vs {b_height}x{b_width}")]
    DimensionMismatch { a_height: usize, a_width: usize, b_height: usize, b_width: usize },
    #[error("no jointly valid pixel at any searched offset")]
    EmptyJointMask,
    #[error("alpha = {0} is outside the open interval (0, 2)")]
    AlphaOutOfRange(f64),
    #[error("{colour} match rate is undefined: neither template has {colour} pixels in the joint mask")]
    UndefinedRate { colour: &'static str },
    #[error("invalid shift policy: max_shift {max_shift} is not a multiple of step {step}")]
    InvalidPolicy { max_shift: usize, step: usize },
}

/// The set of circular column offsets searched during matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftPolicy {
    max_shift: usize,
    step: usize,
}

impl Default for ShiftPolicy {
    fn default() -> Self {
        ShiftPolicy { max_shift: DEFAULT_MAX_SHIFT, step: 1 }
    }
}

impl ShiftPolicy {
    pub fn new(max_shift: usize, step: usize) -> Result<Self, MatchError> {
        if step == 0 || max_shift % step != 0 {
            return Err(MatchError::InvalidPolicy { max_shift, step });
        }
        Ok(ShiftPolicy { max_shift, step })
    }

    /// Zero offset only.
    pub fn none() -> Self {
        ShiftPolicy { max_shift: 0, step: 1 }
    }

    pub fn max_shift(&self) -> usize {
        self.max_shift
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Offsets in preference order: `0, -step, +step, -2*step, ...`.
    /// Selecting the first strict optimum in this order realizes the
    /// tie-break (smallest magnitude, then negative).
    pub fn offsets(&self) -> impl Iterator<Item = i64> + '_ {
        let step = self.step as i64;
        let n = (self.max_shift / self.step) as i64;
        std::iter::once(0).chain((1..=n).flat_map(move |k| [-k * step, k * step]))
    }
}

/// How the weighted similarity is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WsNormalization {
    /// Sum over jointly valid pixels divided by their count.
    #[default]
    JointValid,
    /// Sum over all pixels divided by `height * width`, masks ignored.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub alpha: f64,
    pub policy: ShiftPolicy,
    pub ws_normalization: WsNormalization,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { alpha: DEFAULT_ALPHA, policy: ShiftPolicy::default(), ws_normalization: WsNormalization::JointValid }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HammingMatch {
    pub distance: f64,
    pub best_shift: i64,
    pub joint_valid: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsMatch {
    pub score: f64,
    pub best_shift: i64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskRates {
    pub joint: f64,
    pub a: f64,
    pub b: f64,
}

/// Everything the fusion stage needs from one iris comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrisMatchResult {
    pub hamming: f64,
    pub ws_score: f64,
    /// Offset minimizing the Hamming distance.
    pub best_shift: i64,
    /// Offset maximizing the weighted similarity.
    pub ws_shift: i64,
    /// Jointly valid pixels at `best_shift`.
    pub joint_valid: u64,
    pub mask_rate_a: f64,
    pub mask_rate_b: f64,
}

fn check_shapes(a: &IrisTemplate, b: &IrisTemplate) -> Result<(), MatchError> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(MatchError::DimensionMismatch { a_height: a.height(), a_width: a.width(), b_height: b.height(), b_width: b.width() })
    }
}

fn check_alpha(alpha: f64) -> Result<(), MatchError> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(MatchError::AlphaOutOfRange(alpha))
    }
}

/// Counts at every offset of `policy`, in preference order.
pub fn shift_counts(a: &IrisTemplate, b: &IrisTemplate, policy: &ShiftPolicy) -> Result<Vec<ShiftCounts>, MatchError> {
    check_shapes(a, b)?;
    let (a, b) = (PackedTemplate::new(a), PackedTemplate::new(b));
    let kernel = PairKernel::new(&a, &b);
    Ok(policy.offsets().map(|s| kernel.counts(s)).collect())
}

fn best_hamming(counts: &[ShiftCounts]) -> Result<HammingMatch, MatchError> {
    let mut best: Option<&ShiftCounts> = None;
    for c in counts.iter().filter(|c| c.joint > 0) {
        // mismatches/joint < best.mismatches/best.joint, exact in integers
        let better = best.is_none_or(|b| (c.mismatches as u128) * (b.joint as u128) < (b.mismatches as u128) * (c.joint as u128));
        if better {
            best = Some(c);
        }
    }
    let c = best.ok_or(MatchError::EmptyJointMask)?;
    Ok(HammingMatch { distance: c.mismatches as f64 / c.joint as f64, best_shift: c.shift, joint_valid: c.joint })
}

fn ws_value(c: &ShiftCounts, alpha: f64, mode: WsNormalization, pixels: usize) -> Option<f64> {
    match mode {
        WsNormalization::JointValid => {
            (c.joint > 0).then(|| ((2.0 - alpha) * c.ones as f64 + alpha * c.zeros as f64) / c.joint as f64)
        }
        WsNormalization::Literal => Some(((2.0 - alpha) * c.ones_all as f64 + alpha * c.zeros_all as f64) / pixels as f64),
    }
}

fn best_ws(counts: &[ShiftCounts], alpha: f64, mode: WsNormalization, pixels: usize) -> Result<WsMatch, MatchError> {
    let mut best: Option<WsMatch> = None;
    for c in counts {
        if let Some(score) = ws_value(c, alpha, mode, pixels) {
            if best.is_none_or(|b| score > b.score) {
                best = Some(WsMatch { score, best_shift: c.shift });
            }
        }
    }
    best.ok_or(MatchError::EmptyJointMask)
}

/// Normalized masked Hamming distance, minimized over the policy's offsets.
pub fn masked_hamming(a: &IrisTemplate, b: &IrisTemplate, policy: &ShiftPolicy) -> Result<HammingMatch, MatchError> {
    best_hamming(&shift_counts(a, b, policy)?)
}

/// Weighted similarity over jointly valid pixels, maximized over offsets.
/// 1-1 agreements score `2 - alpha`, 0-0 agreements score `alpha`.
pub fn weighted_similarity(a: &IrisTemplate, b: &IrisTemplate, alpha: f64, policy: &ShiftPolicy) -> Result<WsMatch, MatchError> {
    weighted_similarity_with(a, b, alpha, policy, WsNormalization::JointValid)
}

pub fn weighted_similarity_with(
    a: &IrisTemplate,
    b: &IrisTemplate,
    alpha: f64,
    policy: &ShiftPolicy,
    mode: WsNormalization,
) -> Result<WsMatch, MatchError> {
    check_alpha(alpha)?;
    let counts = shift_counts(a, b, policy)?;
    best_ws(&counts, alpha, mode, a.pixels())
}

fn zero_offset(a: &IrisTemplate, b: &IrisTemplate) -> Result<ShiftCounts, MatchError> {
    check_shapes(a, b)?;
    let (a, b) = (PackedTemplate::new(a), PackedTemplate::new(b));
    Ok(PairKernel::new(&a, &b).counts(0))
}

fn colour_rate(matches: u64, pa: u64, pb: u64, colour: &'static str) -> Result<f64, MatchError> {
    if pa + pb == 0 {
        return Err(MatchError::UndefinedRate { colour });
    }
    Ok(2.0 * matches as f64 / (pa + pb) as f64)
}

/// `2 * M_W / (P_W(a) + P_W(b))` at zero offset over jointly valid pixels.
pub fn white_match_rate(a: &IrisTemplate, b: &IrisTemplate) -> Result<f64, MatchError> {
    let c = zero_offset(a, b)?;
    colour_rate(c.ones, c.a_ones, c.b_ones, "white")
}

/// Black-pixel counterpart of [`white_match_rate`].
pub fn black_match_rate(a: &IrisTemplate, b: &IrisTemplate) -> Result<f64, MatchError> {
    let c = zero_offset(a, b)?;
    colour_rate(c.zeros, c.joint - c.a_ones, c.joint - c.b_ones, "black")
}

pub fn mask_rate(a: &IrisTemplate, b: &IrisTemplate) -> Result<MaskRates, MatchError> {
    let c = zero_offset(a, b)?;
    let n = a.pixels() as f64;
    Ok(MaskRates { joint: c.joint as f64 / n, a: a.mask().count_ones() as f64 / n, b: b.mask().count_ones() as f64 / n })
}

/// Full comparison of one pair: Hamming distance, weighted similarity and
/// per-template mask rates from a single pass over the offsets.
pub fn match_templates(a: &IrisTemplate, b: &IrisTemplate, config: &MatchConfig) -> Result<IrisMatchResult, MatchError> {
    check_shapes(a, b)?;
    match_packed(&PackedTemplate::new(a), &PackedTemplate::new(b), config)
}

/// [`match_templates`] on templates packed ahead of time, for scoring many
/// pairs over the same gallery.
pub fn match_packed(a: &PackedTemplate, b: &PackedTemplate, config: &MatchConfig) -> Result<IrisMatchResult, MatchError> {
    check_alpha(config.alpha)?;
    if !a.same_shape(b) {
        return Err(MatchError::DimensionMismatch {
            a_height: a.height(),
            a_width: a.width(),
            b_height: b.height(),
            b_width: b.width(),
        });
    }
    let kernel = PairKernel::new(a, b);
    let counts: Vec<ShiftCounts> = config.policy.offsets().map(|s| kernel.counts(s)).collect();
    let hd = best_hamming(&counts)?;
    let ws = best_ws(&counts, config.alpha, config.ws_normalization, a.pixels())?;
    let n = a.pixels() as f64;
    Ok(IrisMatchResult {
        hamming: hd.distance,
        ws_score: ws.score,
        best_shift: hd.best_shift,
        ws_shift: ws.best_shift,
        joint_valid: hd.joint_valid,
        mask_rate_a: a.mask_ones() as f64 / n,
        mask_rate_b: b.mask_ones() as f64 / n,
    })
}
