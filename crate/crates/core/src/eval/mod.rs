//! Verification protocol: pair generation, sum-rule combination and
//! ROC / EER / TAR@FAR metrics.

mod metrics;
mod pairs;

use thiserror::Error;

pub use metrics::{auc, eer, eer_from_roc, roc_curve, tar_at_far, RocMode, RocPoint, TarAtFar};
pub use pairs::{
    expected_pair_counts, generate_pairs, sum_rule_combine, EyeSide, Manifest, ManifestEntry, Pair, PairSet, Protocol,
};

/// Default operating point for TAR reporting.
pub const DEFAULT_FAR_TARGET: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("need at least 2 subjects, found {0}")]
    TooFewSubjects(usize),
    #[error("duplicate manifest entry {id} at index {index}")]
    DuplicateEntry { index: usize, id: String },
    #[error("score lists differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no {0} scores")]
    EmptyClass(&'static str),
    #[error("{class} score {index} is not finite")]
    NonFinite { class: &'static str, index: usize },
    #[error("FAR target {0} must lie in (0, 1]")]
    InvalidFarTarget(f64),
    #[error("binned ROC needs at least 2 thresholds, got {0}")]
    InvalidResolution(usize),
}

/// Labeled scores of one method on one protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
    pub higher_is_genuine: bool,
}

impl ScoreSet {
    pub fn new(genuine: Vec<f64>, impostor: Vec<f64>, higher_is_genuine: bool) -> Result<Self, EvalError> {
        for (class, v) in [("genuine", &genuine), ("impostor", &impostor)] {
            if let Some(index) = v.iter().position(|s| !s.is_finite()) {
                return Err(EvalError::NonFinite { class, index });
            }
        }
        Ok(ScoreSet { genuine, impostor, higher_is_genuine })
    }

    /// Applies `f` to every score, keeping the orientation.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, EvalError> {
        Self::new(
            self.genuine.iter().map(|&s| f(s)).collect(),
            self.impostor.iter().map(|&s| f(s)).collect(),
            self.higher_is_genuine,
        )
    }
}
