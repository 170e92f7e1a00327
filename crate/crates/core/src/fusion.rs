//! Cue assembly, periocular distances and the static/dynamic score fusers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitmatch::IrisMatchResult;
use crate::neural::{mlp_forward, MlpParams, NeuralError};
use crate::types::{CueVector, PeriocularRecord, TypeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("periocular dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("iris score missing: the pair has no jointly valid iris pixels")]
    IrisMissing,
    #[error("static weight {0} is outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("invalid normalization range [{min}, {max}]")]
    InvalidNormalization { min: f64, max: f64 },
    #[error(transparent)]
    Cue(#[from] TypeError),
    #[error(transparent)]
    Network(#[from] NeuralError),
}

/// Training-set range of raw periocular distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub perioc_min: f64,
    pub perioc_max: f64,
}

impl NormalizationParams {
    pub fn new(perioc_min: f64, perioc_max: f64) -> Result<Self, FusionError> {
        if !(perioc_min.is_finite() && perioc_max.is_finite() && perioc_min < perioc_max) {
            return Err(FusionError::InvalidNormalization { min: perioc_min, max: perioc_max });
        }
        Ok(NormalizationParams { perioc_min, perioc_max })
    }

    /// Min/max over the finite entries of `distances`.
    pub fn fit(distances: impl IntoIterator<Item = f64>) -> Result<Self, FusionError> {
        let (lo, hi) = distances
            .into_iter()
            .filter(|d| d.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        Self::new(lo, hi)
    }

    /// `(d - min) / (max - min)` clamped to `[0, 1]`.
    pub fn normalize(&self, distance: f64) -> f64 {
        ((distance - self.perioc_min) / (self.perioc_max - self.perioc_min)).clamp(0.0, 1.0)
    }
}

/// Euclidean distance between two periocular feature vectors.
pub fn perioc_distance(a: &PeriocularRecord, b: &PeriocularRecord) -> Result<f64, FusionError> {
    if a.dim() != b.dim() {
        return Err(FusionError::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(a.features().iter().zip(b.features()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Builds the eight network inputs for one pair. `iris` is `None` when the
/// iris comparison failed for lack of jointly valid pixels.
pub fn assemble_cues(
    iris: Option<&IrisMatchResult>,
    perioc_d: f64,
    norm: &NormalizationParams,
    a: &PeriocularRecord,
    b: &PeriocularRecord,
) -> Result<CueVector, FusionError> {
    let iris = iris.ok_or(FusionError::IrisMissing)?;
    let cues = CueVector {
        iris_score: iris.ws_score,
        perioc_dist: norm.normalize(perioc_d),
        mask_rate_a: iris.mask_rate_a,
        mask_rate_b: iris.mask_rate_b,
        eye_sum: a.eye_area() + b.eye_area(),
        eye_diff: a.eye_area() - b.eye_area(),
        brow_sum: a.brow_area() + b.brow_area(),
        brow_diff: a.brow_area() - b.brow_area(),
    };
    cues.validate()?;
    Ok(cues)
}

/// `w * iris_score + (1 - w) * perioc_score`.
pub fn static_fuse(iris_score: f64, perioc_score: f64, w: f64) -> Result<f64, FusionError> {
    if !(0.0..=1.0).contains(&w) {
        return Err(FusionError::WeightOutOfRange(w));
    }
    Ok(w * iris_score + (1.0 - w) * perioc_score)
}

/// Maps raw matcher outputs onto common higher-is-genuine `[0, 1]` scales:
/// the weighted similarity divided by its maximum `max(alpha, 2 - alpha)`,
/// and one minus the normalized periocular distance.
pub fn static_inputs(ws_score: f64, alpha: f64, perioc_norm: f64) -> (f64, f64) {
    (ws_score / alpha.max(2.0 - alpha), 1.0 - perioc_norm)
}

/// Genuine-class probability from the trained network.
pub fn dynamic_fuse(params: &MlpParams, cues: &CueVector) -> Result<f64, FusionError> {
    Ok(mlp_forward(params, cues)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitmatch::{match_templates, MatchConfig, ShiftPolicy};
    use crate::types::IrisTemplate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(f: Vec<f64>, eye: f64, brow: f64) -> PeriocularRecord {
        PeriocularRecord::new(f, eye, brow).unwrap()
    }

    #[test]
    fn distances() {
        let a = rec(vec![1.0, 0.0], 0.1, 0.1);
        let b = rec(vec![0.0, 1.0], 0.1, 0.1);
        assert_eq!(perioc_distance(&a, &a).unwrap(), 0.0);
        assert!((perioc_distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let c = rec(vec![0.0; 3], 0.1, 0.1);
        assert_eq!(perioc_distance(&a, &c), Err(FusionError::DimensionMismatch(2, 3)));
    }

    #[test]
    fn distance_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fa: Vec<f64> = (0..512).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fb: Vec<f64> = (0..512).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut acc = 0.0;
        for i in 0..512 {
            let d = fa[i] - fb[i];
            acc += d * d;
        }
        let got = perioc_distance(&rec(fa, 0.2, 0.1), &rec(fb, 0.2, 0.1)).unwrap();
        assert!((got - acc.sqrt()).abs() < 1e-10);
    }

    fn iris_result() -> IrisMatchResult {
        IrisMatchResult {
            hamming: 0.2,
            ws_score: 0.9,
            best_shift: 0,
            ws_shift: 0,
            joint_valid: 10,
            mask_rate_a: 0.8,
            mask_rate_b: 0.6,
        }
    }

    #[test]
    fn cue_assembly() {
        let norm = NormalizationParams::new(2.0, 6.0).unwrap();
        let a = rec(vec![0.0], 0.2, 0.1);
        let c = assemble_cues(Some(&iris_result()), 2.0, &norm, &a, &a).unwrap();
        assert_eq!(c.perioc_dist, 0.0);
        assert!((c.eye_sum - 0.4).abs() < 1e-15 && c.eye_diff == 0.0);
        assert!((c.brow_sum - 0.2).abs() < 1e-15 && c.brow_diff == 0.0);
        assert_eq!(norm.normalize(10.0), 1.0);
        assert_eq!(norm.normalize(4.0), 0.5);
        assert_eq!(assemble_cues(None, 2.0, &norm, &a, &a), Err(FusionError::IrisMissing));
    }

    #[test]
    fn swap_negates_only_diffs() {
        let norm = NormalizationParams::new(0.0, 1.0).unwrap();
        let a = rec(vec![0.0], 0.3, 0.1);
        let b = rec(vec![0.0], 0.1, 0.25);
        let r = IrisMatchResult { mask_rate_a: 0.7, mask_rate_b: 0.7, ..iris_result() };
        let ab = assemble_cues(Some(&r), 0.4, &norm, &a, &b).unwrap();
        let ba = assemble_cues(Some(&r), 0.4, &norm, &b, &a).unwrap();
        assert_eq!(ab.eye_diff, -ba.eye_diff);
        assert_eq!(ab.brow_diff, -ba.brow_diff);
        assert_eq!(ab.eye_sum, ba.eye_sum);
        assert_eq!(ab.brow_sum, ba.brow_sum);
        assert_eq!((ab.iris_score, ab.perioc_dist), (ba.iris_score, ba.perioc_dist));
    }

    /// 4x4 templates worked through by hand.
    #[test]
    fn worked_pair_on_small_templates() {
        // a: rows 1111/0000/1100/0011, full mask
        // b: rows 1110/0000/1100/0011, bottom row invalid
        let a_bits = [1, 1, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1];
        let b_bits = [1, 1, 1, 0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1];
        let b_mask = [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0];
        let ta = IrisTemplate::pack(&a_bits, &[1; 16], 4, 4).unwrap();
        let tb = IrisTemplate::pack(&b_bits, &b_mask, 4, 4).unwrap();
        let config = MatchConfig { alpha: 0.3, policy: ShiftPolicy::none(), ..MatchConfig::default() };
        let m = match_templates(&ta, &tb, &config).unwrap();
        // 12 jointly valid: 5 ones agree, 6 zeros agree, 1 mismatch.
        assert_eq!(m.joint_valid, 12);
        assert!((m.hamming - 1.0 / 12.0).abs() < 1e-15);
        let ws = (1.7 * 5.0 + 0.3 * 6.0) / 12.0;

        let pa = rec(vec![0.0, 0.0, 0.0], 0.25, 0.15);
        let pb = rec(vec![3.0, 4.0, 0.0], 0.2, 0.1);
        let d = perioc_distance(&pa, &pb).unwrap();
        assert_eq!(d, 5.0);
        let norm = NormalizationParams::new(1.0, 9.0).unwrap();
        let c = assemble_cues(Some(&m), d, &norm, &pa, &pb).unwrap();
        let expected = [ws, 0.5, 1.0, 0.75, 0.45, 0.05, 0.25, 0.05];
        for (got, want) in c.to_array().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{:?}", c);
        }
    }

    #[test]
    fn static_fusion() {
        assert_eq!(static_fuse(0.8, 0.4, 1.0).unwrap(), 0.8);
        assert_eq!(static_fuse(0.8, 0.4, 0.0).unwrap(), 0.4);
        assert!((static_fuse(0.8, 0.4, 0.5).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(static_fuse(0.8, 0.4, 1.5), Err(FusionError::WeightOutOfRange(1.5)));
        let (i, p) = static_inputs(1.7, 0.3, 0.25);
        assert!((i - 1.0).abs() < 1e-15 && p == 0.75);
    }

    #[test]
    fn dynamic_fusion_range() {
        assert_eq!(dynamic_fuse(&MlpParams::zeros(), &CueVector::from_array([0.5; 8]).unwrap()).unwrap(), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = MlpParams::glorot(&mut rng);
        for _ in 0..1000 {
            let cues = CueVector::from_array([
                rng.random_range(0.0..1.7),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..2.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..2.0),
                rng.random_range(-1.0..1.0),
            ])
            .unwrap();
            let s = dynamic_fuse(&params, &cues).unwrap();
            assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn normalization_fit() {
        let n = NormalizationParams::fit([3.0, 1.0, f64::NAN, 7.0]).unwrap();
        assert_eq!(n, NormalizationParams { perioc_min: 1.0, perioc_max: 7.0 });
        assert!(NormalizationParams::fit([2.0, 2.0]).is_err());
        assert!(NormalizationParams::fit(std::iter::empty()).is_err());
    }
}
