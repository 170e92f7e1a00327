use serde::{Deserialize, Serialize};

use super::{EvalError, ScoreSet};

/// One operating point. A pair is accepted when its score is at least
/// `threshold` (at most, for lower-is-genuine score sets).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub tar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RocMode {
    /// One point per distinct observed score.
    Exact,
    /// `n` evenly spaced thresholds between the extreme scores.
    Binned(usize),
}

struct Oriented {
    genuine: Vec<f64>,
    impostor: Vec<f64>,
    sign: f64,
}

/// Scores flipped to higher-is-genuine and sorted descending.
fn orient(scores: &ScoreSet) -> Result<Oriented, EvalError> {
    if scores.genuine.is_empty() {
        return Err(EvalError::EmptyClass("genuine"));
    }
    if scores.impostor.is_empty() {
        return Err(EvalError::EmptyClass("impostor"));
    }
    let sign = if scores.higher_is_genuine { 1.0 } else { -1.0 };
    let prep = |v: &[f64]| {
        let mut o: Vec<f64> = v.iter().map(|s| sign * s).collect();
        o.sort_by(|a, b| b.total_cmp(a));
        o
    };
    Ok(Oriented { genuine: prep(&scores.genuine), impostor: prep(&scores.impostor), sign })
}

/// Number of entries `>= t` in a descending-sorted slice.
fn at_least(sorted_desc: &[f64], t: f64) -> usize {
    sorted_desc.partition_point(|&s| s >= t)
}

fn point(o: &Oriented, t: f64) -> RocPoint {
    RocPoint {
        // +0.0 keeps -0.0 out of the output for a zero threshold.
        threshold: o.sign * t + 0.0,
        far: at_least(&o.impostor, t) as f64 / o.impostor.len() as f64,
        tar: at_least(&o.genuine, t) as f64 / o.genuine.len() as f64,
    }
}

/// Empirical ROC, ordered from the strictest threshold (`(0, 0)` at an
/// infinite threshold) to the most lenient (`(1, 1)`).
pub fn roc_curve(scores: &ScoreSet, mode: RocMode) -> Result<Vec<RocPoint>, EvalError> {
    let o = orient(scores)?;
    let mut points = vec![RocPoint { threshold: o.sign * f64::INFINITY, far: 0.0, tar: 0.0 }];
    match mode {
        RocMode::Exact => {
            // Merge the two descending lists, one point per distinct value.
            let (mut i, mut j) = (0, 0);
            while i < o.genuine.len() || j < o.impostor.len() {
                let t = match (o.genuine.get(i), o.impostor.get(j)) {
                    (Some(&g), Some(&m)) => g.max(m),
                    (Some(&g), None) => g,
                    (None, Some(&m)) => m,
                    (None, None) => unreachable!(),
                };
                while i < o.genuine.len() && o.genuine[i] >= t {
                    i += 1;
                }
                while j < o.impostor.len() && o.impostor[j] >= t {
                    j += 1;
                }
                points.push(RocPoint {
                    threshold: o.sign * t + 0.0,
                    far: j as f64 / o.impostor.len() as f64,
                    tar: i as f64 / o.genuine.len() as f64,
                });
            }
        }
        RocMode::Binned(n) => {
            if n < 2 {
                return Err(EvalError::InvalidResolution(n));
            }
            let hi = o.genuine[0].max(o.impostor[0]);
            let lo = o.genuine[o.genuine.len() - 1].min(o.impostor[o.impostor.len() - 1]);
            for k in 0..n {
                let t = if k + 1 == n { lo } else { hi - (hi - lo) * k as f64 / (n - 1) as f64 };
                points.push(point(&o, t));
            }
            points.dedup_by(|b, a| a.far == b.far && a.tar == b.tar);
        }
    }
    Ok(points)
}

/// Trapezoidal area under a ROC curve.
pub fn auc(points: &[RocPoint]) -> f64 {
    points.windows(2).map(|w| (w[1].far - w[0].far) * (w[1].tar + w[0].tar) / 2.0).sum()
}

/// Equal error rate: where FAR meets FRR = 1 - TAR, linearly interpolated
/// between the two ROC points that bracket the crossing.
pub fn eer(scores: &ScoreSet) -> Result<f64, EvalError> {
    Ok(eer_from_roc(&roc_curve(scores, RocMode::Exact)?))
}

pub fn eer_from_roc(points: &[RocPoint]) -> f64 {
    let gap = |p: &RocPoint| p.far - (1.0 - p.tar);
    for w in points.windows(2) {
        let (d0, d1) = (gap(&w[0]), gap(&w[1]));
        if d1 >= 0.0 {
            if d0 >= 0.0 || d1 == d0 {
                return w[0].far;
            }
            let t = -d0 / (d1 - d0);
            return w[0].far + t * (w[1].far - w[0].far);
        }
    }
    // The last point is always (1, 1), whose gap is 1.
    unreachable!("ROC curve must end at (1, 1)")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TarAtFar {
    pub tar: f64,
    pub far: f64,
    pub threshold: f64,
    /// Fewer than `1 / far_target` impostor scores: the empirical FAR cannot
    /// resolve the target, and only thresholds with zero false accepts qualify.
    pub under_resolved: bool,
}

/// Highest TAR over thresholds whose empirical FAR does not exceed `far_target`.
pub fn tar_at_far(scores: &ScoreSet, far_target: f64) -> Result<TarAtFar, EvalError> {
    if !(far_target > 0.0 && far_target <= 1.0) {
        return Err(EvalError::InvalidFarTarget(far_target));
    }
    let points = roc_curve(scores, RocMode::Exact)?;
    let best = points.iter().rev().find(|p| p.far <= far_target).expect("the infinite threshold has zero FAR");
    Ok(TarAtFar {
        tar: best.tar,
        far: best.far,
        threshold: best.threshold,
        under_resolved: (scores.impostor.len() as f64) * far_target < 1.0,
    })
}
