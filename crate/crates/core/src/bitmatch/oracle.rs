//! Seeded equivalence suite: the word kernels against the per-pixel
//! reference on random template pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::reference::{reference_match, ReferenceResult};
use super::{
    black_match_rate, mask_rate, masked_hamming, weighted_similarity_with, white_match_rate, ShiftPolicy, WsNormalization,
};
use crate::types::IrisTemplate;

/// One generated comparison.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub a: IrisTemplate,
    pub b: IrisTemplate,
    pub alpha: f64,
    pub max_shift: usize,
    pub step: usize,
}

fn random_plane(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<u8> {
    (0..n).map(|_| rng.random_bool(p) as u8).collect()
}

/// Random pair. The first two indices are pinned to the smallest (4x4) and
/// largest (64x512) shapes; about half the `b` templates are rotated noisy
/// copies of `a`, so the best offset is not always zero.
pub fn random_case(rng: &mut ChaCha8Rng, index: usize) -> OracleCase {
    let (h, w) = match index {
        0 => (4, 4),
        1 => (64, 512),
        _ => (rng.random_range(4..=64), rng.random_range(4..=512)),
    };
    let n = h * w;
    let density = rng.random_range(0.05..0.95);
    let a_bits = random_plane(rng, n, density);
    let b_bits = if rng.random_bool(0.5) {
        let k = rng.random_range(0..w);
        let flip = rng.random_range(0.0..0.3);
        (0..n)
            .map(|i| {
                let (r, c) = (i / w, i % w);
                a_bits[r * w + (c + w - k) % w] ^ rng.random_bool(flip) as u8
            })
            .collect()
    } else {
        random_plane(rng, n, density)
    };
    let mask = |rng: &mut ChaCha8Rng| {
        let p = [1.0, 0.9, 0.5, 0.1, 0.01][rng.random_range(0..5)];
        random_plane(rng, n, p)
    };
    let a_mask = mask(rng);
    let b_mask = mask(rng);
    let step = rng.random_range(1..=3);
    let max_shift = step * rng.random_range(0..=16.min(w - 1) / step);
    OracleCase {
        a: IrisTemplate::pack(&a_bits, &a_mask, h, w).expect("consistent dims"),
        b: IrisTemplate::pack(&b_bits, &b_mask, h, w).expect("consistent dims"),
        alpha: rng.random_range(0.01..1.99),
        max_shift,
        step,
    }
}

/// Everything the packed API reports for a case, in reference layout.
pub fn kernel_result(case: &OracleCase) -> ReferenceResult {
    let policy = ShiftPolicy::new(case.max_shift, case.step).expect("valid policy");
    let (a, b) = (&case.a, &case.b);
    let hd = masked_hamming(a, b, &policy).ok();
    let ws = weighted_similarity_with(a, b, case.alpha, &policy, WsNormalization::JointValid).ok();
    let lit = weighted_similarity_with(a, b, case.alpha, &policy, WsNormalization::Literal).expect("literal mode is total");
    let rates = mask_rate(a, b).expect("same shape");
    ReferenceResult {
        hamming: hd.map(|h| (h.distance, h.best_shift, h.joint_valid)),
        ws: ws.map(|w| (w.score, w.best_shift)),
        ws_literal: (lit.score, lit.best_shift),
        white_rate: white_match_rate(a, b).ok(),
        black_rate: black_match_rate(a, b).ok(),
        mask_rates: (rates.joint, rates.a, rates.b),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub seed: u64,
    pub pairs: usize,
    pub mismatches: Vec<String>,
    /// Largest `|WS + HD - 1|` with `alpha = 1` over pairs with a joint mask.
    pub ws_hd_max_deviation: f64,
    pub ws_hd_pairs: usize,
    pub passed: bool,
}

/// Runs `pairs` random cases; exact equality is required on every field.
pub fn run_equivalence(seed: u64, pairs: usize) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = Vec::new();
    let (mut deviation, mut reduced) = (0.0f64, 0);
    for i in 0..pairs {
        let case = random_case(&mut rng, i);
        let expected = reference_match(&case.a, &case.b, case.alpha, case.max_shift, case.step);
        let got = kernel_result(&case);
        if got != expected {
            mismatches.push(format!(
                "pair {i} ({}x{}, alpha {}, shift {}/{}): kernel {got:?} reference {expected:?}",
                case.a.height(),
                case.a.width(),
                case.alpha,
                case.max_shift,
                case.step
            ));
        }
        let policy = ShiftPolicy::new(case.max_shift, case.step).expect("valid policy");
        if let (Ok(hd), Ok(ws)) = (
            masked_hamming(&case.a, &case.b, &policy),
            weighted_similarity_with(&case.a, &case.b, 1.0, &policy, WsNormalization::JointValid),
        ) {
            deviation = deviation.max((ws.score + hd.distance - 1.0).abs());
            reduced += 1;
        }
    }
    OracleReport {
        seed,
        pairs,
        passed: mismatches.is_empty() && deviation <= 1e-12,
        mismatches,
        ws_hd_max_deviation: deviation,
        ws_hd_pairs: reduced,
    }
}
