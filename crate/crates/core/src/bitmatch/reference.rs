//! Naive per-pixel reference matcher.
//!
//! Walks unpacked row-major arrays with explicit modular column indexing and
//! shares no code with the word kernels. Used by the `oracle` command and by
//! the equivalence tests.

use crate::types::IrisTemplate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceResult {
    pub hamming: Option<(f64, i64, u64)>,
    pub ws: Option<(f64, i64)>,
    pub ws_literal: (f64, i64),
    pub white_rate: Option<f64>,
    pub black_rate: Option<f64>,
    pub mask_rates: (f64, f64, f64),
}

struct Unpacked {
    h: usize,
    w: usize,
    bits: Vec<u8>,
    mask: Vec<u8>,
}

impl Unpacked {
    fn of(t: &IrisTemplate) -> Self {
        let (bits, mask) = t.unpack();
        Unpacked { h: t.height(), w: t.width(), bits, mask }
    }
}

/// Candidate offsets ordered by preference: 0, then by increasing magnitude
/// with the negative offset first.
fn candidates(max_shift: usize, step: usize) -> Vec<i64> {
    let mut all: Vec<i64> = (-(max_shift as i64)..=max_shift as i64).filter(|s| s.unsigned_abs() as usize % step == 0).collect();
    all.sort_by_key(|&s| (s.abs(), s > 0));
    all
}

/// Computes every statistic the packed matcher reports, pixel by pixel.
pub fn reference_match(a: &IrisTemplate, b: &IrisTemplate, alpha: f64, max_shift: usize, step: usize) -> ReferenceResult {
    assert!(a.same_shape(b));
    let a = Unpacked::of(a);
    let b = Unpacked::of(b);
    let n = (a.h * a.w) as f64;

    let mut best_hd: Option<(f64, i64, u64)> = None;
    let mut best_ws: Option<(f64, i64)> = None;
    let mut best_lit: Option<(f64, i64)> = None;

    for s in candidates(max_shift, step) {
        let mut joint = 0u64;
        let mut diff = 0u64;
        let mut ws_sum = 0u64;
        let mut ws_zero = 0u64;
        let mut lit_one = 0u64;
        let mut lit_zero = 0u64;
        for i in 0..a.h {
            for j in 0..a.w {
                let jb = (j as i64 + s).rem_euclid(a.w as i64) as usize;
                let pa = a.bits[i * a.w + j];
                let pb = b.bits[i * a.w + jb];
                if pa == 1 && pb == 1 {
                    lit_one += 1;
                }
                if pa == 0 && pb == 0 {
                    lit_zero += 1;
                }
                if a.mask[i * a.w + j] == 1 && b.mask[i * a.w + jb] == 1 {
                    joint += 1;
                    if pa != pb {
                        diff += 1;
                    } else if pa == 1 {
                        ws_sum += 1;
                    } else {
                        ws_zero += 1;
                    }
                }
            }
        }
        let lit = ((2.0 - alpha) * lit_one as f64 + alpha * lit_zero as f64) / n;
        if best_lit.is_none_or(|(v, _)| lit > v) {
            best_lit = Some((lit, s));
        }
        if joint == 0 {
            continue;
        }
        let hd = diff as f64 / joint as f64;
        if best_hd.is_none_or(|(v, _, _)| hd < v) {
            best_hd = Some((hd, s, joint));
        }
        let ws = ((2.0 - alpha) * ws_sum as f64 + alpha * ws_zero as f64) / joint as f64;
        if best_ws.is_none_or(|(v, _)| ws > v) {
            best_ws = Some((ws, s));
        }
    }

    // Colour match rates and mask rates at zero offset.
    let (mut pw_a, mut pw_b, mut mw, mut pb_a, mut pb_b, mut mb) = (0u64, 0u64, 0u64, 0u64, 0u64, 0u64);
    let (mut va, mut vb, mut vj) = (0u64, 0u64, 0u64);
    for k in 0..a.h * a.w {
        va += a.mask[k] as u64;
        vb += b.mask[k] as u64;
        if a.mask[k] == 1 && b.mask[k] == 1 {
            vj += 1;
            match (a.bits[k], b.bits[k]) {
                (1, 1) => {
                    pw_a += 1;
                    pw_b += 1;
                    mw += 1;
                }
                (0, 0) => {
                    pb_a += 1;
                    pb_b += 1;
                    mb += 1;
                }
                (1, 0) => {
                    pw_a += 1;
                    pb_b += 1;
                }
                _ => {
                    pb_a += 1;
                    pw_b += 1;
                }
            }
        }
    }
    let rate = |m: u64, p: u64, q: u64| (p + q > 0).then(|| 2.0 * m as f64 / (p + q) as f64);

    ReferenceResult {
        hamming: best_hd,
        ws: best_ws,
        ws_literal: best_lit.expect("at least the zero offset is searched"),
        white_rate: rate(mw, pw_a, pw_b),
        black_rate: rate(mb, pb_a, pb_b),
        mask_rates: (vj as f64 / n, va as f64 / n, vb as f64 / n),
    }
}
