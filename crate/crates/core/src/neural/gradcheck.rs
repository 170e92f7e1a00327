//! Central finite-difference checks of the analytic gradients.
//!
//! Numerical derivatives are taken from the loss functions alone, never from
//! the gradient code under test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::loss::{dsc_gradient, dsc_loss, etl_gradient, etl_loss, softmax_xent};
use super::mlp::{mlp_gradient, mlp_logits, MlpParams};
use crate::types::{CueVector, MatchLabel};

/// Default finite-difference step.
pub const STEP: f64 = 1e-5;
/// Relative-error threshold every check must stay below.
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor: coordinates whose true derivative is below this
/// magnitude are compared in absolute terms.
pub const ABS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub name: &'static str,
    pub points: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

fn central<F: FnMut(f64) -> f64>(x: f64, h: f64, mut f: F) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn report(name: &'static str, points: usize, coordinates: usize, max_rel_error: f64) -> GradCheckReport {
    GradCheckReport { name, points, coordinates, max_rel_error, passed: max_rel_error < TOLERANCE }
}

fn random_cues(rng: &mut ChaCha8Rng) -> CueVector {
    let ea: f64 = rng.random_range(0.0..0.5);
    let eb: f64 = rng.random_range(0.0..0.5);
    let ba: f64 = rng.random_range(0.0..0.5);
    let bb: f64 = rng.random_range(0.0..0.5);
    CueVector::from_array([
        rng.random_range(0.0..1.7),
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..1.0),
        ea + eb,
        ea - eb,
        ba + bb,
        ba - bb,
    ])
    .expect("generated cues are in range")
}

/// Fusion network: every weight and bias at `points` random configurations.
pub fn check_mlp(seed: u64, points: usize, h: f64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut coords = 0;
    for _ in 0..points {
        let params = MlpParams::glorot(&mut rng);
        let cues = random_cues(&mut rng);
        let label = if rng.random_bool(0.5) { MatchLabel::Genuine } else { MatchLabel::Impostor };
        let (_, grad) = mlp_gradient(&params, &cues, label);
        let mut probe = params.clone();
        for k in 0..params.as_slice().len() {
            let x0 = params.as_slice()[k];
            let numeric = central(x0, h, |x| {
                probe.as_mut_slice()[k] = x;
                softmax_xent(mlp_logits(&probe, &cues), label).expect("finite logits")
            });
            probe.as_mut_slice()[k] = x0;
            worst = worst.max(relative_error(grad.as_slice()[k], numeric));
            coords += 1;
        }
    }
    report("mlp", points, coords, worst)
}

fn random_maps(rng: &mut ChaCha8Rng, batch: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..batch).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

/// Triplet hinge: every coordinate of anchor, positive and negative maps.
pub fn check_etl(seed: u64, points: usize, h: f64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut coords = 0;
    let mut done = 0;
    while done < points {
        let batch = rng.random_range(1..5);
        let dim = rng.random_range(2..12);
        let margin = rng.random_range(0.0..1.0);
        let mut maps = [random_maps(&mut rng, batch, dim), random_maps(&mut rng, batch, dim), random_maps(&mut rng, batch, dim)];
        // Skip points within reach of a hinge kink, where the derivative is undefined.
        let near_kink = (0..batch).any(|i| {
            let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (d(&maps[1][i], &maps[0][i]) - d(&maps[2][i], &maps[0][i]) + margin).abs() < 1e-3
        });
        if near_kink {
            continue;
        }
        let g = etl_gradient(&maps[0], &maps[1], &maps[2], margin).expect("well-formed batch");
        let analytic = [g.anchor, g.positive, g.negative];
        for which in 0..3 {
            for i in 0..batch {
                for k in 0..dim {
                    let x0 = maps[which][i][k];
                    let numeric = central(x0, h, |x| {
                        maps[which][i][k] = x;
                        etl_loss(&maps[0], &maps[1], &maps[2], margin).expect("well-formed batch")
                    });
                    maps[which][i][k] = x0;
                    worst = worst.max(relative_error(analytic[which][i][k], numeric));
                    coords += 1;
                }
            }
        }
        done += 1;
    }
    report("etl", points, coords, worst)
}

/// Sigmoid cross-entropy with respect to the transformed distance.
pub fn check_dsc(seed: u64, points: usize, h: f64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let s = rng.random_range(-8.0..8.0);
        let t = rng.random_range(0..2u8);
        let analytic = dsc_gradient(s, t).expect("valid target");
        let numeric = central(s, h, |x| dsc_loss(x, t).expect("valid target"));
        worst = worst.max(relative_error(analytic, numeric));
    }
    report("dsc", points, points, worst)
}

/// All three checks with the default step.
pub fn run_all(seed: u64, points: usize) -> Vec<GradCheckReport> {
    vec![
        check_mlp(seed, points, STEP),
        check_etl(seed.wrapping_add(1), points, STEP),
        check_dsc(seed.wrapping_add(2), points, STEP),
    ]
}
