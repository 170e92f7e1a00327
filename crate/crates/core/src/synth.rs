//! Seeded synthetic populations: iris templates with eyelid-style occlusion
//! masks, periocular feature vectors and eye/brow areas, plus Gaussian score
//! scenarios for exercising the metrics.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{EvalError, EyeSide, Manifest, ManifestEntry, ScoreSet};
use crate::types::{BitPlane, IrisTemplate, PeriocularRecord, DEFAULT_HEIGHT, DEFAULT_PERIOC_DIM, DEFAULT_WIDTH};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Manifest(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub num_subjects: usize,
    pub samples_per_subject: usize,
    pub sides: Vec<EyeSide>,
    pub height: usize,
    pub width: usize,
    /// Per-pixel flip probability between a sample and its prototype.
    pub genuine_flip_rate: f64,
    /// Probability that a prototype bit is 1.
    pub white_probability: f64,
    /// Fraction of valid pixels per template, drawn uniformly.
    pub mask_coverage_range: (f64, f64),
    /// Samples are rotated by up to this many columns either way.
    pub max_rotation: usize,
    pub perioc_dim: usize,
    /// Spread of subject prototypes around the population mean.
    pub perioc_between_std: f64,
    /// Within-subject noise at the mean eye area; scales inversely with the
    /// visible eye area of each sample.
    pub perioc_within_noise: f64,
    pub eye_area_range: (f64, f64),
    pub brow_area_range: (f64, f64),
    /// Fraction of subjects whose captures use the degraded settings below.
    pub degraded_fraction: f64,
    pub degraded_flip_rate: f64,
    pub degraded_coverage_range: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            num_subjects: 50,
            samples_per_subject: 10,
            sides: vec![EyeSide::L, EyeSide::R],
            height: DEFAULT_HEIGHT,
            width: DEFAULT_WIDTH,
            genuine_flip_rate: 0.1,
            white_probability: 0.5,
            mask_coverage_range: (0.7, 1.0),
            max_rotation: 4,
            perioc_dim: DEFAULT_PERIOC_DIM,
            perioc_between_std: 0.6,
            perioc_within_noise: 1.0,
            eye_area_range: (0.15, 0.35),
            brow_area_range: (0.05, 0.15),
            degraded_fraction: 0.0,
            degraded_flip_rate: 0.4,
            degraded_coverage_range: (0.2, 0.45),
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min_lo: f64, allow_zero_lo: bool) -> Result<(), SynthError> {
    let lo_ok = if allow_zero_lo { lo >= min_lo } else { lo > min_lo };
    if !(lo_ok && lo <= hi && hi <= 1.0) {
        return Err(SynthError::InvalidConfig(format!("{name} ({lo}, {hi}) must satisfy {min_lo} < lo <= hi <= 1")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.num_subjects == 0 || self.samples_per_subject == 0 || self.sides.is_empty() {
            return bad("population must have subjects, samples and at least one side".into());
        }
        let mut sides = self.sides.clone();
        sides.sort();
        sides.dedup();
        if sides.len() != self.sides.len() {
            return bad("duplicate eye side".into());
        }
        if self.height == 0 || self.width == 0 || self.height > u16::MAX as usize || self.width > u16::MAX as usize {
            return bad(format!("template dims {}x{} out of range", self.height, self.width));
        }
        if self.perioc_dim == 0 {
            return bad("perioc_dim must be positive".into());
        }
        for (name, rate) in [("genuine_flip_rate", self.genuine_flip_rate), ("degraded_flip_rate", self.degraded_flip_rate)] {
            if !(0.0..0.5).contains(&rate) {
                return bad(format!("{name} {rate} must lie in [0, 0.5)"));
            }
        }
        for (name, p) in [("white_probability", self.white_probability), ("degraded_fraction", self.degraded_fraction)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} must lie in [0, 1]"));
            }
        }
        if self.max_rotation >= self.width {
            return bad(format!("max_rotation {} must be below width {}", self.max_rotation, self.width));
        }
        check_range("mask_coverage_range", self.mask_coverage_range, 0.0, false)?;
        check_range("degraded_coverage_range", self.degraded_coverage_range, 0.0, false)?;
        check_range("eye_area_range", self.eye_area_range, 0.0, false)?;
        check_range("brow_area_range", self.brow_area_range, 0.0, true)?;
        if self.eye_area_range.1 + self.brow_area_range.1 > 1.0 {
            return bad("eye and brow areas may sum above 1".into());
        }
        for (name, v) in [("perioc_between_std", self.perioc_between_std), ("perioc_within_noise", self.perioc_within_noise)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} {v} must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Generated data, index-aligned with the manifest entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub manifest: Manifest,
    pub templates: Vec<IrisTemplate>,
    pub periocular: Vec<PeriocularRecord>,
    /// Sorted ids of subjects generated with the degraded settings.
    pub degraded_subjects: Vec<String>,
}

pub fn subject_id(index: usize) -> String {
    format!("S{index:04}")
}

/// Number of valid pixels for a drawn coverage, kept inside the range after
/// rounding to whole pixels.
fn valid_count(pixels: usize, coverage: f64, (lo, hi): (f64, f64)) -> usize {
    let min = (lo * pixels as f64).ceil() as usize;
    let max = ((hi * pixels as f64).floor() as usize).max(min).min(pixels);
    ((coverage * pixels as f64).round() as usize).clamp(min, max)
}

/// A contiguous row-major run of occluded pixels, like an eyelid band.
fn band_mask(rng: &mut ChaCha8Rng, pixels: usize, range: (f64, f64)) -> BitPlane {
    let coverage = rng.random_range(range.0..=range.1);
    let invalid = pixels - valid_count(pixels, coverage, range);
    let start = rng.random_range(0..=pixels - invalid);
    let mut mask = BitPlane::ones(pixels);
    for i in start..start + invalid {
        mask.set(i, false);
    }
    mask
}

fn rotate_columns(bits: &BitPlane, height: usize, width: usize, shift: i64) -> BitPlane {
    let mut out = BitPlane::zeros(bits.len());
    for r in 0..height {
        for c in 0..width {
            let dst = (c as i64 + shift).rem_euclid(width as i64) as usize;
            out.set(r * width + dst, bits.get(r * width + c));
        }
    }
    out
}

fn flip(rng: &mut ChaCha8Rng, bits: &BitPlane, rate: f64) -> BitPlane {
    let mut out = bits.clone();
    if rate > 0.0 {
        let coin = Bernoulli::new(rate).expect("validated rate");
        for i in 0..out.len() {
            if coin.sample(rng) {
                out.set(i, !out.get(i));
            }
        }
    }
    out
}

/// Builds a population. Each subject has one iris prototype and one
/// periocular prototype per side; samples are noisy, rotated, occluded copies.
pub fn gen_population(config: &SynthConfig) -> Result<Population, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pixels = config.height * config.width;

    let mut order: Vec<usize> = (0..config.num_subjects).collect();
    order.shuffle(&mut rng);
    let n_degraded = (config.degraded_fraction * config.num_subjects as f64).round() as usize;
    let mut degraded = vec![false; config.num_subjects];
    for &s in &order[..n_degraded] {
        degraded[s] = true;
    }

    let white = Bernoulli::new(config.white_probability).expect("validated probability");
    let mean_eye = (config.eye_area_range.0 + config.eye_area_range.1) / 2.0;
    let mut entries = Vec::new();
    let mut templates = Vec::new();
    let mut periocular = Vec::new();
    for (s, &is_degraded) in degraded.iter().enumerate() {
        let (flip_rate, coverage) = if is_degraded {
            (config.degraded_flip_rate, config.degraded_coverage_range)
        } else {
            (config.genuine_flip_rate, config.mask_coverage_range)
        };
        for &side in &config.sides {
            let mut proto = BitPlane::zeros(pixels);
            for i in 0..pixels {
                proto.set(i, white.sample(&mut rng));
            }
            let perioc_proto: Vec<f64> =
                (0..config.perioc_dim).map(|_| config.perioc_between_std * rng.sample::<f64, _>(StandardNormal)).collect();
            for k in 0..config.samples_per_subject {
                let noisy = flip(&mut rng, &proto, flip_rate);
                let shift = rng.random_range(-(config.max_rotation as i64)..=config.max_rotation as i64);
                let bits = rotate_columns(&noisy, config.height, config.width, shift);
                let mask = band_mask(&mut rng, pixels, coverage);
                templates.push(IrisTemplate::from_planes(config.height, config.width, bits, mask).expect("consistent dims"));

                let eye_area = rng.random_range(config.eye_area_range.0..=config.eye_area_range.1);
                let brow_area = rng.random_range(config.brow_area_range.0..=config.brow_area_range.1);
                let sigma = config.perioc_within_noise * mean_eye / eye_area;
                let features = perioc_proto.iter().map(|&p| p + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
                periocular.push(PeriocularRecord::new(features, eye_area, brow_area).expect("finite features"));

                let entry = ManifestEntry {
                    subject_id: subject_id(s),
                    eye_side: side,
                    sample_index: k as u32,
                    template_ref: String::new(),
                    periocular_ref: String::new(),
                    eye_area,
                    brow_area,
                };
                let id = entry.id();
                entries.push(ManifestEntry { template_ref: format!("templates/{id}.irt"), periocular_ref: id, ..entry });
            }
        }
    }
    let degraded_subjects = (0..config.num_subjects).filter(|&s| degraded[s]).map(subject_id).collect();
    Ok(Population { manifest: Manifest::new(entries)?, templates, periocular, degraded_subjects })
}

/// Two Gaussian score classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreScenario {
    pub genuine_mean: f64,
    pub genuine_std: f64,
    pub impostor_mean: f64,
    pub impostor_std: f64,
    pub n_genuine: usize,
    pub n_impostor: usize,
    /// Optional `[lo, hi]` clamp applied to every sample.
    pub clamp: Option<(f64, f64)>,
}

/// Samples a higher-is-genuine score set from the scenario.
pub fn gen_score_scenario(seed: u64, scenario: &ScoreScenario) -> Result<ScoreSet, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let Some((lo, hi)) = scenario.clamp {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(SynthError::InvalidConfig(format!("clamp ({lo}, {hi}) is empty")));
        }
    }
    let mut draw = |mean: f64, std: f64, n: usize| -> Result<Vec<f64>, SynthError> {
        if !(mean.is_finite() && std.is_finite() && std >= 0.0) {
            return Err(SynthError::InvalidConfig(format!("gaussian ({mean}, {std})")));
        }
        let normal = Normal::new(mean, std).map_err(|e| SynthError::InvalidConfig(format!("gaussian ({mean}, {std}): {e}")))?;
        Ok((0..n)
            .map(|_| {
                let x = normal.sample(&mut rng);
                scenario.clamp.map_or(x, |(lo, hi)| x.clamp(lo, hi))
            })
            .collect())
    };
    let genuine = draw(scenario.genuine_mean, scenario.genuine_std, scenario.n_genuine)?;
    let impostor = draw(scenario.impostor_mean, scenario.impostor_std, scenario.n_impostor)?;
    Ok(ScoreSet::new(genuine, impostor, true)?)
}
