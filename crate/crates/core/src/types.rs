//! Shared domain types: bit-packed iris templates, periocular records, the
//! eight-element fusion cue vector and match labels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default normalized iris image height (rows).
pub const DEFAULT_HEIGHT: usize = 64;
/// Default normalized iris image width (columns).
pub const DEFAULT_WIDTH: usize = 512;
/// Default periocular feature dimension.
pub const DEFAULT_PERIOC_DIM: usize = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("template dimensions must be at least 1x1, got {height}x{width}")]
    EmptyDimensions { height: usize, width: usize },
    #[error("{plane} has {actual} entries, expected {expected} ({height}x{width})")]
    DimensionMismatch { plane: &'static str, expected: usize, actual: usize, height: usize, width: usize },
    #[error("{plane} entry {index} is {value}, expected 0 or 1")]
    NonBinary { plane: &'static str, index: usize, value: u8 },
    #[error("feature entry {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("{name} = {value} is outside [0, 1]")]
    AreaOutOfRange { name: &'static str, value: f64 },
    #[error("eye_area + brow_area = {sum} exceeds 1")]
    AreaSum { sum: f64 },
    #[error("cue {name} = {value} is invalid (allowed range {lo}..={hi})")]
    CueOutOfRange { name: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("packed plane holds {actual} bytes, expected {expected}")]
    PackedLength { expected: usize, actual: usize },
    #[error("packed plane has non-zero padding bits")]
    PackedPadding,
}

/// Number of bytes needed to store `bits` bits in a contiguous MSB-first stream.
pub fn packed_len(bits: usize) -> usize {
    bits.div_ceil(8)
}

/// A contiguous MSB-first bitstream. Bit `k` lives in byte `k / 8` at bit
/// position `7 - k % 8`; only the final byte carries padding, which is zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitPlane {
    len: usize,
    bytes: Vec<u8>,
}

impl BitPlane {
    pub fn zeros(len: usize) -> Self {
        BitPlane { len, bytes: vec![0; packed_len(len)] }
    }

    pub fn ones(len: usize) -> Self {
        let mut plane = BitPlane { len, bytes: vec![0xff; packed_len(len)] };
        plane.clear_padding();
        plane
    }

    /// Packs a slice of 0/1 values.
    pub fn from_bits(plane: &'static str, values: &[u8]) -> Result<Self, TypeError> {
        let mut bytes = vec![0u8; packed_len(values.len())];
        for (index, &value) in values.iter().enumerate() {
            match value {
                0 => {}
                1 => bytes[index >> 3] |= 0x80 >> (index & 7),
                _ => return Err(TypeError::NonBinary { plane, index, value }),
            }
        }
        Ok(BitPlane { len: values.len(), bytes })
    }

    /// Wraps already-packed bytes, rejecting wrong lengths and dirty padding.
    pub fn from_packed(len: usize, bytes: Vec<u8>) -> Result<Self, TypeError> {
        let expected = packed_len(len);
        if bytes.len() != expected {
            return Err(TypeError::PackedLength { expected, actual: bytes.len() });
        }
        let plane = BitPlane { len, bytes };
        let mut clean = plane.clone();
        clean.clear_padding();
        if clean.bytes != plane.bytes {
            return Err(TypeError::PackedPadding);
        }
        Ok(plane)
    }

    fn clear_padding(&mut self) {
        let tail = self.len & 7;
        if tail != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= 0xffu8 << (8 - tail);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    #[inline]
    pub fn get(&self, index: usize) -> bool {
        assert!(index < self.len, "bit index {index} out of range {}", self.len);
        self.bytes[index >> 3] & (0x80 >> (index & 7)) != 0
    }

    #[inline]
    pub fn set(&mut self, index: usize, value: bool) {
        assert!(index < self.len, "bit index {index} out of range {}", self.len);
        let bit = 0x80 >> (index & 7);
        if value {
            self.bytes[index >> 3] |= bit;
        } else {
            self.bytes[index >> 3] &= !bit;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }
}

impl std::fmt::Debug for BitPlane {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitPlane({} bits, {} set)", self.len, self.count_ones())
    }
}

/// A binary iris feature map with its validity mask (1 = usable iris pixel).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IrisTemplate {
    height: usize,
    width: usize,
    bits: BitPlane,
    mask: BitPlane,
}

impl IrisTemplate {
    /// Validates and packs a row-major template/mask pair.
    pub fn pack(bits: &[u8], mask: &[u8], height: usize, width: usize) -> Result<Self, TypeError> {
        let expected = check_dims(height, width)?;
        for (plane, values) in [("bits", bits), ("mask", mask)] {
            if values.len() != expected {
                return Err(TypeError::DimensionMismatch { plane, expected, actual: values.len(), height, width });
            }
        }
        Ok(IrisTemplate { height, width, bits: BitPlane::from_bits("bits", bits)?, mask: BitPlane::from_bits("mask", mask)? })
    }

    /// Builds a template from packed planes.
    pub fn from_planes(height: usize, width: usize, bits: BitPlane, mask: BitPlane) -> Result<Self, TypeError> {
        let expected = check_dims(height, width)?;
        for (plane, p) in [("bits", &bits), ("mask", &mask)] {
            if p.len() != expected {
                return Err(TypeError::DimensionMismatch { plane, expected, actual: p.len(), height, width });
            }
        }
        Ok(IrisTemplate { height, width, bits, mask })
    }

    /// Returns the row-major `(bits, mask)` pair.
    pub fn unpack(&self) -> (Vec<u8>, Vec<u8>) {
        (self.bits.to_bits(), self.mask.to_bits())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn bits(&self) -> &BitPlane {
        &self.bits
    }

    pub fn mask(&self) -> &BitPlane {
        &self.mask
    }

    #[inline]
    pub fn bit(&self, row: usize, col: usize) -> bool {
        self.bits.get(row * self.width + col)
    }

    #[inline]
    pub fn valid(&self, row: usize, col: usize) -> bool {
        self.mask.get(row * self.width + col)
    }

    /// Fraction of valid pixels.
    pub fn coverage(&self) -> f64 {
        self.mask.count_ones() as f64 / self.pixels() as f64
    }

    pub fn same_shape(&self, other: &IrisTemplate) -> bool {
        self.height == other.height && self.width == other.width
    }
}

fn check_dims(height: usize, width: usize) -> Result<usize, TypeError> {
    if height == 0 || width == 0 {
        return Err(TypeError::EmptyDimensions { height, width });
    }
    Ok(height * width)
}

/// A periocular feature vector with the eye and eyebrow area fractions
/// predicted for the same region of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriocularRecord {
    features: Vec<f64>,
    eye_area: f64,
    brow_area: f64,
}

impl PeriocularRecord {
    pub fn new(features: Vec<f64>, eye_area: f64, brow_area: f64) -> Result<Self, TypeError> {
        if let Some((index, &value)) = features.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(TypeError::NonFinite { index, value });
        }
        for (name, value) in [("eye_area", eye_area), ("brow_area", brow_area)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(TypeError::AreaOutOfRange { name, value });
            }
        }
        let sum = eye_area + brow_area;
        if sum > 1.0 {
            return Err(TypeError::AreaSum { sum });
        }
        Ok(PeriocularRecord { features, eye_area, brow_area })
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn eye_area(&self) -> f64 {
        self.eye_area
    }

    pub fn brow_area(&self) -> f64 {
        self.brow_area
    }
}

/// Shorthand for [`PeriocularRecord::new`].
pub fn validate_periocular(features: Vec<f64>, eye_area: f64, brow_area: f64) -> Result<PeriocularRecord, TypeError> {
    PeriocularRecord::new(features, eye_area, brow_area)
}

/// The eight inputs of the fusion network, in network input order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CueVector {
    pub iris_score: f64,
    pub perioc_dist: f64,
    pub mask_rate_a: f64,
    pub mask_rate_b: f64,
    pub eye_sum: f64,
    pub eye_diff: f64,
    pub brow_sum: f64,
    pub brow_diff: f64,
}

pub const CUE_COUNT: usize = 8;

pub const CUE_NAMES: [&str; CUE_COUNT] =
    ["iris_score", "perioc_dist", "mask_rate_a", "mask_rate_b", "eye_sum", "eye_diff", "brow_sum", "brow_diff"];

const CUE_TOLERANCE: f64 = 1e-12;

impl CueVector {
    pub fn from_array(values: [f64; CUE_COUNT]) -> Result<Self, TypeError> {
        let cues = CueVector {
            iris_score: values[0],
            perioc_dist: values[1],
            mask_rate_a: values[2],
            mask_rate_b: values[3],
            eye_sum: values[4],
            eye_diff: values[5],
            brow_sum: values[6],
            brow_diff: values[7],
        };
        cues.validate()?;
        Ok(cues)
    }

    pub fn to_array(&self) -> [f64; CUE_COUNT] {
        [
            self.iris_score,
            self.perioc_dist,
            self.mask_rate_a,
            self.mask_rate_b,
            self.eye_sum,
            self.eye_diff,
            self.brow_sum,
            self.brow_diff,
        ]
    }

    pub fn validate(&self) -> Result<(), TypeError> {
        let bounds = [
            (f64::NEG_INFINITY, f64::INFINITY),
            (f64::NEG_INFINITY, f64::INFINITY),
            (0.0, 1.0),
            (0.0, 1.0),
            (0.0, 2.0),
            (-1.0, 1.0),
            (0.0, 2.0),
            (-1.0, 1.0),
        ];
        for ((name, value), (lo, hi)) in CUE_NAMES.iter().zip(self.to_array()).zip(bounds) {
            let ok = value.is_finite() && value >= lo - CUE_TOLERANCE && value <= hi + CUE_TOLERANCE;
            if !ok {
                return Err(TypeError::CueOutOfRange { name, value, lo, hi });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchLabel {
    Genuine,
    Impostor,
}

impl MatchLabel {
    /// Softmax output index: genuine is 0, impostor is 1.
    pub fn class_index(self) -> usize {
        match self {
            MatchLabel::Genuine => 0,
            MatchLabel::Impostor => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MatchLabel::Genuine => "genuine",
            MatchLabel::Impostor => "impostor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "genuine" => Some(MatchLabel::Genuine),
            "impostor" => Some(MatchLabel::Impostor),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pack_all_ones() {
        let t = IrisTemplate::pack(&[1; 4], &[1; 4], 2, 2).unwrap();
        assert_eq!(t.bits().count_ones(), 4);
        assert_eq!(t.mask().count_ones(), 4);
    }

    #[test]
    fn pack_dimension_mismatch() {
        let err = IrisTemplate::pack(&[1; 3], &[1; 4], 2, 2).unwrap_err();
        assert!(matches!(err, TypeError::DimensionMismatch { plane: "bits", expected: 4, actual: 3, .. }));
    }

    #[test]
    fn pack_rejects_non_binary() {
        let err = IrisTemplate::pack(&[0, 1, 2, 0], &[1; 4], 2, 2).unwrap_err();
        assert!(matches!(err, TypeError::NonBinary { plane: "bits", index: 2, value: 2 }));
        assert!(IrisTemplate::pack(&[1; 4], &[1; 4], 0, 4).is_err());
    }

    #[test]
    fn pack_round_trips_random_templates() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let n = DEFAULT_HEIGHT * DEFAULT_WIDTH;
            let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let mask: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let t = IrisTemplate::pack(&bits, &mask, DEFAULT_HEIGHT, DEFAULT_WIDTH).unwrap();
            assert_eq!(t.bits().as_bytes().len(), n / 8);
            let (b2, m2) = t.unpack();
            assert_eq!(b2, bits);
            assert_eq!(m2, mask);
        }
    }

    #[test]
    fn msb_first_layout() {
        // 3x3 = 9 bits -> 2 bytes, padding at the very end only.
        let bits = [1, 0, 0, 0, 0, 0, 0, 1, 1];
        let t = IrisTemplate::pack(&bits, &[1; 9], 3, 3).unwrap();
        assert_eq!(t.bits().as_bytes(), &[0b1000_0001, 0b1000_0000]);
        assert_eq!(t.mask().as_bytes(), &[0xff, 0x80]);
        assert!(t.bit(2, 2));
        assert!(t.bit(2, 1));
        assert!(!t.bit(1, 1));
    }

    #[test]
    fn from_packed_rejects_dirty_padding() {
        assert_eq!(BitPlane::from_packed(9, vec![0, 0x40]), Err(TypeError::PackedPadding));
        assert!(matches!(BitPlane::from_packed(9, vec![0]), Err(TypeError::PackedLength { expected: 2, actual: 1 })));
        assert!(BitPlane::from_packed(9, vec![0, 0x80]).is_ok());
    }

    #[test]
    fn periocular_validation() {
        let r = validate_periocular(vec![1.0, 0.0, 0.0, 0.0], 0.1, 0.05).unwrap();
        assert_eq!(r.dim(), 4);
        assert!(matches!(validate_periocular(vec![1.0], 0.7, 0.5), Err(TypeError::AreaSum { .. })));
        assert!(matches!(validate_periocular(vec![1.0, f64::NAN], 0.1, 0.1), Err(TypeError::NonFinite { index: 1, .. })));
        assert!(matches!(validate_periocular(vec![1.0], -0.1, 0.1), Err(TypeError::AreaOutOfRange { name: "eye_area", .. })));
        assert!(validate_periocular(vec![f64::INFINITY], 0.1, 0.1).is_err());
    }

    #[test]
    fn cue_ranges() {
        assert!(CueVector::from_array([0.5, 0.2, 1.0, 0.0, 2.0, -1.0, 0.0, 1.0]).is_ok());
        assert!(CueVector::from_array([0.5, 0.2, 1.1, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(CueVector::from_array([f64::NAN, 0.2, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(CueVector::from_array([0.5, 0.2, 1.0, 0.0, 0.0, -1.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn label_strings() {
        for l in [MatchLabel::Genuine, MatchLabel::Impostor] {
            assert_eq!(MatchLabel::parse(l.as_str()), Some(l));
        }
        assert_eq!(MatchLabel::parse("Genuine"), None);
    }
}
