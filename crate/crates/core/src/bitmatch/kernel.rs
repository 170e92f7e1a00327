//! Word-level counting kernels.
//!
//! The probe template is repacked into rows of `u64` words (column `j` at bit
//! `j % 64` of word `j / 64`). The gallery template is repacked with every row
//! stored twice back to back, so a circular column rotation is a plain
//! unaligned window read.

use crate::types::{BitPlane, IrisTemplate};

/// Raw agreement counts of a template pair at one column offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ShiftCounts {
    /// Column `j` of `a` is compared with column `j + shift` (mod width) of `b`.
    pub shift: i64,
    /// Jointly valid pixels.
    pub joint: u64,
    /// Disagreeing, jointly valid pixels.
    pub mismatches: u64,
    /// 1-1 agreements among jointly valid pixels.
    pub ones: u64,
    /// 0-0 agreements among jointly valid pixels.
    pub zeros: u64,
    /// Set bits of `a` among jointly valid pixels.
    pub a_ones: u64,
    /// Set bits of (shifted) `b` among jointly valid pixels.
    pub b_ones: u64,
    /// 1-1 agreements over all pixels, masks ignored.
    pub ones_all: u64,
    /// 0-0 agreements over all pixels, masks ignored.
    pub zeros_all: u64,
}

struct RowWords {
    words_per_row: usize,
    bits: Vec<u64>,
    mask: Vec<u64>,
}

fn pack_rows(plane: &BitPlane, height: usize, width: usize, copies: usize) -> (usize, Vec<u64>) {
    let stride = (copies * width).div_ceil(64) + copies - 1;
    let mut out = vec![0u64; height * stride];
    let bytes = plane.as_bytes();
    for row in 0..height {
        let dst = &mut out[row * stride..(row + 1) * stride];
        let base = row * width;
        for col in 0..width {
            let k = base + col;
            if bytes[k >> 3] & (0x80 >> (k & 7)) != 0 {
                for c in 0..copies {
                    let j = c * width + col;
                    dst[j >> 6] |= 1u64 << (j & 63);
                }
            }
        }
    }
    (stride, out)
}

impl RowWords {
    fn new(t: &IrisTemplate, copies: usize) -> Self {
        let (words_per_row, bits) = pack_rows(t.bits(), t.height(), t.width(), copies);
        let (_, mask) = pack_rows(t.mask(), t.height(), t.width(), copies);
        RowWords { words_per_row, bits, mask }
    }
}

#[inline]
fn window(row: &[u64], start: usize) -> u64 {
    let q = start >> 6;
    let sh = start & 63;
    if sh == 0 {
        row[q]
    } else {
        (row[q] >> sh) | (row[q + 1] << (64 - sh))
    }
}

/// A template repacked once for use on either side of any number of
/// comparisons.
pub struct PackedTemplate {
    height: usize,
    width: usize,
    mask_ones: u64,
    single: RowWords,
    doubled: RowWords,
}

impl PackedTemplate {
    pub fn new(t: &IrisTemplate) -> Self {
        PackedTemplate {
            height: t.height(),
            width: t.width(),
            mask_ones: t.mask().count_ones() as u64,
            single: RowWords::new(t, 1),
            doubled: RowWords::new(t, 2),
        }
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

    /// Valid pixels in the mask.
    pub fn mask_ones(&self) -> u64 {
        self.mask_ones
    }

    pub fn same_shape(&self, other: &PackedTemplate) -> bool {
        (self.height, self.width) == (other.height, other.width)
    }
}

/// One template pair, ready to be counted at any offset.
pub struct PairKernel<'a> {
    height: usize,
    width: usize,
    a: &'a RowWords,
    b: &'a RowWords,
}

impl<'a> PairKernel<'a> {
    /// Callers guarantee equal shapes.
    pub fn new(a: &'a PackedTemplate, b: &'a PackedTemplate) -> Self {
        debug_assert!(a.same_shape(b));
        PairKernel { height: a.height, width: a.width, a: &a.single, b: &b.doubled }
    }

    pub fn counts(&self, shift: i64) -> ShiftCounts {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("popcnt") {
                // SAFETY: the CPU supports the enabled feature.
                return unsafe { self.counts_popcnt(shift) };
            }
        }
        self.counts_portable(shift)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "popcnt")]
    unsafe fn counts_popcnt(&self, shift: i64) -> ShiftCounts {
        self.counts_portable(shift)
    }

    #[inline(always)]
    fn counts_portable(&self, shift: i64) -> ShiftCounts {
        let width = self.width;
        let offset = shift.rem_euclid(width as i64) as usize;
        let wpr = self.a.words_per_row;
        let dstride = self.b.words_per_row;
        let tail_bits = width % 64;
        let tail = if tail_bits == 0 { !0u64 } else { (1u64 << tail_bits) - 1 };

        let (mut joint, mut mismatches, mut ones, mut a_ones, mut ones_all, mut zeros_all) = (0u64, 0u64, 0u64, 0u64, 0u64, 0u64);
        for row in 0..self.height {
            let a_bits = &self.a.bits[row * wpr..(row + 1) * wpr];
            let a_mask = &self.a.mask[row * wpr..(row + 1) * wpr];
            let b_bits = &self.b.bits[row * dstride..(row + 1) * dstride];
            let b_mask = &self.b.mask[row * dstride..(row + 1) * dstride];
            for k in 0..wpr {
                let live = if k + 1 == wpr { tail } else { !0u64 };
                let a = a_bits[k];
                let b = window(b_bits, offset + 64 * k) & live;
                let valid = a_mask[k] & window(b_mask, offset + 64 * k) & live;
                let both = a & b;
                joint += valid.count_ones() as u64;
                mismatches += ((a ^ b) & valid).count_ones() as u64;
                ones += (both & valid).count_ones() as u64;
                a_ones += (a & valid).count_ones() as u64;
                ones_all += both.count_ones() as u64;
                zeros_all += (!(a | b) & live).count_ones() as u64;
            }
        }
        // Among valid pixels a_ones counts (1,1) and (1,0); the mismatches
        // are (1,0) plus (0,1).
        ShiftCounts {
            shift,
            joint,
            mismatches,
            ones,
            zeros: joint - mismatches - ones,
            a_ones,
            b_ones: 2 * ones + mismatches - a_ones,
            ones_all,
            zeros_all,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_reads_across_words() {
        let row = [0xffff_0000_0000_0000u64, 0x0000_0000_0000_00ffu64];
        assert_eq!(window(&row, 48), 0x00ff_ffff);
        assert_eq!(window(&row, 0), row[0]);
        assert_eq!(window(&row, 64), row[1]);
    }

    #[test]
    fn doubled_rows_repeat() {
        let t = IrisTemplate::pack(&[1, 0, 1, 1, 0, 0], &[1; 6], 2, 3).unwrap();
        let r = RowWords::new(&t, 2);
        assert_eq!(r.bits[0] & 0b111111, 0b101_101);
        assert_eq!(r.bits[r.words_per_row] & 0b111111, 0b001_001);
    }
}
