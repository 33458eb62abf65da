//! Run-length-encoded binary masks and the geometry kernel built on them:
//! encode/decode, the compressed-string codec, polygon rasterization, area,
//! bounding-box extraction, merging, and IoU for masks and boxes (including
//! crowd semantics).
//!
//! Masks are scanned in column-major order: down column 0, then column 1, and
//! so on. Runs alternate background/foreground starting with background, so a
//! mask whose first pixel is set starts with a zero-length background run.

mod codec;
mod raster;

pub use codec::{rle_string_decode, rle_string_encode};
pub use raster::{bbox_to_rle, polygons_to_rle};

use crate::error::{Error, Result};

/// Axis-aligned box as (left, top, width, height) in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Finite coordinates with non-negative extent.
    pub fn is_valid(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
            && self.w >= 0.0
            && self.h >= 0.0
    }
}

/// Dense binary mask addressed by (row, col). Storage is column-major to
/// match the RLE scan order. Used at test and tool boundaries; the evaluation
/// path stays in RLE form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    height: u32,
    width: u32,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(height: u32, width: u32) -> Self {
        BitMask {
            height,
            width,
            bits: vec![false; height as usize * width as usize],
        }
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn get(&self, row: u32, col: u32) -> bool {
        self.bits[col as usize * self.height as usize + row as usize]
    }

    #[inline]
    pub fn set(&mut self, row: u32, col: u32, value: bool) {
        self.bits[col as usize * self.height as usize + row as usize] = value;
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }
}

/// Column-major run-length-encoded binary mask. Counts alternate
/// background/foreground starting with background and always sum to
/// `height * width`; construction enforces this.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RleMask {
    height: u32,
    width: u32,
    counts: Vec<u64>,
}

impl RleMask {
    /// Build from raw counts, checking that they cover the grid exactly.
    pub fn new(height: u32, width: u32, counts: Vec<u64>) -> Result<Self> {
        let total = height as u64 * width as u64;
        let sum: u64 = counts.iter().sum();
        if sum != total {
            return Err(Error::Codec(format!(
                "run counts sum to {sum}, expected {height}x{width}={total}"
            )));
        }
        Ok(RleMask {
            height,
            width,
            counts,
        })
    }

    /// All-background mask.
    pub fn empty(height: u32, width: u32) -> Self {
        RleMask {
            height,
            width,
            counts: vec![height as u64 * width as u64],
        }
    }

    pub(crate) fn from_counts_unchecked(height: u32, width: u32, counts: Vec<u64>) -> Self {
        debug_assert_eq!(counts.iter().sum::<u64>(), height as u64 * width as u64);
        RleMask {
            height,
            width,
            counts,
        }
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).sum()
    }

    /// Tightest box enclosing the foreground; the zero box for empty masks.
    pub fn to_bbox(&self) -> BBox {
        let h = self.height as u64;
        if h == 0 {
            return BBox::new(0.0, 0.0, 0.0, 0.0);
        }
        let mut min_col = u64::MAX;
        let mut max_col = 0u64;
        let mut min_row = u64::MAX;
        let mut max_row = 0u64;
        let mut any = false;
        let mut pos = 0u64;
        let mut foreground = false;
        for &run in &self.counts {
            if foreground && run > 0 {
                any = true;
                let start = pos;
                let end = pos + run - 1;
                let (col_s, col_e) = (start / h, end / h);
                min_col = min_col.min(col_s);
                max_col = max_col.max(col_e);
                if col_s == col_e {
                    min_row = min_row.min(start % h);
                    max_row = max_row.max(end % h);
                } else {
                    // A run spanning columns covers full rows in between.
                    min_row = 0;
                    max_row = max_row.max(h - 1);
                }
            }
            pos += run;
            foreground = !foreground;
        }
        if !any {
            return BBox::new(0.0, 0.0, 0.0, 0.0);
        }
        BBox::new(
            min_col as f64,
            min_row as f64,
            (max_col - min_col + 1) as f64,
            (max_row - min_row + 1) as f64,
        )
    }
}

/// Encode a dense mask into canonical RLE form.
pub fn rle_encode(mask: &BitMask) -> RleMask {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for &bit in &mask.bits {
        if bit != current {
            counts.push(run);
            run = 0;
            current = bit;
        }
        run += 1;
    }
    counts.push(run);
    RleMask::from_counts_unchecked(mask.height, mask.width, counts)
}

/// Decode back to a dense mask; exact inverse of [`rle_encode`].
pub fn rle_decode(rle: &RleMask) -> BitMask {
    let mut mask = BitMask::new(rle.height, rle.width);
    let mut pos = 0usize;
    let mut foreground = false;
    for &run in &rle.counts {
        if foreground {
            for bit in &mut mask.bits[pos..pos + run as usize] {
                *bit = true;
            }
        }
        pos += run as usize;
        foreground = !foreground;
    }
    mask
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeMode {
    Union,
    Intersection,
}

/// Merge masks run-wise without decoding to dense form. The result is
/// canonical. All masks must share the same dimensions.
pub fn rle_merge(masks: &[RleMask], mode: MergeMode) -> Result<RleMask> {
    let first = masks
        .first()
        .ok_or_else(|| Error::Validation("rle_merge over an empty list".into()))?;
    let mut acc = first.clone();
    for (i, m) in masks.iter().enumerate().skip(1) {
        if m.height != acc.height || m.width != acc.width {
            return Err(Error::Dimension(format!(
                "rle_merge: mask {} is {}x{}, expected {}x{}",
                i, m.height, m.width, acc.height, acc.width
            )));
        }
        acc = merge_two(&acc, m, mode);
    }
    Ok(acc)
}

fn merge_two(a: &RleMask, b: &RleMask, mode: MergeMode) -> RleMask {
    let total = a.height as u64 * a.width as u64;
    let mut out: Vec<u64> = Vec::with_capacity(a.counts.len() + b.counts.len());
    let mut walk_a = RunWalker::new(&a.counts);
    let mut walk_b = RunWalker::new(&b.counts);
    let mut current = false;
    let mut acc = 0u64;
    let mut consumed = 0u64;
    while consumed < total {
        let step = walk_a.remaining().min(walk_b.remaining());
        debug_assert!(step > 0, "valid masks always cover the grid");
        let value = match mode {
            MergeMode::Union => walk_a.value() || walk_b.value(),
            MergeMode::Intersection => walk_a.value() && walk_b.value(),
        };
        if value == current {
            acc += step;
        } else {
            out.push(acc);
            current = !current;
            acc = step;
        }
        walk_a.advance(step);
        walk_b.advance(step);
        consumed += step;
    }
    out.push(acc);
    RleMask::from_counts_unchecked(a.height, a.width, out)
}

/// Cursor over an alternating run list, skipping zero-length runs.
struct RunWalker<'a> {
    counts: &'a [u64],
    next: usize,
    remaining: u64,
    value: bool,
}

impl<'a> RunWalker<'a> {
    fn new(counts: &'a [u64]) -> Self {
        let mut w = RunWalker {
            counts,
            next: 0,
            remaining: 0,
            value: true, // flipped to false by the first refill
        };
        w.refill();
        w
    }

    fn refill(&mut self) {
        while self.remaining == 0 && self.next < self.counts.len() {
            self.remaining = self.counts[self.next];
            self.value = !self.value;
            self.next += 1;
        }
    }

    fn remaining(&self) -> u64 {
        self.remaining
    }

    fn value(&self) -> bool {
        self.value
    }

    fn advance(&mut self, n: u64) {
        self.remaining -= n;
        self.refill();
    }
}

/// Intersection and union pixel counts of two same-sized masks.
fn overlap_counts(a: &RleMask, b: &RleMask) -> (u64, u64) {
    let total = a.height as u64 * a.width as u64;
    let mut walk_a = RunWalker::new(&a.counts);
    let mut walk_b = RunWalker::new(&b.counts);
    let mut inter = 0u64;
    let mut union = 0u64;
    let mut consumed = 0u64;
    while consumed < total {
        let step = walk_a.remaining().min(walk_b.remaining());
        debug_assert!(step > 0);
        if walk_a.value() || walk_b.value() {
            union += step;
            if walk_a.value() && walk_b.value() {
                inter += step;
            }
        }
        walk_a.advance(step);
        walk_b.advance(step);
        consumed += step;
    }
    (inter, union)
}

/// Mask IoU computed run-wise with exact integer pixel counts.
///
/// With `crowd` set the denominator is the detection area, so overlap with a
/// crowd region is not penalized. A zero denominator yields 0.
pub fn mask_iou(dt: &RleMask, gt: &RleMask, crowd: bool) -> Result<f64> {
    if dt.height != gt.height || dt.width != gt.width {
        return Err(Error::Dimension(format!(
            "mask_iou: dt is {}x{}, gt is {}x{}",
            dt.height, dt.width, gt.height, gt.width
        )));
    }
    let (inter, union) = overlap_counts(dt, gt);
    if inter == 0 {
        return Ok(0.0);
    }
    let denom = if crowd { dt.area() } else { union };
    if denom == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / denom as f64)
}

/// Box IoU via the rectangle-intersection formula. With `crowd` set the
/// denominator is the detection area. A zero denominator yields 0.
pub fn bbox_iou(dt: &BBox, gt: &BBox, crowd: bool) -> f64 {
    let dt_area = dt.w * dt.h;
    let gt_area = gt.w * gt.h;
    let iw = (dt.x + dt.w).min(gt.x + gt.w) - dt.x.max(gt.x);
    if iw <= 0.0 {
        return 0.0;
    }
    let ih = (dt.y + dt.h).min(gt.y + gt.h) - dt.y.max(gt.y);
    if ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let denom = if crowd {
        dt_area
    } else {
        dt_area + gt_area - inter
    };
    if denom <= 0.0 {
        return 0.0;
    }
    inter / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from_pixels(h: u32, w: u32, pixels: &[(u32, u32)]) -> BitMask {
        let mut m = BitMask::new(h, w);
        for &(r, c) in pixels {
            m.set(r, c, true);
        }
        m
    }

    #[test]
    fn encode_all_zero() {
        let m = BitMask::new(3, 3);
        assert_eq!(rle_encode(&m).counts(), &[9]);
    }

    #[test]
    fn encode_single_pixel_origin() {
        let m = mask_from_pixels(3, 3, &[(0, 0)]);
        assert_eq!(rle_encode(&m).counts(), &[0, 1, 8]);
    }

    #[test]
    fn encode_all_one() {
        let m = mask_from_pixels(2, 2, &[(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(rle_encode(&m).counts(), &[0, 4]);
    }

    #[test]
    fn decode_all_zero() {
        let r = RleMask::new(3, 3, vec![9]).unwrap();
        assert_eq!(rle_decode(&r), BitMask::new(3, 3));
    }

    #[test]
    fn decode_single_pixel_origin() {
        let r = RleMask::new(3, 3, vec![0, 1, 8]).unwrap();
        assert_eq!(rle_decode(&r), mask_from_pixels(3, 3, &[(0, 0)]));
    }

    #[test]
    fn decode_center_pixel() {
        // Position 4 in column-major order is row 1 of column 1.
        let r = RleMask::new(3, 3, vec![4, 1, 4]).unwrap();
        assert_eq!(rle_decode(&r), mask_from_pixels(3, 3, &[(1, 1)]));
    }

    #[test]
    fn bad_count_sum_is_codec_error() {
        let err = RleMask::new(3, 3, vec![4, 4]).unwrap_err();
        assert!(matches!(err, Error::Codec(_)));
    }

    #[test]
    fn area_counts_foreground_runs() {
        let r = RleMask::new(3, 3, vec![0, 4, 5]).unwrap();
        assert_eq!(r.area(), 4);
    }

    #[test]
    fn bbox_of_single_pixel() {
        let r = RleMask::new(3, 3, vec![4, 1, 4]).unwrap();
        assert_eq!(r.to_bbox(), BBox::new(1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn bbox_of_empty_mask_is_zero() {
        let r = RleMask::empty(4, 4);
        assert_eq!(r.to_bbox(), BBox::new(0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn bbox_of_column_spanning_run() {
        // One foreground run covering all of column 1 and the top of column 2.
        let r = RleMask::new(3, 3, vec![3, 4, 2]).unwrap();
        assert_eq!(r.to_bbox(), BBox::new(1.0, 0.0, 2.0, 3.0));
    }

    #[test]
    fn merge_disjoint_pixels() {
        let a = RleMask::new(3, 3, vec![0, 1, 8]).unwrap();
        let b = RleMask::new(3, 3, vec![4, 1, 4]).unwrap();
        let union = rle_merge(&[a.clone(), b.clone()], MergeMode::Union).unwrap();
        assert_eq!(union.area(), 2);
        let inter = rle_merge(&[a, b], MergeMode::Intersection).unwrap();
        assert_eq!(inter.area(), 0);
    }

    #[test]
    fn merge_dimension_mismatch() {
        let a = RleMask::empty(3, 3);
        let b = RleMask::empty(4, 3);
        let err = rle_merge(&[a, b], MergeMode::Union).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn mask_iou_identical() {
        let r = RleMask::new(3, 3, vec![0, 4, 5]).unwrap();
        assert_eq!(mask_iou(&r, &r, false).unwrap(), 1.0);
    }

    #[test]
    fn mask_iou_disjoint() {
        let a = RleMask::new(3, 3, vec![0, 1, 8]).unwrap();
        let b = RleMask::new(3, 3, vec![4, 1, 4]).unwrap();
        assert_eq!(mask_iou(&a, &b, false).unwrap(), 0.0);
    }

    #[test]
    fn mask_iou_crowd_contains_dt() {
        // dt: 2x2 block at (1,1); gt: 4x4 block at (0,0) on a 6x6 grid.
        let mut dt = BitMask::new(6, 6);
        let mut gt = BitMask::new(6, 6);
        for r in 1..3 {
            for c in 1..3 {
                dt.set(r, c, true);
            }
        }
        for r in 0..4 {
            for c in 0..4 {
                gt.set(r, c, true);
            }
        }
        let dt = rle_encode(&dt);
        let gt = rle_encode(&gt);
        assert_eq!(mask_iou(&dt, &gt, true).unwrap(), 1.0);
        assert_eq!(mask_iou(&dt, &gt, false).unwrap(), 4.0 / 16.0);
    }

    #[test]
    fn mask_iou_empty_vs_empty_is_zero() {
        let a = RleMask::empty(3, 3);
        assert_eq!(mask_iou(&a, &a, false).unwrap(), 0.0);
    }

    #[test]
    fn bbox_iou_cases() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(bbox_iou(&a, &a, false), 1.0);
        let b = BBox::new(5.0, 5.0, 10.0, 10.0);
        assert!((bbox_iou(&a, &b, false) - 25.0 / 175.0).abs() < 1e-12);
        let crowd = BBox::new(0.0, 0.0, 100.0, 100.0);
        assert_eq!(bbox_iou(&a, &crowd, true), 1.0);
    }

    #[test]
    fn bbox_iou_zero_extent() {
        let a = BBox::new(0.0, 0.0, 0.0, 10.0);
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(bbox_iou(&a, &b, false), 0.0);
        assert_eq!(bbox_iou(&a, &b, true), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_mask() -> impl Strategy<Value = BitMask> {
            (1u32..=64, 1u32..=64)
                .prop_flat_map(|(h, w)| {
                    let n = (h * w) as usize;
                    (
                        Just(h),
                        Just(w),
                        proptest::collection::vec(any::<bool>(), n),
                    )
                })
                .prop_map(|(h, w, bits)| {
                    let mut m = BitMask::new(h, w);
                    for c in 0..w {
                        for r in 0..h {
                            m.set(r, c, bits[(c * h + r) as usize]);
                        }
                    }
                    m
                })
        }

        proptest! {
            #[test]
            fn roundtrip_dense(m in arb_mask()) {
                prop_assert_eq!(rle_decode(&rle_encode(&m)), m);
            }

            #[test]
            fn encode_is_canonical(m in arb_mask()) {
                let counts = rle_encode(&m).counts().to_vec();
                for (i, &c) in counts.iter().enumerate() {
                    if i > 0 {
                        prop_assert!(c > 0, "non-leading zero run at {}", i);
                    }
                }
            }

            #[test]
            fn inclusion_exclusion(a in arb_mask(), b in arb_mask()) {
                // Force equal dimensions by cropping both onto the smaller grid.
                let h = a.height().min(b.height());
                let w = a.width().min(b.width());
                let mut ca = BitMask::new(h, w);
                let mut cb = BitMask::new(h, w);
                for c in 0..w {
                    for r in 0..h {
                        ca.set(r, c, a.get(r, c));
                        cb.set(r, c, b.get(r, c));
                    }
                }
                let (ra, rb) = (rle_encode(&ca), rle_encode(&cb));
                let union = rle_merge(&[ra.clone(), rb.clone()], MergeMode::Union).unwrap();
                let inter = rle_merge(&[ra.clone(), rb.clone()], MergeMode::Intersection).unwrap();
                prop_assert_eq!(union.area() + inter.area(), ra.area() + rb.area());
            }

            #[test]
            fn iou_symmetric_without_crowd(a in arb_mask(), b in arb_mask()) {
                let h = a.height().min(b.height());
                let w = a.width().min(b.width());
                let mut ca = BitMask::new(h, w);
                let mut cb = BitMask::new(h, w);
                for c in 0..w {
                    for r in 0..h {
                        ca.set(r, c, a.get(r, c));
                        cb.set(r, c, b.get(r, c));
                    }
                }
                let (ra, rb) = (rle_encode(&ca), rle_encode(&cb));
                prop_assert_eq!(
                    mask_iou(&ra, &rb, false).unwrap(),
                    mask_iou(&rb, &ra, false).unwrap()
                );
            }

            #[test]
            fn crowd_iou_is_one_when_contained(m in arb_mask()) {
                // Any mask against the full grid: dt fully inside crowd gt.
                let full = {
                    let mut f = BitMask::new(m.height(), m.width());
                    for c in 0..m.width() {
                        for r in 0..m.height() {
                            f.set(r, c, true);
                        }
                    }
                    rle_encode(&f)
                };
                let r = rle_encode(&m);
                let expected = if r.area() == 0 { 0.0 } else { 1.0 };
                prop_assert_eq!(mask_iou(&r, &full, true).unwrap(), expected);
            }
        }
    }
}
