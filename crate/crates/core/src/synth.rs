//! Deterministic desk-scale fixture generation: ground truth spanning all
//! three area buckets (rectangles and multi-run blobs) plus a proposal set
//! of exact copies, jittered copies, and random distractors.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::maskops::{bbox_to_rle, rle_merge, BBox, MergeMode, RleMask};
use crate::model::{
    AnnotationDoc, CategoryDoc, GtDocument, ImageDoc, ProposalDoc, Segmentation,
};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub images: u32,
    /// Each object of an image gets its own category, so no image holds two
    /// objects of one category.
    pub objects_per_image: u32,
    /// Relative perturbation of the per-object proposal copies. At 0 the
    /// proposal set contains every ground-truth geometry exactly; above 0
    /// each object gets two perturbed copies instead.
    pub jitter: f64,
}

#[derive(Debug, Clone)]
pub struct SynthFixture {
    pub ground_truth: GtDocument,
    pub proposals: Vec<ProposalDoc>,
}

// Side ranges per size class; areas then land strictly inside the
// small/medium/large buckets (31^2 < 32^2, 34^2 > 32^2, 94^2 < 96^2, 98^2 > 96^2).
fn side_range(class: u32) -> (u32, u32) {
    match class {
        0 => (4, 31),
        1 => (34, 94),
        _ => (98, 160),
    }
}

struct Rect {
    x: u32,
    y: u32,
    w: u32,
    h: u32,
}

impl Rect {
    fn bbox(&self) -> BBox {
        BBox::new(self.x as f64, self.y as f64, self.w as f64, self.h as f64)
    }
}

fn sample_rect(rng: &mut ChaCha8Rng, class: u32, img_h: u32, img_w: u32) -> Rect {
    let (lo, hi) = side_range(class);
    let hi_w = hi.min(img_w - 2);
    let hi_h = hi.min(img_h - 2);
    debug_assert!(hi_w >= lo && hi_h >= lo, "image too small for class {class}");
    let w = rng.random_range(lo..=hi_w);
    let h = rng.random_range(lo..=hi_h);
    let x = rng.random_range(0..=img_w - w);
    let y = rng.random_range(0..=img_h - h);
    Rect { x, y, w, h }
}

fn rect_mask(rect: &Rect, img_h: u32, img_w: u32) -> RleMask {
    bbox_to_rle(&rect.bbox(), img_h, img_w).expect("integer rectangles rasterize")
}

/// Union of the base rectangle with two overlapping satellites; yields a
/// multi-run mask.
fn blob_mask(rng: &mut ChaCha8Rng, base: &Rect, img_h: u32, img_w: u32) -> RleMask {
    let mut parts = vec![rect_mask(base, img_h, img_w)];
    for _ in 0..2 {
        let w = rng.random_range((base.w / 2).max(1)..=base.w);
        let h = rng.random_range((base.h / 2).max(1)..=base.h);
        let x = (base.x + rng.random_range(0..=base.w / 2)).min(img_w - w);
        let y = (base.y + rng.random_range(0..=base.h / 2)).min(img_h - h);
        parts.push(rect_mask(&Rect { x, y, w, h }, img_h, img_w));
    }
    rle_merge(&parts, MergeMode::Union).expect("same-sized parts")
}

fn jittered_rect(rng: &mut ChaCha8Rng, base: &Rect, jitter: f64, img_h: u32, img_w: u32) -> Rect {
    let amp = |side: u32| ((jitter * side as f64).ceil() as i64).max(1);
    let shift = |rng: &mut ChaCha8Rng, a: i64| rng.random_range(-a..=a);
    let w = (base.w as i64 + shift(rng, amp(base.w))).clamp(1, img_w as i64) as u32;
    let h = (base.h as i64 + shift(rng, amp(base.h))).clamp(1, img_h as i64) as u32;
    let x = (base.x as i64 + shift(rng, amp(base.w))).clamp(0, (img_w - w) as i64) as u32;
    let y = (base.y as i64 + shift(rng, amp(base.h))).clamp(0, (img_h - h) as i64) as u32;
    Rect { x, y, w, h }
}

fn mask_proposal(image_id: i64, bbox: BBox, mask: &RleMask) -> ProposalDoc {
    ProposalDoc {
        image_id,
        bbox: Some([bbox.x, bbox.y, bbox.w, bbox.h]),
        segmentation: Some(Segmentation::from_mask(mask)),
        rank: None,
    }
}

/// Generate a fixture. The output is a pure function of the config; equal
/// seeds give byte-identical documents.
pub fn generate(cfg: &SynthConfig) -> SynthFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let categories: Vec<CategoryDoc> = (1..=cfg.objects_per_image as i64)
        .map(|id| CategoryDoc {
            id,
            name: format!("object-{id:02}"),
        })
        .collect();

    let mut images = Vec::new();
    let mut annotations = Vec::new();
    let mut proposals = Vec::new();
    let mut ann_id = 0i64;

    for i in 0..cfg.images {
        let image_id = i as i64 + 1;
        let classes: Vec<u32> = (0..cfg.objects_per_image).map(|j| (i + j) % 3).collect();
        let min_side = if classes.contains(&2) { 240 } else { 64 };
        let width = rng.random_range(min_side..=640);
        let height = rng.random_range(min_side..=640);
        images.push(ImageDoc {
            id: image_id,
            width,
            height,
        });

        let mut img_proposals: Vec<ProposalDoc> = Vec::new();
        for (j, &class) in classes.iter().enumerate() {
            ann_id += 1;
            let iscrowd = ann_id % 7 == 3;
            let base = sample_rect(&mut rng, class, height, width);
            let blob = iscrowd || j % 2 == 1;
            let (mask, bbox, area, segmentation) = if blob {
                let mask = blob_mask(&mut rng, &base, height, width);
                let bbox = mask.to_bbox();
                let area = mask.area() as f64;
                let counts = mask.counts().iter().map(|&c| c as i64).collect();
                let seg = Segmentation::RleCounts {
                    size: [height, width],
                    counts,
                };
                (mask, bbox, area, seg)
            } else {
                let mask = rect_mask(&base, height, width);
                let bbox = base.bbox();
                let area = bbox.area();
                let poly = vec![
                    bbox.x,
                    bbox.y,
                    bbox.x + bbox.w,
                    bbox.y,
                    bbox.x + bbox.w,
                    bbox.y + bbox.h,
                    bbox.x,
                    bbox.y + bbox.h,
                ];
                (mask, bbox, area, Segmentation::Polygons(vec![poly]))
            };
            annotations.push(AnnotationDoc {
                id: ann_id,
                image_id,
                category_id: j as i64 + 1,
                bbox: [bbox.x, bbox.y, bbox.w, bbox.h],
                segmentation,
                area,
                iscrowd,
            });

            if cfg.jitter > 0.0 {
                // Perturbed copies stand in for the exact one; the oracle's
                // best overlap then degrades with the jitter level.
                for _ in 0..2 {
                    let r = jittered_rect(&mut rng, &base, cfg.jitter, height, width);
                    let m = rect_mask(&r, height, width);
                    img_proposals.push(mask_proposal(image_id, r.bbox(), &m));
                }
            } else {
                img_proposals.push(mask_proposal(image_id, bbox, &mask));
            }
        }
        for _ in 0..rng.random_range(3..=6u32) {
            let class = rng.random_range(0..=1);
            let r = sample_rect(&mut rng, class, height, width);
            let m = rect_mask(&r, height, width);
            img_proposals.push(mask_proposal(image_id, r.bbox(), &m));
        }
        img_proposals.shuffle(&mut rng);
        proposals.extend(img_proposals);
    }

    SynthFixture {
        ground_truth: GtDocument {
            images,
            annotations,
            categories,
        },
        proposals,
    }
}
