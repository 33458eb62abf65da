//! Shared test support: brute-force geometry oracles, an independent naive
//! reference evaluator, random tiny fixtures, and binary runners.
//!
//! Everything here recomputes expected values from first principles; nothing
//! reuses the engine's matching or accumulation path.

#![allow(dead_code)]

use std::collections::HashSet;
use std::path::Path;
use std::process::{Command, Output};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use deteval::{
    rle_decode, BitMask, Dataset, Detection, DetectionDoc, EvalParams, Geometry, RleMask,
    Segmentation, Task,
};

// ---------------------------------------------------------------------------
// Brute-force geometry oracles
// ---------------------------------------------------------------------------

/// Pixel-set IoU by dense enumeration.
pub fn brute_mask_iou(a: &RleMask, b: &RleMask, crowd: bool) -> f64 {
    assert_eq!((a.height(), a.width()), (b.height(), b.width()));
    let da = rle_decode(a);
    let db = rle_decode(b);
    let mut inter = 0u64;
    let mut union = 0u64;
    let mut dt_area = 0u64;
    for r in 0..a.height() {
        for c in 0..a.width() {
            let (x, y) = (da.get(r, c), db.get(r, c));
            if x {
                dt_area += 1;
            }
            if x || y {
                union += 1;
            }
            if x && y {
                inter += 1;
            }
        }
    }
    if inter == 0 {
        return 0.0;
    }
    let denom = if crowd { dt_area } else { union };
    if denom == 0 {
        return 0.0;
    }
    inter as f64 / denom as f64
}

/// Random mask with the given fill density.
pub fn random_mask(rng: &mut ChaCha8Rng, h: u32, w: u32, density: f64) -> BitMask {
    let mut m = BitMask::new(h, w);
    for c in 0..w {
        for r in 0..h {
            if rng.random::<f64>() < density {
                m.set(r, c, true);
            }
        }
    }
    m
}

/// Classic ray-cast point-in-polygon: count edge crossings of the +x ray
/// with half-open y intervals and strictly greater crossing x.
pub fn point_in_polygon(px: f64, py: f64, poly: &[(f64, f64)]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (x1, y1) = poly[i];
        let (x2, y2) = poly[(i + 1) % n];
        if (y1 <= py && py < y2) || (y2 <= py && py < y1) {
            let cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1);
            if cross > px {
                inside = !inside;
            }
        }
    }
    inside
}

/// Shoelace area of a simple polygon.
pub fn shoelace_area(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    let mut twice = 0.0;
    for i in 0..n {
        let (x1, y1) = poly[i];
        let (x2, y2) = poly[(i + 1) % n];
        twice += x1 * y2 - x2 * y1;
    }
    (twice / 2.0).abs()
}

// ---------------------------------------------------------------------------
// Naive reference evaluator
// ---------------------------------------------------------------------------

/// PR tensors in the engine's layout, computed by exhaustive materialization.
pub struct NaiveTensors {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

struct NaiveDt<'a> {
    det: &'a Detection,
    /// (matched, ignored) per IoU threshold.
    flags: Vec<(bool, bool)>,
}

fn naive_iou(dt: &Detection, gt: &deteval::Annotation, ds: &Dataset, crowd: bool) -> f64 {
    match &dt.geometry {
        Geometry::Box(b) => {
            let g = &gt.bbox;
            let dt_area = b.w * b.h;
            let gt_area = g.w * g.h;
            let iw = (b.x + b.w).min(g.x + g.w) - b.x.max(g.x);
            let ih = (b.y + b.h).min(g.y + g.h) - b.y.max(g.y);
            if iw <= 0.0 || ih <= 0.0 {
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
        Geometry::Mask(m) => {
            let gt_mask = ds.annotation_mask(gt).expect("decodable gt");
            brute_mask_iou(m, &gt_mask, crowd)
        }
    }
}

/// Exhaustive re-implementation of the protocol; matches are selected by a
/// two-phase max search rather than a scan, and the 101 precision points are
/// taken as direct maxima over the materialized PR curve instead of an
/// envelope lookup.
pub fn naive_evaluate(ds: &Dataset, dets: &[Detection], params: &EvalParams) -> NaiveTensors {
    let n_iou = params.iou_thrs.len();
    let n_rec = params.rec_thrs.len();
    let n_cat = params.cat_ids.len();
    let n_area = params.area_rngs.len();
    let n_det = params.max_dets.len();
    let mut precision = vec![-1.0f64; n_iou * n_rec * n_cat * n_area * n_det];
    let mut recall = vec![-1.0f64; n_iou * n_cat * n_area * n_det];

    for (ki, &cat_id) in params.cat_ids.iter().enumerate() {
        for (ai, rng) in params.area_rngs.iter().enumerate() {
            for (mi, &max_det) in params.max_dets.iter().enumerate() {
                let mut npig = 0usize;
                let mut pool: Vec<NaiveDt> = Vec::new();
                for &img_id in &params.img_ids {
                    let gts: Vec<&deteval::Annotation> = ds
                        .annotations()
                        .iter()
                        .filter(|a| a.image_id == img_id && a.category_id == cat_id)
                        .collect();
                    let mut dts: Vec<&Detection> = dets
                        .iter()
                        .filter(|d| d.image_id == img_id && d.category_id == cat_id)
                        .collect();
                    dts.sort_by(|a, b| {
                        b.score
                            .partial_cmp(&a.score)
                            .unwrap()
                            .then(a.seq.cmp(&b.seq))
                    });
                    dts.truncate(max_det);

                    let gt_ignore: Vec<bool> = gts
                        .iter()
                        .map(|g| g.iscrowd || g.area < rng.lo || g.area > rng.hi)
                        .collect();
                    npig += gt_ignore.iter().filter(|&&x| !x).count();

                    let ious: Vec<Vec<f64>> = dts
                        .iter()
                        .map(|d| {
                            gts.iter().map(|g| naive_iou(d, g, ds, g.iscrowd)).collect()
                        })
                        .collect();

                    let mut matched_gts: HashSet<usize> = HashSet::new();
                    // flags[di] gains one (matched, ignored) entry per threshold.
                    let mut flags: Vec<Vec<(bool, bool)>> = vec![Vec::new(); dts.len()];
                    for &thr in params.iou_thrs.iter() {
                        matched_gts.clear();
                        for (di, dt) in dts.iter().enumerate() {
                            // Phase 1: best non-ignored gt at or above the
                            // threshold, earliest on exact ties.
                            let floor = thr.min(1.0 - 1e-10);
                            let pick = |ignored_wanted: bool,
                                        matched: &HashSet<usize>|
                             -> Option<usize> {
                                let mut best: Option<(f64, usize)> = None;
                                for gi in 0..gts.len() {
                                    if gt_ignore[gi] != ignored_wanted {
                                        continue;
                                    }
                                    if matched.contains(&gi) && !gts[gi].iscrowd {
                                        continue;
                                    }
                                    let v = ious[di][gi];
                                    if v < floor {
                                        continue;
                                    }
                                    best = match best {
                                        Some((bv, bg)) if bv >= v => Some((bv, bg)),
                                        _ => Some((v, gi)),
                                    };
                                }
                                best.map(|(_, g)| g)
                            };
                            let chosen = pick(false, &matched_gts)
                                .or_else(|| pick(true, &matched_gts));
                            match chosen {
                                Some(gi) => {
                                    matched_gts.insert(gi);
                                    flags[di].push((true, gt_ignore[gi]));
                                }
                                None => {
                                    let out = dt.area < rng.lo || dt.area > rng.hi;
                                    flags[di].push((false, out));
                                }
                            }
                        }
                    }
                    for (di, f) in flags.into_iter().enumerate() {
                        pool.push(NaiveDt { det: dts[di], flags: f });
                    }
                }

                if npig == 0 {
                    continue;
                }
                // Score-descending order, concatenation position breaking ties.
                let mut order: Vec<usize> = (0..pool.len()).collect();
                order.sort_by(|&x, &y| {
                    pool[y]
                        .det
                        .score
                        .partial_cmp(&pool[x].det.score)
                        .unwrap()
                        .then(x.cmp(&y))
                });

                for ti in 0..n_iou {
                    let mut tp = 0u64;
                    let mut fp = 0u64;
                    let mut curve: Vec<(f64, f64)> = Vec::with_capacity(order.len());
                    for &src in &order {
                        let (m, ig) = pool[src].flags[ti];
                        if !ig {
                            if m {
                                tp += 1;
                            } else {
                                fp += 1;
                            }
                        }
                        curve.push((
                            tp as f64 / npig as f64,
                            tp as f64 / (tp as f64 + fp as f64 + f64::EPSILON),
                        ));
                    }
                    let r_idx = ((ti * n_cat + ki) * n_area + ai) * n_det + mi;
                    recall[r_idx] = curve.last().map(|&(rc, _)| rc).unwrap_or(0.0);
                    for (ri, &rthr) in params.rec_thrs.iter().enumerate() {
                        let best = curve
                            .iter()
                            .filter(|&&(rc, _)| rc >= rthr)
                            .map(|&(_, pr)| pr)
                            .fold(f64::NEG_INFINITY, f64::max);
                        let p_idx =
                            (((ti * n_rec + ri) * n_cat + ki) * n_area + ai) * n_det + mi;
                        precision[p_idx] = if best.is_finite() { best } else { 0.0 };
                    }
                }
            }
        }
    }
    NaiveTensors { precision, recall }
}

// ---------------------------------------------------------------------------
// Tiny random fixtures
// ---------------------------------------------------------------------------

pub struct TinyFixture {
    pub dataset: Dataset,
    pub box_detections: Vec<Detection>,
    pub mask_detections: Vec<Detection>,
}

/// Random dataset within the brute-force budget: up to 3 images, 2
/// categories, 4 objects, plus random detections with tie-prone scores.
pub fn tiny_fixture(seed: u64) -> TinyFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_imgs = rng.random_range(1..=3u32);
    let n_cats = rng.random_range(1..=2u32);

    let mut images = Vec::new();
    for i in 0..n_imgs {
        let side = rng.random_range(8..=128u32);
        images.push(serde_json::json!({"id": i as i64 + 1, "width": side, "height": side}));
    }
    let categories: Vec<serde_json::Value> = (1..=n_cats as i64)
        .map(|id| serde_json::json!({"id": id, "name": format!("c{id}")}))
        .collect();

    let dims = |img_id: i64, imgs: &[serde_json::Value]| -> u32 {
        imgs[(img_id - 1) as usize]["width"].as_u64().unwrap() as u32
    };

    let mut annotations = Vec::new();
    let n_objs = rng.random_range(1..=4u32);
    for oid in 1..=n_objs as i64 {
        let img_id = rng.random_range(1..=n_imgs) as i64;
        let cat_id = rng.random_range(1..=n_cats) as i64;
        let side = dims(img_id, &images);
        let w = rng.random_range(1..=side - 1);
        let h = rng.random_range(1..=side - 1);
        let x = rng.random_range(0..=side - w);
        let y = rng.random_range(0..=side - h);
        let iscrowd = rng.random_range(0..5u32) == 0;
        let bbox = [x as f64, y as f64, w as f64, h as f64];
        let mask = deteval::bbox_to_rle(
            &deteval::BBox::new(bbox[0], bbox[1], bbox[2], bbox[3]),
            side,
            side,
        )
        .unwrap();
        let seg = if iscrowd || rng.random_range(0..2u32) == 0 {
            serde_json::json!({
                "size": [side, side],
                "counts": mask.counts().iter().map(|&c| c as i64).collect::<Vec<i64>>()
            })
        } else {
            serde_json::json!([[
                bbox[0], bbox[1],
                bbox[0] + bbox[2], bbox[1],
                bbox[0] + bbox[2], bbox[1] + bbox[3],
                bbox[0], bbox[1] + bbox[3]
            ]])
        };
        annotations.push(serde_json::json!({
            "id": oid, "image_id": img_id, "category_id": cat_id,
            "bbox": bbox, "segmentation": seg,
            "area": mask.area() as f64, "iscrowd": if iscrowd {1} else {0}
        }));
    }

    let gt = serde_json::json!({
        "images": images,
        "annotations": annotations,
        "categories": categories,
    });
    let dataset = Dataset::from_json(&gt.to_string(), "tiny").unwrap();

    let mut box_docs = Vec::new();
    let mut mask_docs = Vec::new();
    for img in dataset.images() {
        for cat in dataset.categories() {
            for _ in 0..rng.random_range(0..=5u32) {
                let side = img.width;
                let w = rng.random_range(1..=side - 1);
                let h = rng.random_range(1..=side - 1);
                let x = rng.random_range(0..=side - w);
                let y = rng.random_range(0..=side - h);
                // One-decimal scores make ties frequent.
                let score = rng.random_range(0..=10u32) as f64 / 10.0;
                let bbox = [x as f64, y as f64, w as f64, h as f64];
                box_docs.push(DetectionDoc {
                    image_id: img.id,
                    category_id: cat.id,
                    score,
                    bbox: Some(bbox),
                    segmentation: None,
                });
                let mask = deteval::bbox_to_rle(
                    &deteval::BBox::new(bbox[0], bbox[1], bbox[2], bbox[3]),
                    img.height,
                    img.width,
                )
                .unwrap();
                mask_docs.push(DetectionDoc {
                    image_id: img.id,
                    category_id: cat.id,
                    score,
                    bbox: None,
                    segmentation: Some(Segmentation::from_mask(&mask)),
                });
            }
        }
    }
    let box_detections = deteval::load_detections(&box_docs, &dataset, Task::Box).unwrap();
    let mask_detections = deteval::load_detections(&mask_docs, &dataset, Task::Mask).unwrap();

    TinyFixture {
        dataset,
        box_detections,
        mask_detections,
    }
}

// ---------------------------------------------------------------------------
// Binary runners
// ---------------------------------------------------------------------------

pub fn deteval_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deteval"))
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = deteval_bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "deteval {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn stdout_of(args: &[&str]) -> String {
    String::from_utf8(run_ok(args).stdout).expect("utf8 stdout")
}

/// Parse the 12 `= value` suffixes of a rendered summary.
pub fn summary_values(stdout: &str) -> Vec<f64> {
    stdout
        .lines()
        .filter(|l| l.contains("@["))
        .map(|l| {
            l.rsplit_once("= ")
                .expect("value suffix")
                .1
                .trim()
                .parse::<f64>()
                .expect("numeric value")
        })
        .collect()
}

pub fn write_file(path: &Path, content: &str) {
    std::fs::write(path, content).expect("writable test dir");
}

/// Bit-exact tensor comparison.
pub fn assert_bits_equal(a: &[f64], b: &[f64], what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length mismatch");
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert_eq!(
            x.to_bits(),
            y.to_bits(),
            "{what}: cell {i} differs: {x} vs {y}"
        );
    }
}
