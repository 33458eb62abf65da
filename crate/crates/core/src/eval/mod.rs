//! The detection-evaluation protocol: per-image greedy matching across IoU
//! thresholds, accumulation into precision/recall tensors, and the 12-metric
//! summary table.

mod accum;
mod summary;

pub use accum::{accumulate, EvalAccum};
pub use summary::{
    per_category_ap, render_summary, summarize, MetricKind, MetricValue, SummaryTable,
};

use std::collections::HashMap;

use rayon::prelude::*;

use crate::maskops::{bbox_iou, mask_iou, RleMask};
use crate::model::{Annotation, Dataset, Detection, Task};
use crate::{Error, Result};

/// A labeled closed area interval in pixels squared.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaRange {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
}

impl AreaRange {
    fn new(label: &str, lo: f64, hi: f64) -> Self {
        AreaRange {
            label: label.to_string(),
            lo,
            hi,
        }
    }

    pub fn contains(&self, area: f64) -> bool {
        area >= self.lo && area <= self.hi
    }
}

/// Protocol configuration. The defaults reproduce the standard challenge
/// sweep: IoU thresholds 0.50:0.05:0.95, 101 recall thresholds, four area
/// buckets, and detection budgets of 1/10/100.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalParams {
    pub task: Task,
    pub iou_thrs: Vec<f64>,
    pub rec_thrs: Vec<f64>,
    pub area_rngs: Vec<AreaRange>,
    pub max_dets: Vec<usize>,
    /// Image ids in ascending order; fixes the accumulation order.
    pub img_ids: Vec<i64>,
    /// Category ids in ascending order.
    pub cat_ids: Vec<i64>,
}

impl EvalParams {
    pub fn new(task: Task, dataset: &Dataset) -> Self {
        // Thresholds are built from integer hundredths so that decimal
        // values like 0.60 compare exactly against ratios like 60/100.
        let iou_thrs = (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect();
        let rec_thrs = (0..=100).map(|i| i as f64 / 100.0).collect();
        EvalParams {
            task,
            iou_thrs,
            rec_thrs,
            area_rngs: vec![
                AreaRange::new("all", 0.0, 1e10),
                AreaRange::new("small", 0.0, 1024.0),
                AreaRange::new("medium", 1024.0, 9216.0),
                AreaRange::new("large", 9216.0, 1e10),
            ],
            max_dets: vec![1, 10, 100],
            img_ids: dataset.sorted_image_ids().to_vec(),
            cat_ids: dataset.sorted_category_ids().to_vec(),
        }
    }

    pub fn max_det_cap(&self) -> usize {
        self.max_dets.last().copied().unwrap_or(100)
    }

    /// Structural invariants of the threshold sweeps.
    pub fn check(&self) -> Result<()> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if self.iou_thrs.is_empty()
            || !increasing(&self.iou_thrs)
            || self.iou_thrs.iter().any(|&t| t <= 0.0 || t > 1.0)
        {
            return Err(Error::Validation(
                "iou thresholds must be strictly increasing within (0, 1]".into(),
            ));
        }
        if self.rec_thrs.is_empty()
            || !increasing(&self.rec_thrs)
            || self.rec_thrs.iter().any(|&r| !(0.0..=1.0).contains(&r))
        {
            return Err(Error::Validation(
                "recall thresholds must be strictly increasing within [0, 1]".into(),
            ));
        }
        if self.max_dets.is_empty() || !self.max_dets.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Validation(
                "detection budgets must be strictly increasing".into(),
            ));
        }
        if self.area_rngs.is_empty() {
            return Err(Error::Validation("at least one area range required".into()));
        }
        Ok(())
    }
}

/// Per-(image, category, area-range) matching result.
#[derive(Debug, Clone)]
pub struct ImgEval {
    pub image_id: i64,
    pub category_id: i64,
    pub area_idx: usize,
    /// Scores of the evaluated detections, sorted descending (ties by seq).
    pub dt_scores: Vec<f64>,
    /// Ignore flags of the ground truths in matching order (ignored last).
    pub gt_ignore: Vec<bool>,
    /// For each IoU threshold, the matched gt slot per detection or -1.
    pub dt_matched: Vec<Vec<i32>>,
    /// For each IoU threshold, whether the detection is ignored.
    pub dt_ignore: Vec<Vec<bool>>,
}

/// The (category x area x image) grid of per-image evaluations. Cells with
/// neither ground truth nor detections hold `None`.
#[derive(Debug, Clone)]
pub struct ImgEvalGrid {
    pub evals: Vec<Option<ImgEval>>,
    pub n_cats: usize,
    pub n_areas: usize,
    pub n_imgs: usize,
}

impl ImgEvalGrid {
    pub fn index(&self, cat_idx: usize, area_idx: usize, img_idx: usize) -> usize {
        (cat_idx * self.n_areas + area_idx) * self.n_imgs + img_idx
    }

    pub fn get(&self, cat_idx: usize, area_idx: usize, img_idx: usize) -> Option<&ImgEval> {
        self.evals[self.index(cat_idx, area_idx, img_idx)].as_ref()
    }
}

/// IoU matrix between the detections and ground truths of one
/// (image, category) key: entry (d, g) with crowd semantics taken from each
/// ground truth's flag. Detections must already be score-sorted and
/// truncated. Empty when either side is empty.
pub fn compute_iou_matrix(
    dataset: &Dataset,
    gts: &[&Annotation],
    dts: &[&Detection],
    task: Task,
) -> Result<Vec<Vec<f64>>> {
    if gts.is_empty() || dts.is_empty() {
        return Ok(Vec::new());
    }
    match task {
        Task::Box => {
            let mut rows = Vec::with_capacity(dts.len());
            for dt in dts {
                let db = dt.bbox().ok_or_else(|| {
                    Error::Format("box-task evaluation over a mask detection".into())
                })?;
                rows.push(
                    gts.iter()
                        .map(|g| bbox_iou(db, &g.bbox, g.iscrowd))
                        .collect(),
                );
            }
            Ok(rows)
        }
        Task::Mask => {
            let gt_masks: Vec<RleMask> = gts
                .iter()
                .map(|g| dataset.annotation_mask(g))
                .collect::<Result<_>>()?;
            let mut rows = Vec::with_capacity(dts.len());
            for dt in dts {
                let dm = dt.mask().ok_or_else(|| {
                    Error::Format("mask-task evaluation over a box detection".into())
                })?;
                let mut row = Vec::with_capacity(gts.len());
                for (g, gm) in gts.iter().zip(&gt_masks) {
                    row.push(mask_iou(dm, gm, g.iscrowd)?);
                }
                rows.push(row);
            }
            Ok(rows)
        }
    }
}

/// Greedy matching of one (image, category) key under one area range.
///
/// Ground truths are flagged ignored when crowd or outside the area range
/// and stably moved last. For each threshold the detections are scanned in
/// score order; each takes the best remaining ground truth, where a match
/// at exactly the threshold is accepted and replacement requires strict
/// improvement. Crowd ground truths may be matched repeatedly. A detection
/// matched to an ignored ground truth inherits the flag; an unmatched one is
/// ignored only if its own area falls outside the range.
pub fn evaluate_image(
    gts: &[&Annotation],
    dts: &[&Detection],
    params: &EvalParams,
    area_idx: usize,
    ious: &[Vec<f64>],
) -> Option<ImgEval> {
    if gts.is_empty() && dts.is_empty() {
        return None;
    }
    let rng = &params.area_rngs[area_idx];
    let n_thrs = params.iou_thrs.len();
    let n_gt = gts.len();
    let n_dt = dts.len();

    let ignore0: Vec<bool> = gts
        .iter()
        .map(|g| g.iscrowd || !rng.contains(g.area))
        .collect();
    let mut order: Vec<usize> = (0..n_gt).collect();
    order.sort_by_key(|&g| ignore0[g]);
    let gt_ignore: Vec<bool> = order.iter().map(|&g| ignore0[g]).collect();
    let gt_crowd: Vec<bool> = order.iter().map(|&g| gts[g].iscrowd).collect();

    let dt_area_out: Vec<bool> = dts.iter().map(|d| !rng.contains(d.area)).collect();

    let mut gt_match = vec![vec![-1i64; n_gt]; n_thrs];
    let mut dt_matched = vec![vec![-1i32; n_dt]; n_thrs];
    let mut dt_ignore = vec![vec![false; n_dt]; n_thrs];

    if !ious.is_empty() {
        for (ti, &thr) in params.iou_thrs.iter().enumerate() {
            for di in 0..n_dt {
                let mut best = thr.min(1.0 - 1e-10);
                let mut best_slot: Option<usize> = None;
                for (slot, &g_orig) in order.iter().enumerate() {
                    // A non-crowd gt is consumed by its first match.
                    if gt_match[ti][slot] >= 0 && !gt_crowd[slot] {
                        continue;
                    }
                    // Holding a real match, stop once the scan reaches the
                    // ignored tail.
                    if let Some(b) = best_slot {
                        if !gt_ignore[b] && gt_ignore[slot] {
                            break;
                        }
                    }
                    let v = ious[di][g_orig];
                    let accept = match best_slot {
                        None => v >= best,
                        Some(_) => v > best,
                    };
                    if !accept {
                        continue;
                    }
                    best = v;
                    best_slot = Some(slot);
                }
                if let Some(slot) = best_slot {
                    gt_match[ti][slot] = di as i64;
                    dt_matched[ti][di] = slot as i32;
                    dt_ignore[ti][di] = gt_ignore[slot];
                }
            }
        }
    }

    for ti in 0..n_thrs {
        for di in 0..n_dt {
            if dt_matched[ti][di] < 0 && dt_area_out[di] {
                dt_ignore[ti][di] = true;
            }
        }
    }

    let (image_id, category_id) = gts
        .first()
        .map(|g| (g.image_id, g.category_id))
        .or_else(|| dts.first().map(|d| (d.image_id, d.category_id)))
        .expect("at least one side is non-empty");

    Some(ImgEval {
        image_id,
        category_id,
        area_idx,
        dt_scores: dts.iter().map(|d| d.score).collect(),
        gt_ignore,
        dt_matched,
        dt_ignore,
    })
}

/// Run the per-image stage over a whole detection set.
///
/// Detections must reference the dataset's images and categories (the
/// loaders enforce this). The (image x category x area) grid is evaluated in
/// parallel; results are positionally ordered, so worker count never changes
/// the outcome.
pub fn evaluate_detections(
    dataset: &Dataset,
    detections: &[Detection],
    params: &EvalParams,
) -> Result<ImgEvalGrid> {
    params.check()?;
    let cap = params.max_det_cap();
    let mut by_key: HashMap<(i64, i64), Vec<&Detection>> = HashMap::new();
    for d in detections {
        by_key.entry((d.image_id, d.category_id)).or_default().push(d);
    }
    for list in by_key.values_mut() {
        // Stable sort: equal scores keep insertion (seq) order.
        list.sort_by(|a, b| b.score.partial_cmp(&a.score).expect("finite scores"));
        list.truncate(cap);
    }
    let empty: Vec<&Detection> = Vec::new();

    let n_cats = params.cat_ids.len();
    let n_imgs = params.img_ids.len();
    let n_areas = params.area_rngs.len();

    struct KeyUnit<'a> {
        gts: Vec<&'a Annotation>,
        dts: &'a [&'a Detection],
        ious: Vec<Vec<f64>>,
    }

    // Stage 1: IoU matrices per (category, image).
    let units: Vec<KeyUnit> = (0..n_cats * n_imgs)
        .into_par_iter()
        .map(|flat| {
            let (ki, ii) = (flat / n_imgs, flat % n_imgs);
            let (cat_id, img_id) = (params.cat_ids[ki], params.img_ids[ii]);
            let gts = dataset.annotations_for(img_id, cat_id);
            let dts = by_key
                .get(&(img_id, cat_id))
                .map(|v| v.as_slice())
                .unwrap_or(&empty);
            let ious = compute_iou_matrix(dataset, &gts, dts, params.task)?;
            Ok(KeyUnit { gts, dts, ious })
        })
        .collect::<Result<_>>()?;

    // Stage 2: greedy matching per (category, area, image).
    let evals: Vec<Option<ImgEval>> = (0..n_cats * n_areas * n_imgs)
        .into_par_iter()
        .map(|flat| {
            let ki = flat / (n_areas * n_imgs);
            let ai = (flat / n_imgs) % n_areas;
            let ii = flat % n_imgs;
            let unit = &units[ki * n_imgs + ii];
            evaluate_image(&unit.gts, unit.dts, params, ai, &unit.ious)
        })
        .collect();

    Ok(ImgEvalGrid {
        evals,
        n_cats,
        n_areas,
        n_imgs,
    })
}
