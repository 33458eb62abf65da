//! Accumulation of per-image matches into the precision/recall tensors.

use rayon::prelude::*;

use super::{EvalParams, ImgEvalGrid};

/// Accumulated evaluation tensors.
///
/// `precision` is indexed [iouThr x recThr x category x areaRng x maxDets],
/// `recall` [iouThr x category x areaRng x maxDets]. Cells of
/// (category, areaRng) pairs with zero non-ignored ground truth hold the
/// sentinel -1 and are excluded from summary means.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalAccum {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub n_iou: usize,
    pub n_rec: usize,
    pub n_cat: usize,
    pub n_area: usize,
    pub n_det: usize,
}

impl EvalAccum {
    pub fn precision_index(&self, t: usize, r: usize, k: usize, a: usize, m: usize) -> usize {
        (((t * self.n_rec + r) * self.n_cat + k) * self.n_area + a) * self.n_det + m
    }

    pub fn recall_index(&self, t: usize, k: usize, a: usize, m: usize) -> usize {
        ((t * self.n_cat + k) * self.n_area + a) * self.n_det + m
    }

    pub fn precision_at(&self, t: usize, r: usize, k: usize, a: usize, m: usize) -> f64 {
        self.precision[self.precision_index(t, r, k, a, m)]
    }

    pub fn recall_at(&self, t: usize, k: usize, a: usize, m: usize) -> f64 {
        self.recall[self.recall_index(t, k, a, m)]
    }
}

/// Reduce the grid of per-image evaluations into PR tensors.
///
/// Per (category, areaRng, maxDets m): detections are concatenated over
/// images in the canonical image order, capped at m per image, then stably
/// sorted by descending score so that ties keep concatenation order.
/// Cumulative true/false positives over non-ignored detections give
/// recall_k = tp_k / npig and precision_k = tp_k / (tp_k + fp_k + eps);
/// the precision envelope (right-to-left running maximum) is sampled at the
/// first index reaching each recall threshold.
pub fn accumulate(grid: &ImgEvalGrid, params: &EvalParams) -> EvalAccum {
    let n_iou = params.iou_thrs.len();
    let n_rec = params.rec_thrs.len();
    let n_cat = params.cat_ids.len();
    let n_area = params.area_rngs.len();
    let n_det = params.max_dets.len();
    let n_imgs = grid.n_imgs;

    struct Slab {
        cat_idx: usize,
        area_idx: usize,
        // [t][r][m] and [t][m], -1 where undefined
        precision: Vec<f64>,
        recall: Vec<f64>,
    }

    let slabs: Vec<Slab> = (0..n_cat * n_area)
        .into_par_iter()
        .map(|flat| {
            let (cat_idx, area_idx) = (flat / n_area, flat % n_area);
            let mut slab = Slab {
                cat_idx,
                area_idx,
                precision: vec![-1.0; n_iou * n_rec * n_det],
                recall: vec![-1.0; n_iou * n_det],
            };
            for (mi, &max_det) in params.max_dets.iter().enumerate() {
                let mut scores: Vec<f64> = Vec::new();
                let mut matched: Vec<Vec<bool>> = vec![Vec::new(); n_iou];
                let mut ignored: Vec<Vec<bool>> = vec![Vec::new(); n_iou];
                let mut npig = 0usize;
                for ii in 0..n_imgs {
                    let Some(e) = grid.get(cat_idx, area_idx, ii) else {
                        continue;
                    };
                    let nd = e.dt_scores.len().min(max_det);
                    scores.extend_from_slice(&e.dt_scores[..nd]);
                    for ti in 0..n_iou {
                        matched[ti].extend(e.dt_matched[ti][..nd].iter().map(|&s| s >= 0));
                        ignored[ti].extend_from_slice(&e.dt_ignore[ti][..nd]);
                    }
                    npig += e.gt_ignore.iter().filter(|&&x| !x).count();
                }
                if npig == 0 {
                    continue;
                }
                let mut order: Vec<usize> = (0..scores.len()).collect();
                order.sort_by(|&x, &y| scores[y].partial_cmp(&scores[x]).expect("finite scores"));
                let nd = order.len();
                let npig_f = npig as f64;

                let mut rc = vec![0.0f64; nd];
                let mut pr = vec![0.0f64; nd];
                for ti in 0..n_iou {
                    let mut tp = 0u64;
                    let mut fp = 0u64;
                    for (pos, &src) in order.iter().enumerate() {
                        if !ignored[ti][src] {
                            if matched[ti][src] {
                                tp += 1;
                            } else {
                                fp += 1;
                            }
                        }
                        rc[pos] = tp as f64 / npig_f;
                        pr[pos] = tp as f64 / (tp as f64 + fp as f64 + f64::EPSILON);
                    }
                    slab.recall[ti * n_det + mi] = if nd > 0 { rc[nd - 1] } else { 0.0 };
                    for pos in (0..nd.saturating_sub(1)).rev() {
                        if pr[pos + 1] > pr[pos] {
                            pr[pos] = pr[pos + 1];
                        }
                    }
                    let mut ptr = 0usize;
                    for (ri, &rthr) in params.rec_thrs.iter().enumerate() {
                        while ptr < nd && rc[ptr] < rthr {
                            ptr += 1;
                        }
                        slab.precision[(ti * n_rec + ri) * n_det + mi] =
                            if ptr < nd { pr[ptr] } else { 0.0 };
                    }
                }
            }
            slab
        })
        .collect();

    let mut accum = EvalAccum {
        precision: vec![-1.0; n_iou * n_rec * n_cat * n_area * n_det],
        recall: vec![-1.0; n_iou * n_cat * n_area * n_det],
        n_iou,
        n_rec,
        n_cat,
        n_area,
        n_det,
    };
    for slab in slabs {
        for ti in 0..n_iou {
            for mi in 0..n_det {
                let r_idx = accum.recall_index(ti, slab.cat_idx, slab.area_idx, mi);
                accum.recall[r_idx] = slab.recall[ti * n_det + mi];
                for ri in 0..n_rec {
                    let p_idx =
                        accum.precision_index(ti, ri, slab.cat_idx, slab.area_idx, mi);
                    accum.precision[p_idx] = slab.precision[(ti * n_rec + ri) * n_det + mi];
                }
            }
        }
    }
    accum
}
