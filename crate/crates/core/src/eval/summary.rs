//! Reduction of the PR tensors into the 12 named metric rows and their
//! fixed-layout rendering.

use super::{EvalAccum, EvalParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Ap,
    Ar,
}

impl MetricKind {
    pub fn short(&self) -> &'static str {
        match self {
            MetricKind::Ap => "AP",
            MetricKind::Ar => "AR",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            MetricKind::Ap => "Average Precision",
            MetricKind::Ar => "Average Recall",
        }
    }
}

/// One summary row: metric kind, IoU slice label, area bucket, detection
/// budget, and the reduced value (or -1 when the slice is all sentinels).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue {
    pub kind: MetricKind,
    pub iou_label: String,
    pub area_label: String,
    pub max_dets: usize,
    pub value: f64,
}

/// The 12 metric rows in challenge-table order; entry 0 is the ranking
/// metric AP@[.50:.95]/all/100.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub entries: Vec<MetricValue>,
}

fn iou_indices(params: &EvalParams, thr: Option<f64>) -> Vec<usize> {
    match thr {
        None => (0..params.iou_thrs.len()).collect(),
        Some(t) => params
            .iou_thrs
            .iter()
            .enumerate()
            .filter(|(_, &v)| (v - t).abs() < 1e-9)
            .map(|(i, _)| i)
            .collect(),
    }
}

fn iou_label(params: &EvalParams, thr: Option<f64>) -> String {
    match thr {
        None => format!(
            "{:.2}:{:.2}",
            params.iou_thrs.first().copied().unwrap_or(0.5),
            params.iou_thrs.last().copied().unwrap_or(0.95)
        ),
        Some(t) => format!("{t:.2}"),
    }
}

/// Mean over non-sentinel cells of the selected slice, or -1 if the slice
/// holds only sentinels.
fn reduce(
    accum: &EvalAccum,
    kind: MetricKind,
    t_sel: &[usize],
    k_sel: &[usize],
    a_idx: usize,
    m_idx: usize,
) -> f64 {
    let mut sum = 0.0;
    let mut n = 0u64;
    for &t in t_sel {
        for &k in k_sel {
            match kind {
                MetricKind::Ap => {
                    for r in 0..accum.n_rec {
                        let v = accum.precision_at(t, r, k, a_idx, m_idx);
                        if v > -1.0 {
                            sum += v;
                            n += 1;
                        }
                    }
                }
                MetricKind::Ar => {
                    let v = accum.recall_at(t, k, a_idx, m_idx);
                    if v > -1.0 {
                        sum += v;
                        n += 1;
                    }
                }
            }
        }
    }
    if n == 0 {
        -1.0
    } else {
        sum / n as f64
    }
}

/// Produce the 12-row summary in table order: AP over the full IoU sweep,
/// at 0.50 and 0.75, AP per area bucket, then AR per detection budget and
/// per area bucket.
pub fn summarize(accum: &EvalAccum, params: &EvalParams) -> SummaryTable {
    let last_m = params.max_dets.len() - 1;
    let mut rows: Vec<(MetricKind, Option<f64>, usize, usize)> = vec![
        (MetricKind::Ap, None, 0, last_m),
        (MetricKind::Ap, Some(0.5), 0, last_m),
        (MetricKind::Ap, Some(0.75), 0, last_m),
        (MetricKind::Ap, None, 1, last_m),
        (MetricKind::Ap, None, 2, last_m),
        (MetricKind::Ap, None, 3, last_m),
    ];
    for mi in 0..params.max_dets.len() {
        rows.push((MetricKind::Ar, None, 0, mi));
    }
    rows.push((MetricKind::Ar, None, 1, last_m));
    rows.push((MetricKind::Ar, None, 2, last_m));
    rows.push((MetricKind::Ar, None, 3, last_m));

    let all_cats: Vec<usize> = (0..accum.n_cat).collect();
    let entries = rows
        .into_iter()
        .map(|(kind, thr, a_idx, m_idx)| {
            let t_sel = iou_indices(params, thr);
            MetricValue {
                kind,
                iou_label: iou_label(params, thr),
                area_label: params.area_rngs[a_idx].label.clone(),
                max_dets: params.max_dets[m_idx],
                value: reduce(accum, kind, &t_sel, &all_cats, a_idx, m_idx),
            }
        })
        .collect();
    SummaryTable { entries }
}

/// AP over the full IoU sweep (area=all, largest budget) for each category,
/// -1 where the category has no non-ignored ground truth.
pub fn per_category_ap(accum: &EvalAccum, params: &EvalParams) -> Vec<(i64, f64)> {
    let t_sel: Vec<usize> = (0..accum.n_iou).collect();
    let last_m = params.max_dets.len() - 1;
    params
        .cat_ids
        .iter()
        .enumerate()
        .map(|(k, &cat_id)| {
            (
                cat_id,
                reduce(accum, MetricKind::Ap, &t_sel, &[k], 0, last_m),
            )
        })
        .collect()
}

/// Fixed byte layout, one line per row:
/// ` Average Precision  (AP) @[ IoU=0.50:0.95 | area=   all | maxDets=100 ] = 0.317`
pub fn render_summary(table: &SummaryTable) -> String {
    let mut out = String::new();
    for e in &table.entries {
        out.push_str(&format!(
            " {:<18} ({}) @[ IoU={:<9} | area={:>6} | maxDets={:>3} ] = {:.3}\n",
            e.kind.title(),
            e.kind.short(),
            e.iou_label,
            e.area_label,
            e.max_dets,
            e.value
        ));
    }
    out
}
