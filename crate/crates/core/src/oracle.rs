//! The hypothetical oracle detector: for every annotated object, select the
//! best-overlapping proposal of its image, label it with the object's
//! category, and score it 1.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::maskops::{bbox_iou, mask_iou, BBox, RleMask};
use crate::model::{Dataset, Detection, Geometry, ProposalDoc, Task};
use crate::{Error, Result};

/// One class-agnostic candidate region; box and/or mask may be present.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub bbox: Option<BBox>,
    pub mask: Option<RleMask>,
}

/// Per-image ordered proposal lists. Records are ordered by their optional
/// `rank` field when present, file order otherwise; the order is the
/// tie-breaker for equal-overlap selections.
#[derive(Debug, Clone, Default)]
pub struct ProposalSet {
    per_image: BTreeMap<i64, Vec<Proposal>>,
}

/// Counts over the images present in a proposal set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProposalStats {
    pub image_count: u64,
    pub total: u64,
    pub mean_per_image: f64,
    pub min: u64,
    pub max: u64,
}

impl ProposalSet {
    /// Decode and index proposal records. Every image must resolve in the
    /// dataset; masks are validated against their image dimensions.
    pub fn from_docs(docs: &[ProposalDoc], dataset: &Dataset) -> Result<Self> {
        let mut ordered: BTreeMap<i64, Vec<(i64, Proposal)>> = BTreeMap::new();
        for (i, doc) in docs.iter().enumerate() {
            let path = format!("proposals[{i}]");
            let img = dataset.image(doc.image_id).ok_or_else(|| {
                Error::Referential(format!(
                    "{path}: image_id {} not present in ground truth",
                    doc.image_id
                ))
            })?;
            if doc.bbox.is_none() && doc.segmentation.is_none() {
                return Err(Error::Format(format!(
                    "{path}: record carries neither bbox nor segmentation"
                )));
            }
            let bbox = match &doc.bbox {
                Some(b) => {
                    let bb = BBox::new(b[0], b[1], b[2], b[3]);
                    if !bb.is_valid() {
                        return Err(Error::Validation(format!("{path}: invalid bbox {b:?}")));
                    }
                    Some(bb)
                }
                None => None,
            };
            let mask = match &doc.segmentation {
                Some(seg) => Some(seg.to_rle(img.height, img.width)?),
                None => None,
            };
            ordered
                .entry(doc.image_id)
                .or_default()
                .push((doc.rank.unwrap_or(i64::MAX), Proposal { bbox, mask }));
        }
        let per_image = ordered
            .into_iter()
            .map(|(img, mut list)| {
                list.sort_by_key(|(rank, _)| *rank);
                (img, list.into_iter().map(|(_, p)| p).collect())
            })
            .collect();
        Ok(ProposalSet { per_image })
    }

    pub fn for_image(&self, image_id: i64) -> &[Proposal] {
        self.per_image
            .get(&image_id)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Keep only the first `n` proposals of every image.
    pub fn truncate_per_image(&mut self, n: usize) {
        for list in self.per_image.values_mut() {
            list.truncate(n);
        }
    }

    pub fn stats(&self) -> ProposalStats {
        let counts: Vec<u64> = self
            .per_image
            .values()
            .filter(|v| !v.is_empty())
            .map(|v| v.len() as u64)
            .collect();
        if counts.is_empty() {
            return ProposalStats {
                image_count: 0,
                total: 0,
                mean_per_image: 0.0,
                min: 0,
                max: 0,
            };
        }
        let total: u64 = counts.iter().sum();
        ProposalStats {
            image_count: counts.len() as u64,
            total,
            mean_per_image: total as f64 / counts.len() as f64,
            min: *counts.iter().min().unwrap(),
            max: *counts.iter().max().unwrap(),
        }
    }
}

/// Build the oracle detection set.
///
/// For each annotation (ascending id within ascending image id) the proposal
/// with maximum plain overlap is selected (the crowd flag plays no role
/// here), labeled with the annotation's category, and scored 1.0. Equal best
/// overlaps go to the earlier proposal, and a best overlap of zero still
/// emits the first proposal. Proposals may be selected repeatedly; images
/// without proposals contribute nothing. With `skip_crowd`, crowd
/// annotations are not oracle targets.
pub fn oracle_select(
    dataset: &Dataset,
    proposals: &ProposalSet,
    task: Task,
    skip_crowd: bool,
) -> Result<Vec<Detection>> {
    let img_ids = dataset.sorted_image_ids();
    let per_image: Vec<Vec<Detection>> = img_ids
        .par_iter()
        .map(|&img_id| select_for_image(dataset, proposals.for_image(img_id), img_id, task, skip_crowd))
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for dets in per_image {
        for mut det in dets {
            det.seq = out.len() as u64;
            out.push(det);
        }
    }
    Ok(out)
}

fn select_for_image(
    dataset: &Dataset,
    props: &[Proposal],
    image_id: i64,
    task: Task,
    skip_crowd: bool,
) -> Result<Vec<Detection>> {
    if props.is_empty() {
        return Ok(Vec::new());
    }
    let mut anns = dataset.annotations_for_image(image_id);
    anns.sort_by_key(|a| a.id);
    anns.retain(|a| !(skip_crowd && a.iscrowd));
    if anns.is_empty() {
        return Ok(Vec::new());
    }

    let mut out = Vec::with_capacity(anns.len());
    match task {
        Task::Box => {
            let boxes: Vec<BBox> = props
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    p.bbox.ok_or_else(|| {
                        Error::Format(format!(
                            "image {image_id} proposal {i}: bbox required for the box task"
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            for ann in anns {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0usize;
                for (i, pb) in boxes.iter().enumerate() {
                    let v = bbox_iou(pb, &ann.bbox, false);
                    if v > best {
                        best = v;
                        best_idx = i;
                    }
                }
                let chosen = boxes[best_idx];
                out.push(Detection {
                    image_id,
                    category_id: ann.category_id,
                    score: 1.0,
                    seq: 0, // assigned after image-order concatenation
                    area: chosen.area(),
                    geometry: Geometry::Box(chosen),
                });
            }
        }
        Task::Mask => {
            let masks: Vec<&RleMask> = props
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    p.mask.as_ref().ok_or_else(|| {
                        Error::Format(format!(
                            "image {image_id} proposal {i}: segmentation required for the mask task"
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            // Tight boxes let disjoint pairs skip the run-wise overlap.
            let tight: Vec<BBox> = masks.iter().map(|m| m.to_bbox()).collect();
            for ann in anns {
                let gt_mask = dataset.annotation_mask(ann)?;
                let gt_tight = gt_mask.to_bbox();
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0usize;
                for (i, pm) in masks.iter().enumerate() {
                    let v = if boxes_disjoint(&tight[i], &gt_tight) {
                        0.0
                    } else {
                        mask_iou(pm, &gt_mask, false)?
                    };
                    if v > best {
                        best = v;
                        best_idx = i;
                    }
                }
                let chosen = masks[best_idx].clone();
                out.push(Detection {
                    image_id,
                    category_id: ann.category_id,
                    score: 1.0,
                    seq: 0,
                    area: chosen.area() as f64,
                    geometry: Geometry::Mask(chosen),
                });
            }
        }
    }
    Ok(out)
}

fn boxes_disjoint(a: &BBox, b: &BBox) -> bool {
    (a.x + a.w).min(b.x + b.w) - a.x.max(b.x) <= 0.0
        || (a.y + a.h).min(b.y + b.h) - a.y.max(b.y) <= 0.0
}
