//! Detection-evaluation toolkit: oracle detectors over class-agnostic object
//! proposals, a bit-exact RLE mask kernel, and the full COCO-style detection
//! protocol (AP/AR over IoU thresholds, area buckets, and detection budgets)
//! for bounding boxes and segmentation masks.
//!
//! The typical flow: load a ground-truth dataset and a proposal set, build
//! the oracle detection set with [`oracle::oracle_select`] (best-overlap
//! proposal per annotated object at constant score 1), then evaluate any
//! detection set with [`eval::evaluate_detections`], [`eval::accumulate`],
//! and [`eval::summarize`].

pub mod error;
pub mod eval;
pub mod maskops;
pub mod model;
pub mod oracle;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{
    accumulate, compute_iou_matrix, evaluate_detections, evaluate_image, per_category_ap,
    render_summary, summarize, AreaRange, EvalAccum, EvalParams, ImgEval, ImgEvalGrid,
    MetricKind, MetricValue, SummaryTable,
};
pub use maskops::{
    bbox_iou, bbox_to_rle, mask_iou, polygons_to_rle, rle_decode, rle_encode, rle_merge,
    rle_string_decode, rle_string_encode, BBox, BitMask, MergeMode, RleMask,
};
pub use model::{
    detections_to_docs, load_detections, load_detections_from_path, Annotation, Category,
    Dataset, Detection, DetectionDoc, Geometry, GtDocument, ImageInfo, ProposalDoc,
    Segmentation, Task, Violation, ViolationKind,
};
pub use oracle::{oracle_select, Proposal, ProposalSet, ProposalStats};
pub use synth::{generate, SynthConfig, SynthFixture};
