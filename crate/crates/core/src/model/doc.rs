//! Wire-level document types for the supported schema subset, plus
//! structural validation shared by the loaders and the `validate` command.
//!
//! Unknown fields in input documents are ignored; real annotation files
//! carry extras (licenses, captions, urls) that are irrelevant here.

use serde::{Deserialize, Deserializer, Serialize};

use crate::maskops::RleMask;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtDocument {
    pub images: Vec<ImageDoc>,
    pub annotations: Vec<AnnotationDoc>,
    pub categories: Vec<CategoryDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageDoc {
    pub id: i64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationDoc {
    pub id: i64,
    pub image_id: i64,
    pub category_id: i64,
    pub bbox: [f64; 4],
    pub segmentation: Segmentation,
    pub area: f64,
    #[serde(default, deserialize_with = "bool_or_int")]
    pub iscrowd: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDoc {
    pub id: i64,
    pub name: String,
}

/// The three interchange forms of a segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Segmentation {
    /// One or more flat [x1,y1,x2,y2,...] vertex lists.
    Polygons(Vec<Vec<f64>>),
    /// Uncompressed run counts with their declared [height, width].
    RleCounts { size: [u32; 2], counts: Vec<i64> },
    /// Compressed character string with its declared [height, width].
    RleString { size: [u32; 2], counts: String },
}

impl Segmentation {
    /// Decode to an RLE mask on an image of the given dimensions. Polygons
    /// are rasterized here; RLE variants must match the image size.
    pub fn to_rle(&self, height: u32, width: u32) -> Result<RleMask> {
        match self {
            Segmentation::Polygons(polys) => crate::maskops::polygons_to_rle(polys, height, width),
            Segmentation::RleCounts { size, counts } => {
                check_size(*size, height, width)?;
                let mut runs = Vec::with_capacity(counts.len());
                for &c in counts {
                    if c < 0 {
                        return Err(Error::Codec(format!("negative run count {c}")));
                    }
                    runs.push(c as u64);
                }
                RleMask::new(height, width, runs)
            }
            Segmentation::RleString { size, counts } => {
                check_size(*size, height, width)?;
                crate::maskops::rle_string_decode(counts, height, width)
            }
        }
    }

    pub fn is_rle(&self) -> bool {
        !matches!(self, Segmentation::Polygons(_))
    }

    /// The compressed interchange form of an already-decoded mask.
    pub fn from_mask(mask: &RleMask) -> Self {
        Segmentation::RleString {
            size: [mask.height(), mask.width()],
            counts: crate::maskops::rle_string_encode(mask),
        }
    }
}

fn check_size(size: [u32; 2], height: u32, width: u32) -> Result<()> {
    if size != [height, width] {
        return Err(Error::Dimension(format!(
            "segmentation size {}x{} does not match image {height}x{width}",
            size[0], size[1]
        )));
    }
    Ok(())
}

/// One record of a detection-results document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionDoc {
    pub image_id: i64,
    pub category_id: i64,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<Segmentation>,
}

/// One record of a class-agnostic proposals document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalDoc {
    pub image_id: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<Segmentation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<i64>,
}

fn bool_or_int<'de, D>(deserializer: D) -> std::result::Result<bool, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum BoolOrInt {
        Bool(bool),
        Int(i64),
    }
    match BoolOrInt::deserialize(deserializer)? {
        BoolOrInt::Bool(b) => Ok(b),
        BoolOrInt::Int(i) => Ok(i != 0),
    }
}

/// What a structural check found, with the path of the offending record.
#[derive(Debug, Clone)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Referential,
    Validation,
    Codec,
    Dimension,
    Format,
}

impl Violation {
    pub fn into_error(self) -> Error {
        let msg = format!("{}: {}", self.path, self.message);
        match self.kind {
            ViolationKind::Referential => Error::Referential(msg),
            ViolationKind::Validation => Error::Validation(msg),
            ViolationKind::Codec => Error::Codec(msg),
            ViolationKind::Dimension => Error::Dimension(msg),
            ViolationKind::Format => Error::Format(msg),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn push(
    out: &mut Vec<Violation>,
    path: String,
    kind: ViolationKind,
    message: impl Into<String>,
) {
    out.push(Violation {
        path,
        kind,
        message: message.into(),
    });
}

/// Check every structural invariant of a ground-truth document. Returns the
/// violations found plus non-fatal warnings (zero-area annotations occur in
/// real data and are handled by the evaluator's ignore logic).
pub fn validate_gt_document(doc: &GtDocument) -> (Vec<Violation>, Vec<String>) {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();

    let mut img_dims: std::collections::HashMap<i64, (u32, u32)> = Default::default();
    let mut seen_imgs: std::collections::HashSet<i64> = Default::default();
    for (i, img) in doc.images.iter().enumerate() {
        let path = format!("images[{i}]");
        if !seen_imgs.insert(img.id) {
            push(
                &mut violations,
                path.clone(),
                ViolationKind::Validation,
                format!("duplicate image id {}", img.id),
            );
        }
        if img.width == 0 || img.height == 0 {
            push(
                &mut violations,
                path,
                ViolationKind::Validation,
                format!("degenerate image size {}x{}", img.height, img.width),
            );
        }
        img_dims.insert(img.id, (img.height, img.width));
    }

    let mut seen_cats: std::collections::HashSet<i64> = Default::default();
    for (i, cat) in doc.categories.iter().enumerate() {
        if !seen_cats.insert(cat.id) {
            push(
                &mut violations,
                format!("categories[{i}]"),
                ViolationKind::Validation,
                format!("duplicate category id {}", cat.id),
            );
        }
    }

    let mut seen_anns: std::collections::HashSet<i64> = Default::default();
    for (i, ann) in doc.annotations.iter().enumerate() {
        let path = format!("annotations[{i}] (id {})", ann.id);
        if !seen_anns.insert(ann.id) {
            push(
                &mut violations,
                path.clone(),
                ViolationKind::Validation,
                format!("duplicate annotation id {}", ann.id),
            );
        }
        let dims = match img_dims.get(&ann.image_id) {
            Some(&d) => Some(d),
            None => {
                push(
                    &mut violations,
                    path.clone(),
                    ViolationKind::Referential,
                    format!("image_id {} not present in images", ann.image_id),
                );
                None
            }
        };
        if !seen_cats.contains(&ann.category_id) {
            push(
                &mut violations,
                path.clone(),
                ViolationKind::Referential,
                format!("category_id {} not present in categories", ann.category_id),
            );
        }
        check_bbox(&mut violations, &path, &ann.bbox);
        if !ann.area.is_finite() || ann.area < 0.0 {
            push(
                &mut violations,
                path.clone(),
                ViolationKind::Validation,
                format!("area {} is not a finite non-negative value", ann.area),
            );
        } else if ann.area == 0.0 {
            warnings.push(format!("{path}: area is 0"));
        }
        if ann.iscrowd && !ann.segmentation.is_rle() {
            push(
                &mut violations,
                path.clone(),
                ViolationKind::Validation,
                "crowd annotation must carry an RLE segmentation",
            );
        }
        check_segmentation(&mut violations, &path, &ann.segmentation, dims);
    }

    (violations, warnings)
}

/// Structural checks for a results document against its ground truth.
pub fn validate_detection_docs(
    docs: &[DetectionDoc],
    dataset: &super::Dataset,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    for (i, det) in docs.iter().enumerate() {
        let path = format!("results[{i}]");
        let dims = match dataset.image(det.image_id) {
            Some(img) => Some((img.height, img.width)),
            None => {
                push(
                    &mut violations,
                    path.clone(),
                    ViolationKind::Referential,
                    format!("image_id {} not present in ground truth", det.image_id),
                );
                None
            }
        };
        if dataset.category(det.category_id).is_none() {
            push(
                &mut violations,
                path.clone(),
                ViolationKind::Referential,
                format!("category_id {} not present in ground truth", det.category_id),
            );
        }
        if !det.score.is_finite() {
            push(
                &mut violations,
                path.clone(),
                ViolationKind::Validation,
                format!("score {} is not finite", det.score),
            );
        }
        if det.bbox.is_none() && det.segmentation.is_none() {
            push(
                &mut violations,
                path.clone(),
                ViolationKind::Format,
                "record carries neither bbox nor segmentation",
            );
        }
        if let Some(b) = &det.bbox {
            check_bbox(&mut violations, &path, b);
        }
        if let Some(seg) = &det.segmentation {
            check_segmentation(&mut violations, &path, seg, dims);
        }
    }
    violations
}

/// Structural checks for a proposals document against its ground truth.
pub fn validate_proposal_docs(docs: &[ProposalDoc], dataset: &super::Dataset) -> Vec<Violation> {
    let mut violations = Vec::new();
    for (i, prop) in docs.iter().enumerate() {
        let path = format!("proposals[{i}]");
        let dims = match dataset.image(prop.image_id) {
            Some(img) => Some((img.height, img.width)),
            None => {
                push(
                    &mut violations,
                    path.clone(),
                    ViolationKind::Referential,
                    format!("image_id {} not present in ground truth", prop.image_id),
                );
                None
            }
        };
        if prop.bbox.is_none() && prop.segmentation.is_none() {
            push(
                &mut violations,
                path.clone(),
                ViolationKind::Format,
                "record carries neither bbox nor segmentation",
            );
        }
        if let Some(b) = &prop.bbox {
            check_bbox(&mut violations, &path, b);
        }
        if let Some(seg) = &prop.segmentation {
            check_segmentation(&mut violations, &path, seg, dims);
        }
    }
    violations
}

fn check_bbox(out: &mut Vec<Violation>, path: &str, bbox: &[f64; 4]) {
    if bbox.iter().any(|v| !v.is_finite()) {
        push(
            out,
            path.to_string(),
            ViolationKind::Validation,
            format!("bbox {bbox:?} has non-finite values"),
        );
    } else if bbox[2] < 0.0 || bbox[3] < 0.0 {
        push(
            out,
            path.to_string(),
            ViolationKind::Validation,
            format!("bbox {bbox:?} has negative extent"),
        );
    }
}

fn check_segmentation(
    out: &mut Vec<Violation>,
    path: &str,
    seg: &Segmentation,
    image_dims: Option<(u32, u32)>,
) {
    match seg {
        Segmentation::Polygons(polys) => {
            for (j, poly) in polys.iter().enumerate() {
                if poly.len() < 6 || poly.len() % 2 != 0 {
                    push(
                        out,
                        format!("{path}.segmentation[{j}]"),
                        ViolationKind::Format,
                        format!(
                            "polygon has {} coordinates, need an even count of at least 6",
                            poly.len()
                        ),
                    );
                } else if poly.iter().any(|v| !v.is_finite()) {
                    push(
                        out,
                        format!("{path}.segmentation[{j}]"),
                        ViolationKind::Format,
                        "polygon has non-finite coordinates",
                    );
                }
            }
        }
        Segmentation::RleCounts { size, counts } => {
            if let Some(&c) = counts.iter().find(|&&c| c < 0) {
                push(
                    out,
                    format!("{path}.segmentation"),
                    ViolationKind::Codec,
                    format!("negative run count {c}"),
                );
                return;
            }
            let sum: i64 = counts.iter().sum();
            let total = size[0] as i64 * size[1] as i64;
            if sum != total {
                push(
                    out,
                    format!("{path}.segmentation"),
                    ViolationKind::Codec,
                    format!(
                        "run counts sum to {sum}, expected {}x{}={total}",
                        size[0], size[1]
                    ),
                );
            }
            check_declared_size(out, path, *size, image_dims);
        }
        Segmentation::RleString { size, counts } => {
            if let Err(e) = crate::maskops::rle_string_decode(counts, size[0], size[1]) {
                push(
                    out,
                    format!("{path}.segmentation"),
                    ViolationKind::Codec,
                    e.to_string(),
                );
            }
            check_declared_size(out, path, *size, image_dims);
        }
    }
}

fn check_declared_size(
    out: &mut Vec<Violation>,
    path: &str,
    size: [u32; 2],
    image_dims: Option<(u32, u32)>,
) {
    if let Some((h, w)) = image_dims {
        if size != [h, w] {
            push(
                out,
                format!("{path}.segmentation"),
                ViolationKind::Dimension,
                format!(
                    "declared size {}x{} does not match image {h}x{w}",
                    size[0], size[1]
                ),
            );
        }
    }
}
