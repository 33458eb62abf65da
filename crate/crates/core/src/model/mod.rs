//! Domain types, validation, and indexed access to ground truth and
//! detections.

pub mod doc;

use std::collections::HashMap;
use std::path::Path;

pub use doc::{
    validate_detection_docs, validate_gt_document, validate_proposal_docs, AnnotationDoc,
    CategoryDoc, DetectionDoc, GtDocument, ImageDoc, ProposalDoc, Segmentation, Violation,
    ViolationKind,
};

use crate::maskops::{BBox, RleMask};
use crate::{Error, Result};

/// Which geometry a detection task evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Box,
    Mask,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(Task::Box),
            "mask" => Ok(Task::Mask),
            other => Err(Error::Format(format!(
                "unknown task {other:?}, expected \"box\" or \"mask\""
            ))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Box => "box",
            Task::Mask => "mask",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageInfo {
    pub id: i64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Category {
    pub id: i64,
    pub name: String,
}

/// A ground-truth object.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub id: i64,
    pub image_id: i64,
    pub category_id: i64,
    pub bbox: BBox,
    pub segmentation: Segmentation,
    /// Segment area as stored in the annotation file. Size bucketing always
    /// uses this stored value, never a recomputed one.
    pub area: f64,
    pub iscrowd: bool,
}

/// A scored prediction for one task's geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: i64,
    pub category_id: i64,
    pub score: f64,
    /// Insertion index; strictly increasing in file/creation order and the
    /// tie-breaker wherever scores are equal.
    pub seq: u64,
    /// Derived: mask area for the mask task, w*h for the box task.
    pub area: f64,
    pub geometry: Geometry,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Box(BBox),
    Mask(RleMask),
}

impl Detection {
    pub fn bbox(&self) -> Option<&BBox> {
        match &self.geometry {
            Geometry::Box(b) => Some(b),
            Geometry::Mask(_) => None,
        }
    }

    pub fn mask(&self) -> Option<&RleMask> {
        match &self.geometry {
            Geometry::Mask(m) => Some(m),
            Geometry::Box(_) => None,
        }
    }
}

/// Validated, indexed ground truth. Immutable after construction and safe
/// for concurrent read access.
#[derive(Debug, Clone)]
pub struct Dataset {
    images: Vec<ImageInfo>,
    annotations: Vec<Annotation>,
    categories: Vec<Category>,
    warnings: Vec<String>,
    image_index: HashMap<i64, usize>,
    category_index: HashMap<i64, usize>,
    anns_by_image: HashMap<i64, Vec<usize>>,
    anns_by_image_category: HashMap<(i64, i64), Vec<usize>>,
    sorted_image_ids: Vec<i64>,
    sorted_category_ids: Vec<i64>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.images == other.images
            && self.annotations == other.annotations
            && self.categories == other.categories
    }
}

impl Dataset {
    /// Validate and index a parsed document. Fails on the first structural
    /// violation; zero-area annotations are accepted with a warning.
    pub fn from_document(doc: GtDocument) -> Result<Self> {
        let (violations, warnings) = validate_gt_document(&doc);
        if let Some(v) = violations.into_iter().next() {
            return Err(v.into_error());
        }

        let images: Vec<ImageInfo> = doc
            .images
            .iter()
            .map(|i| ImageInfo {
                id: i.id,
                width: i.width,
                height: i.height,
            })
            .collect();
        let categories: Vec<Category> = doc
            .categories
            .iter()
            .map(|c| Category {
                id: c.id,
                name: c.name.clone(),
            })
            .collect();
        let annotations: Vec<Annotation> = doc
            .annotations
            .into_iter()
            .map(|a| Annotation {
                id: a.id,
                image_id: a.image_id,
                category_id: a.category_id,
                bbox: BBox::new(a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]),
                segmentation: a.segmentation,
                area: a.area,
                iscrowd: a.iscrowd,
            })
            .collect();

        let image_index: HashMap<i64, usize> =
            images.iter().enumerate().map(|(i, im)| (im.id, i)).collect();
        let category_index: HashMap<i64, usize> = categories
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id, i))
            .collect();
        let mut anns_by_image: HashMap<i64, Vec<usize>> = HashMap::new();
        let mut anns_by_image_category: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, ann) in annotations.iter().enumerate() {
            anns_by_image.entry(ann.image_id).or_default().push(i);
            anns_by_image_category
                .entry((ann.image_id, ann.category_id))
                .or_default()
                .push(i);
        }
        let mut sorted_image_ids: Vec<i64> = images.iter().map(|i| i.id).collect();
        sorted_image_ids.sort_unstable();
        let mut sorted_category_ids: Vec<i64> = categories.iter().map(|c| c.id).collect();
        sorted_category_ids.sort_unstable();

        Ok(Dataset {
            images,
            annotations,
            categories,
            warnings,
            image_index,
            category_index,
            anns_by_image,
            anns_by_image_category,
            sorted_image_ids,
            sorted_category_ids,
        })
    }

    pub fn from_json(json: &str, source: &str) -> Result<Self> {
        let doc: GtDocument = serde_json::from_str(json).map_err(|e| Error::Parse {
            path: source.to_string(),
            message: e.to_string(),
        })?;
        Self::from_document(doc)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&json, &path.display().to_string())
    }

    /// Re-serialize the supported schema subset. Loading the result yields
    /// a dataset equal to this one.
    pub fn to_document(&self) -> GtDocument {
        GtDocument {
            images: self
                .images
                .iter()
                .map(|i| ImageDoc {
                    id: i.id,
                    width: i.width,
                    height: i.height,
                })
                .collect(),
            annotations: self
                .annotations
                .iter()
                .map(|a| AnnotationDoc {
                    id: a.id,
                    image_id: a.image_id,
                    category_id: a.category_id,
                    bbox: [a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h],
                    segmentation: a.segmentation.clone(),
                    area: a.area,
                    iscrowd: a.iscrowd,
                })
                .collect(),
            categories: self
                .categories
                .iter()
                .map(|c| CategoryDoc {
                    id: c.id,
                    name: c.name.clone(),
                })
                .collect(),
        }
    }

    pub fn images(&self) -> &[ImageInfo] {
        &self.images
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    /// Non-fatal findings collected while loading.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn image(&self, id: i64) -> Option<&ImageInfo> {
        self.image_index.get(&id).map(|&i| &self.images[i])
    }

    pub fn category(&self, id: i64) -> Option<&Category> {
        self.category_index.get(&id).map(|&i| &self.categories[i])
    }

    /// Image ids in ascending order; the canonical evaluation order.
    pub fn sorted_image_ids(&self) -> &[i64] {
        &self.sorted_image_ids
    }

    pub fn sorted_category_ids(&self) -> &[i64] {
        &self.sorted_category_ids
    }

    /// Annotations of one image in file order.
    pub fn annotations_for_image(&self, image_id: i64) -> Vec<&Annotation> {
        self.anns_by_image
            .get(&image_id)
            .map(|idxs| idxs.iter().map(|&i| &self.annotations[i]).collect())
            .unwrap_or_default()
    }

    /// Annotations of one (image, category) key in file order.
    pub fn annotations_for(&self, image_id: i64, category_id: i64) -> Vec<&Annotation> {
        self.anns_by_image_category
            .get(&(image_id, category_id))
            .map(|idxs| idxs.iter().map(|&i| &self.annotations[i]).collect())
            .unwrap_or_default()
    }

    /// Decode an annotation's segmentation on its image grid. Polygons are
    /// rasterized here, never at load time.
    pub fn annotation_mask(&self, ann: &Annotation) -> Result<RleMask> {
        let img = self.image(ann.image_id).ok_or_else(|| {
            Error::Referential(format!("annotation {}: unknown image {}", ann.id, ann.image_id))
        })?;
        ann.segmentation.to_rle(img.height, img.width)
    }
}

/// Load detections from parsed result records, in file order. `seq` is the
/// record index and the derived `area` follows the task geometry.
pub fn load_detections(
    docs: &[DetectionDoc],
    dataset: &Dataset,
    task: Task,
) -> Result<Vec<Detection>> {
    let mut detections = Vec::with_capacity(docs.len());
    for (i, doc) in docs.iter().enumerate() {
        let path = format!("results[{i}]");
        let img = dataset.image(doc.image_id).ok_or_else(|| {
            Error::Referential(format!(
                "{path}: image_id {} not present in ground truth",
                doc.image_id
            ))
        })?;
        if dataset.category(doc.category_id).is_none() {
            return Err(Error::Referential(format!(
                "{path}: category_id {} not present in ground truth",
                doc.category_id
            )));
        }
        if !doc.score.is_finite() {
            return Err(Error::Validation(format!(
                "{path}: score {} is not finite",
                doc.score
            )));
        }
        let geometry = match task {
            Task::Box => {
                let b = doc.bbox.ok_or_else(|| {
                    Error::Format(format!("{path}: bbox required for the box task"))
                })?;
                let bbox = BBox::new(b[0], b[1], b[2], b[3]);
                if !bbox.is_valid() {
                    return Err(Error::Validation(format!("{path}: invalid bbox {b:?}")));
                }
                Geometry::Box(bbox)
            }
            Task::Mask => {
                let seg = doc.segmentation.as_ref().ok_or_else(|| {
                    Error::Format(format!("{path}: segmentation required for the mask task"))
                })?;
                Geometry::Mask(seg.to_rle(img.height, img.width)?)
            }
        };
        let area = match &geometry {
            Geometry::Box(b) => b.area(),
            Geometry::Mask(m) => m.area() as f64,
        };
        detections.push(Detection {
            image_id: doc.image_id,
            category_id: doc.category_id,
            score: doc.score,
            seq: i as u64,
            area,
            geometry,
        });
    }
    Ok(detections)
}

pub fn load_detections_from_path(
    path: &Path,
    dataset: &Dataset,
    task: Task,
) -> Result<Vec<Detection>> {
    let json = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let docs: Vec<DetectionDoc> = serde_json::from_str(&json).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_detections(&docs, dataset, task)
}

/// Serialize detections back to the results-document form. Masks are written
/// in the compressed string encoding.
pub fn detections_to_docs(detections: &[Detection]) -> Vec<DetectionDoc> {
    detections
        .iter()
        .map(|d| {
            let (bbox, segmentation) = match &d.geometry {
                Geometry::Box(b) => (Some([b.x, b.y, b.w, b.h]), None),
                Geometry::Mask(m) => (None, Some(Segmentation::from_mask(m))),
            };
            DetectionDoc {
                image_id: d.image_id,
                category_id: d.category_id,
                score: d.score,
                bbox,
                segmentation,
            }
        })
        .collect()
}
