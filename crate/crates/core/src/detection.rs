//! Detections and the container types that group them by image.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::geometry::BoundingBox;

/// One predicted box: geometry, confidence, and the model that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    /// Confidence in `[0, 1]`.
    pub score: f64,
    /// Opaque tag identifying the source model.
    pub model_id: String,
}

impl Detection {
    pub fn new(bbox: BoundingBox, score: f64, model_id: impl Into<String>) -> Self {
        Self {
            bbox,
            score,
            model_id: model_id.into(),
        }
    }
}

/// Canonical detection ordering: descending score, ties broken by box
/// lexicographic order, then by model tag. Sorting with this makes every
/// downstream result independent of input permutation.
pub fn detection_order(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.bbox.lex_cmp(&b.bbox))
        .then_with(|| a.model_id.cmp(&b.model_id))
}

/// One model's predictions for a set of images. Images with zero detections
/// are kept explicitly so their presence round-trips through files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    pub model_id: String,
    /// Image id to detections, ordered by image id.
    pub entries: BTreeMap<String, Vec<Detection>>,
}

impl PredictionSet {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn detections(&self, image_id: &str) -> &[Detection] {
        self.entries.get(image_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total_detections(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }
}

/// Ground-truth boxes per image. Negative exams (zero boxes) are represented
/// explicitly with an empty list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthSet {
    pub entries: BTreeMap<String, Vec<BoundingBox>>,
}

impl GroundTruthSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn boxes(&self, image_id: &str) -> &[BoundingBox] {
        self.entries.get(image_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total_boxes(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }
}
