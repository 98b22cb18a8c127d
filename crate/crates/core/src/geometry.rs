//! Axis-aligned box arithmetic and area IoU.

use std::cmp::Ordering;

use thiserror::Error;

/// Rejected box geometry.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoxError {
    #[error("box coordinates must be finite")]
    NonFinite,
    #[error("box coordinates must be non-negative")]
    NegativeCoordinate,
    #[error("box must have positive width and height")]
    EmptyExtent,
}

/// Axis-aligned rectangle in pixel coordinates, stored as corner pairs.
///
/// Valid boxes have finite, non-negative coordinates and strictly positive
/// width and height; [`BoundingBox::new`] rejects anything else.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, BoxError> {
        let coords = [x_min, y_min, x_max, y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        if coords.iter().any(|&c| c < 0.0) {
            return Err(BoxError::NegativeCoordinate);
        }
        if x_max <= x_min || y_max <= y_min {
            return Err(BoxError::EmptyExtent);
        }
        // max(0.0) normalizes -0.0 so lexicographic comparison is stable
        Ok(Self {
            x_min: x_min.max(0.0),
            y_min: y_min.max(0.0),
            x_max: x_max.max(0.0),
            y_max: y_max.max(0.0),
        })
    }

    /// Builds a box from a top-left corner plus width and height.
    pub fn from_xywh(x: f64, y: f64, width: f64, height: f64) -> Result<Self, BoxError> {
        Self::new(x, y, x + width, y + height)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Geometric area, strictly positive for a valid box.
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Area of the overlap region, zero for disjoint or edge-touching boxes.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let overlap_w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let overlap_h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if overlap_w > 0.0 && overlap_h > 0.0 {
            overlap_w * overlap_h
        } else {
            0.0
        }
    }

    /// Intersection over union of the two areas, in `[0, 1]`.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        inter / union
    }

    /// Lexicographic order on `(x_min, y_min, x_max, y_max)`, used as a
    /// deterministic tie-break wherever boxes are sorted.
    pub fn lex_cmp(&self, other: &BoundingBox) -> Ordering {
        self.x_min
            .total_cmp(&other.x_min)
            .then_with(|| self.y_min.total_cmp(&other.y_min))
            .then_with(|| self.x_max.total_cmp(&other.x_max))
            .then_with(|| self.y_max.total_cmp(&other.y_max))
    }
}
