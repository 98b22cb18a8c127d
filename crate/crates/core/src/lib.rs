//! Ensembling and scoring for pneumonia-style bounding-box detection.
//!
//! The pipeline pools detections from several models per image, filters
//! them by confidence, clusters mutually overlapping boxes, and fuses each
//! cluster into one detection whose score rewards cross-model agreement.
//! Fused outputs are scored against ground truth with a greedy one-to-one
//! matcher averaged over a ladder of IoU thresholds.
//!
//! Dataset-level entry points run images in parallel by default (the
//! `parallel` feature); `*_seq` variants run the same code on one thread
//! and produce bit-identical results.

pub mod detection;
pub mod ensemble;
mod exec;
pub mod geometry;
pub mod io;
pub mod metric;
pub mod stats;
pub mod synth;

pub use detection::{Detection, GroundTruthSet, PredictionSet};
pub use geometry::BoundingBox;
