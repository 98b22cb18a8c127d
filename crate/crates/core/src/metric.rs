//! Challenge scoring: greedy one-to-one matching, the count ratio
//! `TP / (TP + FP + FN)` per threshold, averaged over thresholds and then
//! over images.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::detection::{Detection, GroundTruthSet, PredictionSet};
use crate::exec;
use crate::geometry::BoundingBox;
use crate::stats;

/// The challenge's IoU threshold ladder.
pub fn default_thresholds() -> Vec<f64> {
    vec![0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75]
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricConfig {
    thresholds: Vec<f64>,
}

impl MetricConfig {
    /// Thresholds must be non-empty, strictly increasing, and inside (0, 1).
    pub fn new(thresholds: Vec<f64>) -> Result<Self, MetricError> {
        let ok = !thresholds.is_empty()
            && thresholds.iter().all(|t| t.is_finite() && *t > 0.0 && *t < 1.0)
            && thresholds.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(Self { thresholds })
        } else {
            Err(MetricError::InvalidThresholds)
        }
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            thresholds: default_thresholds(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("thresholds must be non-empty, strictly increasing, and inside (0, 1)")]
    InvalidThresholds,
    #[error("score coefficient is undefined without predictions or ground truth")]
    UndefinedCoefficient,
    #[error("no image has a ground-truth or predicted box")]
    EmptyEvaluation,
}

/// One matched (prediction, ground truth) pair at a given threshold.
/// Indices refer to the lists as passed in.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchPair {
    pub pred_index: usize,
    pub gt_index: usize,
    pub iou: f64,
}

/// Matching outcome at one threshold. Always `true_positives = |matches|`,
/// `tp + fp = |predictions|`, `tp + fn = |ground truths|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTally {
    pub threshold: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub matches: Vec<MatchPair>,
}

/// Per-image outcome. `score` is `None` for images with neither ground
/// truth nor predictions; those are excluded from the dataset mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageScore {
    pub image_id: String,
    pub tallies: Vec<ThresholdTally>,
    pub score: Option<f64>,
}

impl ImageScore {
    pub fn included(&self) -> bool {
        self.score.is_some()
    }
}

/// Dataset outcome: every image's tallies plus the mean over included images.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub per_image: Vec<ImageScore>,
    pub mc_dataset: f64,
    pub included_count: usize,
}

/// Greedy one-to-one matching. Predictions are visited in descending score
/// (ties: box order, then input index); each takes the unmatched ground
/// truth with the highest IoU at or above `threshold` (ties: lowest index).
/// Greedy can fall short of the optimal assignment; that is intentional.
pub fn match_detections(
    preds: &[Detection],
    gts: &[BoundingBox],
    threshold: f64,
) -> ThresholdTally {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| {
        preds[j]
            .score
            .total_cmp(&preds[i].score)
            .then_with(|| preds[i].bbox.lex_cmp(&preds[j].bbox))
            .then(i.cmp(&j))
    });

    let mut gt_taken = vec![false; gts.len()];
    let mut matches = Vec::new();
    for &pred_index in &order {
        let mut best: Option<(usize, f64)> = None;
        for (gt_index, gt) in gts.iter().enumerate() {
            if gt_taken[gt_index] {
                continue;
            }
            let iou = preds[pred_index].bbox.iou(gt);
            if iou >= threshold && best.is_none_or(|(_, top)| iou > top) {
                best = Some((gt_index, iou));
            }
        }
        if let Some((gt_index, iou)) = best {
            gt_taken[gt_index] = true;
            matches.push(MatchPair {
                pred_index,
                gt_index,
                iou,
            });
        }
    }

    let tp = matches.len();
    ThresholdTally {
        threshold,
        true_positives: tp,
        false_positives: preds.len() - tp,
        false_negatives: gts.len() - tp,
        matches,
    }
}

/// `TP / (TP + FP + FN)` at one threshold.
pub fn score_coefficient(tally: &ThresholdTally) -> Result<f64, MetricError> {
    let denom = tally.true_positives + tally.false_positives + tally.false_negatives;
    if denom == 0 {
        return Err(MetricError::UndefinedCoefficient);
    }
    Ok(tally.true_positives as f64 / denom as f64)
}

/// Mean coefficient over the config's thresholds. An image with neither
/// predictions nor ground truth comes back excluded (`score: None`).
pub fn image_score(
    image_id: &str,
    preds: &[Detection],
    gts: &[BoundingBox],
    cfg: &MetricConfig,
) -> ImageScore {
    let tallies: Vec<ThresholdTally> = cfg
        .thresholds()
        .iter()
        .map(|&t| match_detections(preds, gts, t))
        .collect();
    let score = if preds.is_empty() && gts.is_empty() {
        None
    } else {
        let coefficients: Vec<f64> = tallies
            .iter()
            .map(|tally| {
                score_coefficient(tally).expect("a non-excluded image has a positive denominator")
            })
            .collect();
        Some(stats::mean(&coefficients))
    };
    ImageScore {
        image_id: image_id.to_string(),
        tallies,
        score,
    }
}

/// Scores the union of both image universes; an id missing on one side is
/// treated as empty there. Images are evaluated and averaged in ascending
/// id order.
pub fn dataset_score(
    preds: &PredictionSet,
    gts: &GroundTruthSet,
    cfg: &MetricConfig,
) -> Result<ScoreReport, MetricError> {
    run_scoring(preds, gts, cfg, true)
}

/// Sequential twin of [`dataset_score`]; same report bit for bit.
pub fn dataset_score_seq(
    preds: &PredictionSet,
    gts: &GroundTruthSet,
    cfg: &MetricConfig,
) -> Result<ScoreReport, MetricError> {
    run_scoring(preds, gts, cfg, false)
}

fn run_scoring(
    preds: &PredictionSet,
    gts: &GroundTruthSet,
    cfg: &MetricConfig,
    parallel: bool,
) -> Result<ScoreReport, MetricError> {
    let image_ids: BTreeSet<&String> = preds.entries.keys().chain(gts.entries.keys()).collect();
    let jobs: Vec<(String, Vec<Detection>, Vec<BoundingBox>)> = image_ids
        .into_iter()
        .map(|id| (id.clone(), preds.detections(id).to_vec(), gts.boxes(id).to_vec()))
        .collect();

    let cfg = cfg.clone();
    let run = move |(id, dets, boxes): (String, Vec<Detection>, Vec<BoundingBox>)| {
        image_score(&id, &dets, &boxes, &cfg)
    };
    let per_image = if parallel {
        exec::collect_ordered(jobs, run)
    } else {
        exec::collect_ordered_seq(jobs, run)
    };

    let included: Vec<f64> = per_image.iter().filter_map(|img| img.score).collect();
    if included.is_empty() {
        return Err(MetricError::EmptyEvaluation);
    }
    Ok(ScoreReport {
        mc_dataset: stats::mean(&included),
        included_count: included.len(),
        per_image,
    })
}
