//! Cross-model fusion: confidence pre-filter, greedy IoU clustering, score
//! and corner fusion per cluster, post-filter.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::detection::{detection_order, Detection, PredictionSet};
use crate::exec;
use crate::geometry::BoundingBox;
use crate::stats;

/// Model tag attached to every fused detection.
pub const ENSEMBLE_TAG: &str = "ensemble";

/// How the spread term is applied to box coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CornerMode {
    /// `median + alpha * sigma` on every coordinate.
    #[default]
    Literal,
    /// `median - alpha * sigma` on minima, `median + alpha * sigma` on
    /// maxima, so a positive alpha always expands the box outward.
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    /// Detections below this score are dropped before clustering.
    pub pre_threshold: f64,
    /// Minimum IoU against a cluster's seed box for membership.
    pub cluster_iou: f64,
    /// Fixed divisor for fused scores, nominally the model count.
    pub n_scale: f64,
    /// Weight of the spread term added to fused coordinates.
    pub alpha: f64,
    /// Fused detections below this score are dropped.
    pub post_threshold: f64,
    pub corner_mode: CornerMode,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            pre_threshold: 0.5,
            cluster_iou: 0.25,
            n_scale: 4.0,
            alpha: 0.1,
            post_threshold: 0.25,
            corner_mode: CornerMode::Literal,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(EnsembleError::InvalidConfig(what.to_string()))
            }
        };
        check(
            self.pre_threshold.is_finite() && (0.0..=1.0).contains(&self.pre_threshold),
            "pre_threshold must lie in [0, 1]",
        )?;
        check(
            self.post_threshold.is_finite() && (0.0..=1.0).contains(&self.post_threshold),
            "post_threshold must lie in [0, 1]",
        )?;
        check(
            self.cluster_iou > 0.0 && self.cluster_iou < 1.0,
            "cluster_iou must lie in (0, 1)",
        )?;
        check(
            self.n_scale.is_finite() && self.n_scale > 0.0,
            "n_scale must be positive",
        )?;
        check(self.alpha.is_finite(), "alpha must be finite")?;
        Ok(())
    }
}

/// Non-empty group of detections in canonical order. The first member is
/// the seed every other member was admitted against.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    members: Vec<Detection>,
}

impl Cluster {
    /// `None` when `members` is empty.
    pub fn new(members: Vec<Detection>) -> Option<Self> {
        if members.is_empty() {
            None
        } else {
            Some(Self { members })
        }
    }

    pub fn members(&self) -> &[Detection] {
        &self.members
    }

    pub fn seed(&self) -> &Detection {
        &self.members[0]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble config: {0}")]
    InvalidConfig(String),
    #[error("duplicate model tag {0:?}")]
    DuplicateModelTag(String),
    #[error("{}", degenerate_message(.image_id, .cluster))]
    DegenerateResult {
        /// Filled in when the failure is tied to a dataset image.
        image_id: Option<String>,
        cluster: Cluster,
    },
}

impl EnsembleError {
    fn in_image(self, id: &str) -> Self {
        match self {
            Self::DegenerateResult { cluster, .. } => Self::DegenerateResult {
                image_id: Some(id.to_string()),
                cluster,
            },
            other => other,
        }
    }
}

fn degenerate_message(image_id: &Option<String>, cluster: &Cluster) -> String {
    let seed = cluster.seed().bbox;
    let place = match image_id {
        Some(id) => format!(" in image {id:?}"),
        None => String::new(),
    };
    format!(
        "fused box{place} has no extent ({} members, seed ({}, {}, {}, {}))",
        cluster.members().len(),
        seed.x_min(),
        seed.y_min(),
        seed.x_max(),
        seed.y_max()
    )
}

/// Keeps detections with `score >= threshold`, preserving order.
pub fn filter_by_confidence(dets: &[Detection], threshold: f64) -> Vec<Detection> {
    dets.iter().filter(|d| d.score >= threshold).cloned().collect()
}

/// Greedy seed clustering. Detections are visited in canonical order; each
/// still-unassigned one seeds a cluster and absorbs every later unassigned
/// detection whose IoU with the seed box reaches `cluster_iou`. Membership
/// is tested against the seed only, never transitively, and the clusters
/// partition the input.
pub fn cluster_detections(dets: &[Detection], cluster_iou: f64) -> Vec<Cluster> {
    let mut ordered = dets.to_vec();
    ordered.sort_by(detection_order);

    let mut assigned = vec![false; ordered.len()];
    let mut clusters = Vec::new();
    for i in 0..ordered.len() {
        if assigned[i] {
            continue;
        }
        assigned[i] = true;
        let seed_box = ordered[i].bbox;
        let mut members = vec![ordered[i].clone()];
        for j in i + 1..ordered.len() {
            if !assigned[j] && ordered[j].bbox.iou(&seed_box) >= cluster_iou {
                assigned[j] = true;
                members.push(ordered[j].clone());
            }
        }
        clusters.push(Cluster { members });
    }
    clusters
}

/// Fused score: mean member score scaled by `member count / n_scale`.
/// Clusters smaller than `n_scale` are penalized; no clamping, so the
/// result can pass 1 when a cluster outgrows `n_scale`.
pub fn ensemble_score(cluster: &Cluster, n_scale: f64) -> f64 {
    let scores: Vec<f64> = cluster.members().iter().map(|d| d.score).collect();
    stats::mean(&scores) * (scores.len() as f64 / n_scale)
}

/// Fused box: per scalar coordinate, the member median plus `alpha` times
/// the member population spread, signed per `mode`. Coordinates clamp at
/// zero; a result without positive extent is an error.
pub fn ensemble_box(
    cluster: &Cluster,
    alpha: f64,
    mode: CornerMode,
) -> Result<BoundingBox, EnsembleError> {
    let fuse = |pick: fn(&BoundingBox) -> f64, sign: f64| {
        let values: Vec<f64> = cluster.members().iter().map(|d| pick(&d.bbox)).collect();
        stats::median(&values) + sign * alpha * stats::population_std_dev(&values)
    };
    let (min_sign, max_sign) = match mode {
        CornerMode::Literal => (1.0, 1.0),
        CornerMode::Signed => (-1.0, 1.0),
    };
    let corners = [
        fuse(BoundingBox::x_min, min_sign),
        fuse(BoundingBox::y_min, min_sign),
        fuse(BoundingBox::x_max, max_sign),
        fuse(BoundingBox::y_max, max_sign),
    ];

    let degenerate = || EnsembleError::DegenerateResult {
        image_id: None,
        cluster: cluster.clone(),
    };
    if corners.iter().any(|v| !v.is_finite()) {
        return Err(degenerate());
    }
    let [x_min, y_min, x_max, y_max] = corners.map(|v| v.max(0.0));
    BoundingBox::new(x_min, y_min, x_max, y_max).map_err(|_| degenerate())
}

/// Full per-image pipeline: pre-filter, cluster, fuse each cluster's score
/// and box, drop fused detections below `post_threshold`. Output carries
/// [`ENSEMBLE_TAG`] and is sorted by descending score.
pub fn ensemble_image(
    per_model: &[Vec<Detection>],
    cfg: &EnsembleConfig,
) -> Result<Vec<Detection>, EnsembleError> {
    cfg.validate()?;
    ensemble_image_counted(per_model, cfg).map(|(dets, _)| dets)
}

fn ensemble_image_counted(
    per_model: &[Vec<Detection>],
    cfg: &EnsembleConfig,
) -> Result<(Vec<Detection>, usize), EnsembleError> {
    let pooled: Vec<Detection> = per_model.iter().flatten().cloned().collect();
    let kept = filter_by_confidence(&pooled, cfg.pre_threshold);
    let clusters = cluster_detections(&kept, cfg.cluster_iou);
    let cluster_count = clusters.len();

    let mut fused = Vec::new();
    for cluster in &clusters {
        let score = ensemble_score(cluster, cfg.n_scale);
        if score < cfg.post_threshold {
            continue;
        }
        let bbox = ensemble_box(cluster, cfg.alpha, cfg.corner_mode)?;
        fused.push(Detection::new(bbox, score, ENSEMBLE_TAG));
    }
    fused.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.bbox.lex_cmp(&b.bbox))
    });
    Ok((fused, cluster_count))
}

/// Input totals and fusion counts from one dataset run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    /// (model tag, detection count) per input set, in input order.
    pub per_model_inputs: Vec<(String, usize)>,
    /// Clusters formed across all images.
    pub clusters: usize,
    /// Fused detections that survived the post-filter.
    pub survivors: usize,
}

/// Ensembles every image appearing in any input set; a model without an
/// entry for an image contributes nothing there. Every union image id is
/// present in the output, empty or not.
pub fn ensemble_dataset(
    sets: &[PredictionSet],
    cfg: &EnsembleConfig,
) -> Result<PredictionSet, EnsembleError> {
    run_dataset(sets, cfg, true).map(|(set, _)| set)
}

/// Sequential twin of [`ensemble_dataset`]; same output bit for bit.
pub fn ensemble_dataset_seq(
    sets: &[PredictionSet],
    cfg: &EnsembleConfig,
) -> Result<PredictionSet, EnsembleError> {
    run_dataset(sets, cfg, false).map(|(set, _)| set)
}

/// [`ensemble_dataset`] plus the counts the CLI reports.
pub fn ensemble_dataset_with_stats(
    sets: &[PredictionSet],
    cfg: &EnsembleConfig,
) -> Result<(PredictionSet, EnsembleStats), EnsembleError> {
    run_dataset(sets, cfg, true)
}

fn run_dataset(
    sets: &[PredictionSet],
    cfg: &EnsembleConfig,
    parallel: bool,
) -> Result<(PredictionSet, EnsembleStats), EnsembleError> {
    cfg.validate()?;
    let mut tags = BTreeSet::new();
    for set in sets {
        if !tags.insert(set.model_id.as_str()) {
            return Err(EnsembleError::DuplicateModelTag(set.model_id.clone()));
        }
    }

    let image_ids: BTreeSet<&String> = sets.iter().flat_map(|s| s.entries.keys()).collect();
    let jobs: Vec<(String, Vec<Vec<Detection>>)> = image_ids
        .into_iter()
        .map(|id| {
            let per_model = sets.iter().map(|s| s.detections(id).to_vec()).collect();
            (id.clone(), per_model)
        })
        .collect();

    let cfg = *cfg;
    let run = move |(id, per_model): (String, Vec<Vec<Detection>>)| {
        let outcome = ensemble_image_counted(&per_model, &cfg);
        (id, outcome)
    };
    let results = if parallel {
        exec::collect_ordered(jobs, run)
    } else {
        exec::collect_ordered_seq(jobs, run)
    };

    let mut output = PredictionSet::new(ENSEMBLE_TAG);
    let mut clusters = 0;
    let mut survivors = 0;
    for (id, outcome) in results {
        let (dets, in_image) = outcome.map_err(|e| e.in_image(&id))?;
        clusters += in_image;
        survivors += dets.len();
        output.entries.insert(id, dets);
    }
    let stats = EnsembleStats {
        per_model_inputs: sets
            .iter()
            .map(|s| (s.model_id.clone(), s.total_detections()))
            .collect(),
        clusters,
        survivors,
    };
    Ok((output, stats))
}
