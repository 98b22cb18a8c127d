use enscore::detection::{detection_order, Detection, PredictionSet};
use enscore::ensemble::{
    cluster_detections, ensemble_dataset, ensemble_dataset_seq, ensemble_image, ensemble_score,
    Cluster, EnsembleConfig,
};
use enscore::geometry::BoundingBox;
use enscore::io::write_predictions_csv;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn detections(max_len: usize) -> impl Strategy<Value = Vec<Detection>> {
    prop::collection::vec(
        (0.0..400.0, 0.0..400.0, 0.5..120.0, 0.5..120.0, 0.0..=1.0f64, 0usize..4),
        0..max_len,
    )
    .prop_map(|raw| {
        raw.into_iter()
            .map(|(x, y, w, h, score, m)| {
                Detection::new(
                    BoundingBox::from_xywh(x, y, w, h).unwrap(),
                    score,
                    format!("m{m}"),
                )
            })
            .collect()
    })
}

fn sorted(mut dets: Vec<Detection>) -> Vec<Detection> {
    dets.sort_by(detection_order);
    dets
}

/// Detections stacked on a slot grid: one distinct box per slot, `copies`
/// identical detections on it. Slots never overlap, so clustering under the
/// default threshold reproduces the stacks.
fn slot_stacks() -> impl Strategy<Value = (Vec<Vec<Detection>>, usize)> {
    (prop::collection::vec(0.0..=1.0f64, 1..6), 1usize..4).prop_map(|(scores, copies)| {
        let stacks = scores
            .into_iter()
            .enumerate()
            .map(|(slot, score)| {
                let x = slot as f64 * 500.0;
                let bbox = BoundingBox::new(x, 0.0, x + 100.0, 100.0).unwrap();
                (0..copies)
                    .map(|_| Detection::new(bbox, score, "m"))
                    .collect()
            })
            .collect();
        (stacks, copies)
    })
}

fn model_sets(models: usize) -> impl Strategy<Value = Vec<PredictionSet>> {
    prop::collection::vec(
        prop::collection::vec(detections(6), 1..4),
        models..=models,
    )
    .prop_map(|per_model| {
        per_model
            .into_iter()
            .enumerate()
            .map(|(m, images)| {
                let tag = format!("m{m}");
                let mut set = PredictionSet::new(tag.clone());
                for (i, dets) in images.into_iter().enumerate() {
                    let dets = dets
                        .into_iter()
                        .map(|d| Detection::new(d.bbox, d.score, tag.clone()))
                        .collect();
                    set.entries.insert(format!("img{i}"), dets);
                }
                set
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn clustering_partitions_the_input(dets in detections(24), iou in 0.05..0.95f64) {
        let clusters = cluster_detections(&dets, iou);
        let recovered: Vec<Detection> = clusters
            .iter()
            .flat_map(|c| c.members().iter().cloned())
            .collect();
        prop_assert_eq!(sorted(recovered), sorted(dets));
    }

    #[test]
    fn every_member_meets_its_seed(dets in detections(24), iou in 0.05..0.95f64) {
        for cluster in cluster_detections(&dets, iou) {
            let seed = cluster.seed().bbox;
            for member in cluster.members() {
                prop_assert!(member.bbox.iou(&seed) >= iou);
            }
        }
    }

    #[test]
    fn seed_has_the_highest_score(dets in detections(24), iou in 0.05..0.95f64) {
        for cluster in cluster_detections(&dets, iou) {
            let seed_score = cluster.seed().score;
            for member in cluster.members() {
                prop_assert!(member.score <= seed_score);
            }
        }
    }

    #[test]
    fn score_never_exceeds_one_when_scale_covers_the_cluster(
        mut scores in prop::collection::vec(0.0..=1.0f64, 1..12),
        extra in 0usize..6,
    ) {
        scores.sort_by(|a, b| b.total_cmp(a));
        let bbox = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let members: Vec<Detection> = scores
            .iter()
            .map(|&s| Detection::new(bbox, s, "m"))
            .collect();
        let n_scale = (members.len() + extra) as f64;
        let cluster = Cluster::new(members).unwrap();
        prop_assert!(ensemble_score(&cluster, n_scale) <= 1.0);
    }

    #[test]
    fn full_agreement_on_stacks_is_a_fixed_point((stacks, copies) in slot_stacks()) {
        let cfg = EnsembleConfig {
            n_scale: copies as f64,
            post_threshold: 0.0,
            ..EnsembleConfig::default()
        };
        let pooled: Vec<Detection> = stacks.iter().flatten().cloned().collect();

        let mut expected: Vec<Detection> = stacks
            .iter()
            .filter(|stack| stack[0].score >= cfg.pre_threshold)
            .map(|stack| Detection::new(stack[0].bbox, stack[0].score, "ensemble"))
            .collect();
        expected.sort_by(detection_order);

        let fused = ensemble_image(&[pooled], &cfg).unwrap();
        prop_assert_eq!(fused, expected);
    }

    #[test]
    fn lone_detections_below_full_confidence_are_suppressed(score in 0.0..1.0f64) {
        let det = Detection::new(BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap(), score, "m");
        let fused = ensemble_image(&[vec![det]], &EnsembleConfig::default()).unwrap();
        prop_assert!(fused.is_empty());
    }

    #[test]
    fn input_order_never_changes_the_output(sets in model_sets(3), seed in 0u64..1000) {
        let cfg = EnsembleConfig::default();
        let baseline = write_predictions_csv(&ensemble_dataset(&sets, &cfg).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shuffled = sets;
        shuffled.shuffle(&mut rng);
        for set in &mut shuffled {
            for dets in set.entries.values_mut() {
                dets.shuffle(&mut rng);
            }
        }
        let reordered = write_predictions_csv(&ensemble_dataset(&shuffled, &cfg).unwrap());
        prop_assert_eq!(baseline, reordered);
    }

    #[test]
    fn parallel_and_sequential_agree(sets in model_sets(3)) {
        let cfg = EnsembleConfig::default();
        prop_assert_eq!(
            ensemble_dataset(&sets, &cfg).unwrap(),
            ensemble_dataset_seq(&sets, &cfg).unwrap()
        );
    }
}
