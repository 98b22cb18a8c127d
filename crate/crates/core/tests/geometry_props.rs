use enscore::geometry::BoundingBox;
use proptest::prelude::*;

fn boxes() -> impl Strategy<Value = BoundingBox> {
    (0.0..400.0, 0.0..400.0, 0.5..120.0, 0.5..120.0)
        .prop_map(|(x, y, w, h)| BoundingBox::from_xywh(x, y, w, h).unwrap())
}

/// Integer-cornered boxes on a 64x64 grid, so IoU has an exact rational
/// oracle by counting unit cells.
fn int_interval() -> impl Strategy<Value = (i64, i64)> {
    (0i64..64, 1i64..=64).prop_map(|(lo, len)| (lo, (lo + len).min(64)))
}

fn cells(lo: (i64, i64), hi: (i64, i64)) -> i64 {
    (hi.0 - lo.0).max(0) * (hi.1 - lo.1).max(0)
}

fn lerp_toward(from: BoundingBox, to: BoundingBox, t: f64) -> BoundingBox {
    let mix = |a: f64, b: f64| a + (b - a) * t;
    BoundingBox::new(
        mix(from.x_min(), to.x_min()),
        mix(from.y_min(), to.y_min()),
        mix(from.x_max(), to.x_max()),
        mix(from.y_max(), to.y_max()),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn iou_is_symmetric(a in boxes(), b in boxes()) {
        prop_assert_eq!(a.iou(&b), b.iou(&a));
    }

    #[test]
    fn iou_stays_in_unit_range(a in boxes(), b in boxes()) {
        let v = a.iou(&b);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn self_iou_is_one(a in boxes()) {
        prop_assert_eq!(a.iou(&a), 1.0);
    }

    #[test]
    fn shrinking_toward_a_box_never_lowers_iou(
        a in boxes(),
        b in boxes(),
        t1 in 0.0..1.0f64,
        t2 in 0.0..1.0f64,
    ) {
        let (t_lo, t_hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let near = lerp_toward(b, a, t_hi);
        let far = lerp_toward(b, a, t_lo);
        prop_assert!(a.iou(&near) >= a.iou(&far) - 1e-9);
    }

    #[test]
    fn integer_boxes_match_the_cell_counting_oracle(
        ax in int_interval(), ay in int_interval(),
        bx in int_interval(), by in int_interval(),
    ) {
        let a = BoundingBox::new(ax.0 as f64, ay.0 as f64, ax.1 as f64, ay.1 as f64).unwrap();
        let b = BoundingBox::new(bx.0 as f64, by.0 as f64, bx.1 as f64, by.1 as f64).unwrap();

        let inter_lo = (ax.0.max(bx.0), ay.0.max(by.0));
        let inter_hi = (ax.1.min(bx.1), ay.1.min(by.1));
        let inter = cells(inter_lo, inter_hi);
        let union = cells((ax.0, ay.0), (ax.1, ay.1)) + cells((bx.0, by.0), (bx.1, by.1)) - inter;
        let expected = inter as f64 / union as f64;

        prop_assert!((a.iou(&b) - expected).abs() <= 1e-12);
    }

    #[test]
    fn intersection_never_exceeds_either_area(a in boxes(), b in boxes()) {
        let inter = a.intersection_area(&b);
        prop_assert!(inter <= a.area() + 1e-9);
        prop_assert!(inter <= b.area() + 1e-9);
        prop_assert!(inter >= 0.0);
    }
}
