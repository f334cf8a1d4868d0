use calcap::geometry::{distance_to_set, AxisBox, BoxUnionSet, DyadicLattice, Point};
use calcap::kernels::KernelKind;
use calcap::measures::{ball_box_volume, potential, CellMeasure};
use proptest::prelude::*;

fn unit_box() -> impl Strategy<Value = AxisBox> {
    (-3.0f64..3.0, 0.01f64..2.0, -3.0f64..3.0, 0.01f64..2.0).prop_map(|(x, w, t, h)| AxisBox::rect(x, x + w, t, t + h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dilation_keeps_centre_and_contains(b in unit_box(), k in 1.0f64..50.0) {
        let d = b.dilate(k);
        prop_assert!(d.contains_box(&b));
        prop_assert!(d.center().dist(&b.center()) <= 1e-12 * k * 10.0);
        prop_assert!((d.diam() - k * b.diam()).abs() <= 1e-9 * k * b.diam());
    }

    #[test]
    fn children_tile_the_parent(g in -3i32..6, i in -20i64..20, j in -20i64..20) {
        let q = DyadicLattice::standard(1).cube(g, vec![i, j]);
        let kids = q.children();
        let vol: f64 = kids.iter().map(|c| c.to_box().volume()).sum();
        prop_assert!((vol - q.to_box().volume()).abs() <= 1e-12 * vol);
        for (a, c) in kids.iter().enumerate() {
            prop_assert_eq!(&c.parent(), &q);
            prop_assert!(q.contains_cube(c) && !q.interiors_disjoint(c));
            for other in &kids[a + 1..] {
                prop_assert!(c.interiors_disjoint(other));
                prop_assert!(!c.to_box().interiors_overlap(&other.to_box()));
            }
        }
    }

    #[test]
    fn distance_is_one_lipschitz(b in unit_box(), p in (-6.0f64..6.0, -6.0f64..6.0), q in (-6.0f64..6.0, -6.0f64..6.0)) {
        let set = BoxUnionSet::single(b);
        let (p, q) = (Point::xt(p.0, p.1), Point::xt(q.0, q.1));
        let (dp, dq) = (distance_to_set(&p, &set).unwrap(), distance_to_set(&q, &set).unwrap());
        prop_assert!((dp - dq).abs() <= p.dist(&q) + 1e-12);
        prop_assert_eq!(dp == 0.0, set.contains(&p));
    }

    #[test]
    fn ball_volume_is_bounded(b in unit_box(), c in (-4.0f64..4.0, -4.0f64..4.0), r in 0.01f64..4.0) {
        let v = ball_box_volume(&[c.0, c.1], r, &b, 1).value;
        prop_assert!(v >= 0.0);
        prop_assert!(v <= b.volume() * (1.0 + 1e-12));
        prop_assert!(v <= std::f64::consts::PI * r * r * (1.0 + 1e-12));
        let bigger = ball_box_volume(&[c.0, c.1], 1.5 * r, &b, 1).value;
        prop_assert!(bigger >= v - 1e-12);
    }

    #[test]
    fn potential_is_linear_in_the_density(b in unit_box(), s in 0.1f64..10.0, p in (-6.0f64..6.0, -6.0f64..6.0)) {
        let set = BoxUnionSet::single(b);
        let p = Point::xt(p.0, p.1);
        prop_assume!(distance_to_set(&p, &set).unwrap() > 0.05);
        let mu = CellMeasure::lebesgue(&set);
        let one = potential(KernelKind::PSym, &mu, &p, 1e-11).unwrap();
        let many = potential(KernelKind::PSym, &mu.scaled(s), &p, 1e-11).unwrap();
        prop_assert!((many - s * one).abs() <= 1e-9 * (s * one).max(1e-12));
    }
}
