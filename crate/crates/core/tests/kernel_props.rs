use calcap::geometry::{AxisBox, BoxUnionSet, Point};
use calcap::kernels::*;
use calcap::rect2d::*;
use proptest::prelude::*;

fn displacement(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, dim).prop_filter("away from the pole", |z| z.iter().map(|v| v * v).sum::<f64>() > 1e-6)
}

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn kernels_obey_the_size_bound(z in (2usize..5).prop_flat_map(displacement)) {
        let n = z.len() as i32 - 1;
        for kind in KernelKind::ALL {
            let k = kernel_value(kind, &z);
            prop_assert!(k >= 0.0);
            prop_assert!(k <= size_bound(&z));
            prop_assert!(k <= norm(&z).powi(-n) * (1.0 + 1e-15));
        }
    }

    #[test]
    fn symmetric_part_is_the_mean(z in (2usize..5).prop_flat_map(displacement)) {
        let p = kernel_value(KernelKind::P, &z);
        let q = kernel_value(KernelKind::PConj, &z);
        let s = kernel_value(KernelKind::PSym, &z);
        prop_assert!((p + q - 2.0 * s).abs() <= 1e-15 * s.max(1e-300) * 4.0);
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        prop_assert_eq!(kernel_value(KernelKind::PConj, &neg), p);
    }

    #[test]
    fn kernels_are_homogeneous(z in displacement(3), lambda in 0.01f64..100.0) {
        let scaled: Vec<f64> = z.iter().map(|v| lambda * v).collect();
        for kind in KernelKind::ALL {
            let a = kernel_value(kind, &scaled);
            let b = kernel_value(kind, &z) / (lambda * lambda);
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }
    }

    #[test]
    fn suppressed_kernel_bounds(
        x in prop::collection::vec(-3.0f64..3.0, 2),
        y in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        prop_assume!(x != y);
        let f = BoxUnionSet::single(AxisBox::rect(-0.5, 0.5, -0.25, 0.25));
        let lambda = LipschitzDist::new(f).unwrap();
        let (px, py) = (Point::from_coords(x.clone()), Point::from_coords(y.clone()));
        let (lx, ly) = (lambda.eval(&px), lambda.eval(&py));
        for kind in KernelKind::ALL {
            let s = eval_suppressed(kind, &px, &py, &lambda).unwrap();
            let k = kernel_value(kind, px.sub(&py).coords());
            prop_assert!(s <= k);
            prop_assert!(s <= 1.0 / px.dist(&py));
            let cap = lx.max(ly).powi(-1);
            // the stated constant is 2^{n+1}; splitting on |x - y| against max Λ / 2 gives 2^n
            prop_assert!(s <= 4.0 * cap * (1.0 + 1e-12));
            prop_assert!(s <= 2.0 * cap * (1.0 + 1e-12));
        }
    }

    #[test]
    fn regularized_kernel_agrees_far_away(z in displacement(2), tau in 0.01f64..5.0) {
        let bump = BumpProfile::default();
        let r = norm(&z);
        for kind in KernelKind::ALL {
            let v = regularized_value(kind, &z, tau, &bump);
            let k = kernel_value(kind, &z);
            prop_assert!(v <= k && v >= 0.0);
            if r >= tau {
                prop_assert_eq!(v, k);
            }
            if r <= 0.5 * tau {
                prop_assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn rectangle_extremes_are_comparable(r in 1e-3f64..1e3) {
        let (big, small) = (max_value(r), vertex_min(r));
        prop_assert!(small <= big);
        prop_assert!(big <= 4.0 * small);
        let c = normalized_capacity(r);
        prop_assert!((capacity_formula(r, 1.0).unwrap() - c).abs() <= 1e-12 * c);
        let (lo, hi) = rect_bracket(r, 1.0).unwrap();
        prop_assert!(lo <= c && c <= hi);
    }

    #[test]
    fn rectangle_potential_is_symmetric(r in 0.05f64..20.0, u in 0.0f64..1.0, v in -2.0f64..3.0) {
        let x = u * r;
        let a = unit_sym_potential(r, x, v);
        prop_assert!(a >= 0.0);
        let flipped = unit_sym_potential(r, r - x, 1.0 - v);
        prop_assert!((a - flipped).abs() <= 1e-12 * a.max(1.0));
        prop_assert!(unit_potential(r, x, v) <= max_value(r) * (1.0 + 1e-12));
    }

    #[test]
    fn rectangle_potential_scales(lx in 0.1f64..5.0, lt in 0.1f64..5.0, u in 0.0f64..1.0, v in 0.0f64..2.0) {
        let rect = NormalizedRect::new(lx, lt).unwrap();
        let p = Point::xt(u * lx, v * lt);
        let unit = unit_potential(lx / lt, u * lx / lt, v);
        prop_assert!((rect_potential(&rect, &p) - lt * unit).abs() <= 1e-12 * unit.max(1.0) * lt);
    }
}

#[test]
fn vertex_value_is_half_the_minimum() {
    for r in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let v = unit_sym_potential(r, 0.0, 0.0);
        assert!((v - 0.5 * vertex_min(r)).abs() <= 1e-12);
        assert!((unit_potential(r, 0.5 * r, 1.0) - max_value(r)).abs() <= 1e-12);
    }
}
