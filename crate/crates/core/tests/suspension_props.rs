use nalgebra::{DMatrix, DVector};
use projconvex::projective::{lift_to_slpm, ProjMap, ProjPoint};
use projconvex::suspension::{base_action, radial_projection, suspend_point, SuspensionCtx};
use proptest::prelude::*;

fn unimodular() -> impl Strategy<Value = ProjMap> {
    prop::collection::vec(-1.0..1.0f64, 9).prop_map(|xs| {
        let m = DMatrix::from_row_slice(3, 3, &xs) + DMatrix::identity(3, 3) * 2.5;
        let reversing = m.determinant() < 0.0;
        lift_to_slpm(&ProjMap::new(m).unwrap(), reversing).unwrap()
    })
}

fn sphere_point() -> impl Strategy<Value = ProjPoint> {
    prop::collection::vec(-1.0..1.0f64, 3)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 0.01)
        .prop_map(|v| ProjPoint::spherical(&DVector::from_vec(v)).unwrap())
}

proptest! {
    #[test]
    fn suspension_covers_the_base_action(g in unimodular(), h in unimodular(), p in sphere_point(), t in 0.1..10.0f64) {
        let ctx = SuspensionCtx::new(2, [("g".to_string(), g.clone()), ("h".to_string(), h.clone())], 2.0).unwrap();
        let (q, r) = ctx.suspend_word(&["g", "h"], &p, t).unwrap();
        let expected = base_action(&g.compose(&h), &p).unwrap();
        prop_assert!(q.approx_eq(&expected, 1e-10));
        let y = g.matrix() * h.matrix() * suspend_point(&p, t).unwrap();
        prop_assert!((r - y.norm()).abs() < 1e-9 * r.max(1.0));
    }

    #[test]
    fn deck_maps_commute_with_dilation(g in unimodular(), p in sphere_point(), t in 0.1..10.0f64) {
        let ctx = SuspensionCtx::new(2, [("g".to_string(), g)], 3.0).unwrap();
        let (a, ta) = ctx.suspend_deck("g", &p, t).unwrap();
        let (a, ta) = ctx.dilate(&a, ta).unwrap();
        let (b, tb) = ctx.dilate(&p, t).unwrap();
        let (b, tb) = ctx.suspend_deck("g", &b, tb).unwrap();
        prop_assert!(a.approx_eq(&b, 1e-12));
        prop_assert!((ta - tb).abs() < 1e-9 * ta);
    }

    #[test]
    fn radial_projection_inverts_suspension(p in sphere_point(), t in 0.1..10.0f64) {
        let back = radial_projection(&suspend_point(&p, t).unwrap()).unwrap();
        prop_assert!(back.approx_eq(&p, 1e-12));
    }
}
