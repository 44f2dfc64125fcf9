use nalgebra::{DMatrix, DVector};
use projconvex::projective::{apply, cross_ratio, lift_to_slpm, ProjMap, ProjPoint};
use proptest::prelude::*;

fn invertible(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * n)
        .prop_map(move |xs| DMatrix::from_row_slice(n, n, &xs) + DMatrix::identity(n, n) * 2.5)
}

fn line_point(a: &DVector<f64>, b: &DVector<f64>, t: f64) -> ProjPoint {
    ProjPoint::normalize(&(a * t.cos() + b * t.sin())).unwrap()
}

proptest! {
    #[test]
    fn cross_ratio_is_projectively_invariant(
        g in invertible(3),
        a in prop::collection::vec(-1.0..1.0f64, 3),
        b in prop::collection::vec(-1.0..1.0f64, 3),
        ts in prop::collection::vec(0.0..3.0f64, 4),
    ) {
        let (a, b) = (DVector::from_vec(a), DVector::from_vec(b));
        prop_assume!(a.norm() > 0.1 && b.norm() > 0.1);
        prop_assume!((a.normalize() - b.normalize()).norm() > 0.1 && (a.normalize() + b.normalize()).norm() > 0.1);
        let mut ts = ts;
        ts.sort_by(f64::total_cmp);
        prop_assume!(ts.windows(2).all(|w| w[1] - w[0] > 0.05));
        let pts: Vec<ProjPoint> = ts.iter().map(|t| line_point(&a, &b, *t)).collect();
        let map = ProjMap::new(g).unwrap();
        let moved: Vec<ProjPoint> = pts.iter().map(|p| apply(&map, p).unwrap()).collect();
        let before = cross_ratio(&pts[0], &pts[1], &pts[2], &pts[3]).unwrap();
        let after = cross_ratio(&moved[0], &moved[1], &moved[2], &moved[3]).unwrap();
        prop_assert!((before - after).abs() <= 1e-7 * before.abs().max(1.0));
    }

    #[test]
    fn lift_has_unit_determinant(g in invertible(3), reversing in any::<bool>()) {
        let lifted = lift_to_slpm(&ProjMap::new(g.clone()).unwrap(), reversing).unwrap();
        let det = lifted.matrix().determinant();
        let expected = if reversing { -1.0 } else { 1.0 };
        prop_assert!((det - expected).abs() < 1e-10);
        prop_assert!(lifted.proportional_to(&ProjMap::new(g).unwrap(), 1e-9));
    }

    #[test]
    fn compose_then_inverse_is_identity(g in invertible(4), x in prop::collection::vec(-1.0..1.0f64, 4)) {
        let x = DVector::from_vec(x);
        prop_assume!(x.norm() > 0.1);
        let p = ProjPoint::normalize(&x).unwrap();
        let map = ProjMap::new(g).unwrap();
        let back = apply(&map.inverse().compose(&map), &p).unwrap();
        prop_assert!(back.approx_eq(&p, 1e-9));
    }
}

#[test]
fn cross_ratio_of_harmonic_quadruple() {
    let p = |x: f64, w: f64| ProjPoint::from_slice(&[x, w]).unwrap();
    let value = cross_ratio(&p(0.0, 1.0), &p(1.0, 0.0), &p(1.0, 1.0), &p(-1.0, 1.0)).unwrap();
    assert!((value + 1.0).abs() < 1e-12);
}
