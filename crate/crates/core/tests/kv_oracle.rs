use nalgebra::{DMatrix, DVector};
use projconvex::convex::{Cone, PolyCone};
use projconvex::kv::{kv_perturbation_delta, KvContext};
use proptest::prelude::*;

/// `∫_{Lorentz} e^{−φ(x)} dφ` up to a constant is `q(x)^{−d/2}`.
fn lorentz_ratio(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let q = |v: &DVector<f64>| v[0] * v[0] - v.rows(1, v.len() - 1).norm_squared();
    (q(x) / q(y)).powf(-(x.len() as f64) / 2.0)
}

fn lorentz_point() -> impl Strategy<Value = DVector<f64>> {
    (prop::collection::vec(-1.0..1.0f64, 2), 0.3..2.0f64).prop_map(|(tail, lift)| {
        let t = DVector::from_vec(tail);
        DVector::from_vec(vec![t.norm() + lift, t[0], t[1]])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lorentz_value_ratios_match_closed_form(x in lorentz_point(), y in lorentz_point()) {
        let ctx = KvContext::new(Cone::lorentz(3), 400_000, 3).unwrap();
        let ratio = ctx.kv_value(&x).unwrap() / ctx.kv_value(&y).unwrap();
        prop_assert!((ratio / lorentz_ratio(&x, &y) - 1.0).abs() < 0.05);
    }

    #[test]
    fn log_hessian_is_symmetric_positive(x in prop::collection::vec(0.3..3.0f64, 3)) {
        let ctx = KvContext::new(Cone::orthant(3), 100_000, 9).unwrap();
        let h = ctx.kv_log_hessian(&DVector::from_vec(x)).unwrap();
        prop_assert_eq!(h.clone(), h.transpose());
        prop_assert!(h.symmetric_eigenvalues().min() > 0.0);
    }
}

#[test]
fn same_seed_same_value() {
    let x = DVector::from_vec(vec![1.0, 2.0, 0.5]);
    let a = KvContext::new(Cone::orthant(3), 50_000, 42).unwrap();
    let b = KvContext::new(Cone::orthant(3), 50_000, 42).unwrap();
    assert_eq!(a.kv_value(&x).unwrap(), b.kv_value(&x).unwrap());
}

#[test]
fn nearby_cones_have_nearby_functions() {
    let x = DVector::from_vec(vec![1.0, 1.0, 1.0]);
    let tilt = |e: f64| {
        let g = DMatrix::from_row_slice(3, 3, &[1.0, e, 0.0, 0.0, 1.0, e, e, 0.0, 1.0]);
        let gens = (0..3).map(|k| g.column(k).into_owned()).collect();
        Cone::Polyhedral(PolyCone::from_generators(gens).unwrap())
    };
    let base = KvContext::new(tilt(0.0), 400_000, 1).unwrap();
    let deltas: Vec<f64> = [0.04, 0.01]
        .iter()
        .map(|e| {
            let other = KvContext::new(tilt(*e), 400_000, 1).unwrap();
            kv_perturbation_delta(&base, &other, &x).unwrap().value_delta
        })
        .collect();
    assert!(deltas[1] < deltas[0], "{deltas:?}");
}
