use nalgebra::DVector;
use projconvex::convex::{hausdorff_distance, Cone, ConvexBody, ConvexityVerdict, PolyCone};
use projconvex::projective::ProjPoint;
use proptest::prelude::*;

fn generators(dim: usize) -> impl Strategy<Value = Vec<DVector<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, dim - 1), dim + 1..dim + 5).prop_map(
        move |rows| {
            rows.into_iter()
                .map(|mut r| {
                    r.push(1.0);
                    DVector::from_vec(r)
                })
                .collect()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn double_dual_is_the_cone(gens in generators(3)) {
        let cone = Cone::Polyhedral(PolyCone::from_generators(gens).unwrap());
        prop_assume!(cone.is_properly_convex());
        let double = cone.dual().unwrap().dual().unwrap();
        let h = hausdorff_distance(&cone.to_body(2).unwrap(), &double.to_body(2).unwrap()).unwrap();
        prop_assert!(h < 1e-9);
    }

    #[test]
    fn dual_pairs_nonnegatively(gens in generators(4)) {
        let cone = PolyCone::from_generators(gens).unwrap();
        prop_assume!(cone.is_properly_convex());
        let Cone::Polyhedral(dual) = Cone::Polyhedral(cone.clone()).dual().unwrap() else {
            unreachable!()
        };
        for phi in dual.generators() {
            for v in cone.generators() {
                prop_assert!(phi.dot(&v) >= -1e-9);
            }
        }
    }

    #[test]
    fn hull_contains_its_points(gens in generators(3), w in prop::collection::vec(0.0..1.0f64, 8)) {
        let body = ConvexBody::hull_of(&gens, 1).unwrap();
        prop_assert_eq!(body.properly_convex_check(), ConvexityVerdict::ProperlyConvex);
        let combo = gens.iter().zip(w.iter().cycle()).fold(DVector::zeros(3), |acc, (g, wi)| acc + g * (*wi + 0.01));
        prop_assert!(body.contains_closed(&ProjPoint::from_slice(combo.as_slice()).unwrap(), 1e-9));
    }
}

#[test]
fn square_dual_is_a_square() {
    let corners = [[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]
        .map(|[x, y]| DVector::from_vec(vec![x, y, 1.0]))
        .to_vec();
    let square = ConvexBody::hull_of(&corners, 0).unwrap();
    let dual = square.dual(0).unwrap();
    assert_eq!(dual.vertices().len(), 4);
    assert_eq!(dual.halfspaces().len(), 4);
}
