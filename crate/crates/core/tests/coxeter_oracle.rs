use nalgebra::DMatrix;
use projconvex::coxeter::{
    cartan_from_orders, fundamental_orbit, relation_check, standard_simplex, uniform_orders,
    CoxeterError, DeformationParams,
};
use proptest::prelude::*;
use std::collections::HashSet;

/// Group elements of each word length, by exact integer BFS in the
/// representation `R_i = I − A e_i e_iᵀ` of the all-order-3 Cartan matrix.
fn integer_word_counts(rank: usize, depth: usize) -> Vec<usize> {
    let cartan = |i: usize, j: usize| if i == j { 2i64 } else { -1 };
    let reflection = |k: usize| {
        let mut m = vec![vec![0i64; rank]; rank];
        for i in 0..rank {
            m[i][i] = 1;
            m[i][k] -= cartan(i, k);
        }
        m
    };
    let mul = |a: &Vec<Vec<i64>>, b: &Vec<Vec<i64>>| {
        (0..rank)
            .map(|i| (0..rank).map(|j| (0..rank).map(|k| a[i][k] * b[k][j]).sum()).collect())
            .collect::<Vec<Vec<i64>>>()
    };
    let gens: Vec<_> = (0..rank).map(reflection).collect();
    let identity: Vec<Vec<i64>> = (0..rank).map(|i| (0..rank).map(|j| i64::from(i == j)).collect()).collect();
    let mut seen = HashSet::from([identity.clone()]);
    let mut frontier = vec![identity];
    let mut counts = vec![1];
    for _ in 0..depth {
        let mut next = Vec::new();
        for m in &frontier {
            for g in &gens {
                let p = mul(m, g);
                if seen.insert(p.clone()) {
                    next.push(p);
                }
            }
        }
        counts.push(next.len());
        frontier = next;
    }
    counts
}

fn orbit_counts(rank: usize, depth: usize) -> Vec<usize> {
    let sys = cartan_from_orders(&standard_simplex(rank - 1), &uniform_orders(rank, 3), &DeformationParams::uniform())
        .unwrap();
    let orbit = fundamental_orbit(&sys, depth, 200_000).unwrap();
    let mut counts = vec![0; depth + 1];
    for e in &orbit.elements {
        counts[e.depth] += 1;
    }
    counts
}

#[test]
fn triangle_orbit_matches_word_problem() {
    let expected = integer_word_counts(3, 8);
    assert_eq!(expected[..4], [1, 3, 6, 9]);
    assert_eq!(orbit_counts(3, 8), expected);
}

#[test]
fn tetrahedron_orbit_matches_word_problem() {
    assert_eq!(orbit_counts(4, 6), integer_word_counts(4, 6));
}

#[test]
fn explosion_guard_trips() {
    let sys = cartan_from_orders(&standard_simplex(3), &uniform_orders(4, 3), &DeformationParams::uniform()).unwrap();
    assert!(matches!(fundamental_orbit(&sys, 12, 500), Err(CoxeterError::ExplosionGuard(500))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn relations_hold_along_the_deformation(l1 in 0.3..3.0f64, l2 in 0.3..3.0f64) {
        let params = DeformationParams::uniform().with(0, 1, l1).with(1, 2, l2);
        let sys = cartan_from_orders(&standard_simplex(2), &uniform_orders(3, 3), &params).unwrap();
        let report = relation_check(&sys);
        prop_assert!(report.max_residual < 1e-9);
        prop_assert!(report.all_minimal);
        for r in sys.reflections() {
            let sq = r.matrix() * r.matrix();
            prop_assert!((sq - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
        }
    }
}
