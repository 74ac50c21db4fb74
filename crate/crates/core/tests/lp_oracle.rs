mod common;

use adeqsim::lp::{solve_lp, LpProblem, LpStatus, RowKind};
use common::lp_oracle::{random_lp, vertex_enumeration, OracleResult};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dual_objective(p: &LpProblem, duals: &[f64], reduced: &[f64]) -> f64 {
    let mut obj: f64 = p.rows().iter().zip(duals).map(|(r, y)| r.rhs * y).sum();
    for (j, &d) in reduced.iter().enumerate() {
        let (lo, hi) = p.bounds(j);
        if d > 0.0 {
            obj += d * lo;
        } else if d < 0.0 {
            obj += d * hi;
        }
    }
    obj
}

#[test]
fn three_by_three_instance_matches_enumeration() {
    let mut p = LpProblem::new();
    let x = p.add_var(0.0, 4.0, -2.0);
    let y = p.add_var(0.0, 5.0, -3.0);
    let z = p.add_var(-1.0, 3.0, 1.0);
    p.add_row(vec![(x, 1.0), (y, 1.0), (z, 1.0)], RowKind::Le, 6.0);
    p.add_row(vec![(x, 2.0), (y, -1.0)], RowKind::Ge, -2.0);
    p.add_row(vec![(y, 1.0), (z, -1.0)], RowKind::Eq, 2.0);
    let s = solve_lp(&p).unwrap();
    let OracleResult::Optimal(best) = vertex_enumeration(&p) else {
        panic!("oracle says infeasible")
    };
    assert!((s.objective - best).abs() < 1e-7, "{} vs {best}", s.objective);
}

#[test]
fn random_instances_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut infeasible = 0;
    for case in 0..200 {
        let p = random_lp(&mut rng, 12, 4);
        let s = solve_lp(&p).unwrap();
        match vertex_enumeration(&p) {
            OracleResult::Optimal(best) => {
                assert_eq!(s.status, LpStatus::Optimal, "case {case}\n{}", p.dump());
                assert!((s.objective - best).abs() < 1e-7, "case {case}: {} vs {best}", s.objective);
                assert!(p.max_violation(&s.x) < 1e-8);
            }
            OracleResult::Infeasible => {
                infeasible += 1;
                assert_eq!(s.status, LpStatus::Infeasible, "case {case}\n{}", p.dump());
            }
        }
    }
    assert!(infeasible < 200);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn strong_duality_and_complementarity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_lp(&mut rng, 10, 5);
        let s = solve_lp(&p).unwrap();
        prop_assume!(s.status == LpStatus::Optimal);
        let dual = dual_objective(&p, &s.duals, &s.reduced_costs);
        prop_assert!((dual - s.objective).abs() < 1e-7 * (1.0 + s.objective.abs()));
        for (row, &y) in p.rows().iter().zip(&s.duals) {
            let act: f64 = row.coeffs.iter().map(|&(j, a)| a * s.x[j]).sum();
            match row.kind {
                RowKind::Le => prop_assert!(y <= 1e-9),
                RowKind::Ge => prop_assert!(y >= -1e-9),
                RowKind::Eq => {}
            }
            prop_assert!((y * (act - row.rhs)).abs() < 1e-8);
        }
        for (j, &d) in s.reduced_costs.iter().enumerate() {
            let (lo, hi) = p.bounds(j);
            let gap = if d > 0.0 { s.x[j] - lo } else { hi - s.x[j] };
            prop_assert!((d * gap).abs() < 1e-8, "x{} d={} x={}", j, d, s.x[j]);
        }
    }

    #[test]
    fn solving_twice_is_bitwise_identical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_lp(&mut rng, 12, 4);
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p).unwrap();
        prop_assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }
}
