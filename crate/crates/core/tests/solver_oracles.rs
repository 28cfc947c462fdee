mod common;

use common::{dot, random_polytope, rng};
use proptest::prelude::*;
use scenred::linsolve::{enumerate_vertices, minimize_over, solve_lp, solve_milp, LpInstance, LpStatus, MilpOptions, RowSense};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lp_matches_vertex_enumeration(seed in any::<u64>(), d in 2usize..=4, extra in 1usize..=8) {
        let mut r = rng(seed);
        let poly = random_polytope(&mut r, d, extra);
        let obj: Vec<f64> = (0..d).map(|_| rand::Rng::gen_range(&mut r, -2.0..2.0)).collect();
        let sol = minimize_over(&poly, &obj).unwrap();
        prop_assert!(sol.is_optimal());
        let best = enumerate_vertices(&poly).unwrap().iter().map(|v| dot(&obj, v)).fold(f64::INFINITY, f64::min);
        prop_assert!((sol.value - best).abs() <= 1e-7, "lp {} vertices {}", sol.value, best);
        prop_assert!(poly.contains(&sol.point, 1e-8));
    }

    #[test]
    fn weak_duality_with_a_dual_feasible_certificate(seed in any::<u64>(), d in 2usize..=4) {
        // min c·z over rows·z <= rhs with c = -(sum of rows with weights w >= 0):
        // any feasible z gives c·z >= -w·rhs.
        let mut r = rng(seed);
        let poly = random_polytope(&mut r, d, 4);
        let w: Vec<f64> = (0..poly.rows.len()).map(|_| rand::Rng::gen_range(&mut r, 0.0..1.0)).collect();
        let obj: Vec<f64> = (0..d).map(|j| -poly.rows.iter().zip(&w).map(|(row, wi)| row[j] * wi).sum::<f64>()).collect();
        let sol = minimize_over(&poly, &obj).unwrap();
        prop_assert!(sol.value >= -dot(&w, &poly.rhs) - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn milp_matches_exhaustive_enumeration(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3) {
        let mut r = rng(seed);
        let mut g = |lo: i32, hi: i32| rand::Rng::gen_range(&mut r, lo..=hi) as f64;
        let objective: Vec<f64> = (0..n).map(|_| g(-6, 6)).collect();
        let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| g(-4, 4)).collect()).collect();
        let rhs: Vec<f64> = (0..m).map(|_| g(-2, 10)).collect();
        let upper: Vec<f64> = (0..n).map(|_| g(1, 5)).collect();
        let inst = LpInstance {
            objective: objective.clone(),
            rows: rows.clone(),
            senses: vec![RowSense::Le; m],
            rhs: rhs.clone(),
            lower: vec![0.0; n],
            upper: upper.clone(),
            integer: vec![true; n],
        };
        let mut best = f64::INFINITY;
        let mut z = vec![0i64; n];
        loop {
            let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
            if rows.iter().zip(&rhs).all(|(row, b)| dot(row, &zf) <= *b) {
                best = best.min(dot(&objective, &zf));
            }
            let mut i = 0;
            while i < n {
                z[i] += 1;
                if z[i] as f64 <= upper[i] { break; }
                z[i] = 0;
                i += 1;
            }
            if i == n { break; }
        }
        let sol = solve_milp(&inst, &MilpOptions::default()).unwrap();
        if best.is_finite() {
            prop_assert_eq!(sol.status, LpStatus::Optimal);
            prop_assert_eq!(sol.value, best);
            prop_assert!(sol.point.iter().all(|v| v.fract() == 0.0));
        } else {
            prop_assert_eq!(sol.status, LpStatus::Infeasible);
        }
    }
}

#[test]
fn lp_detects_unbounded_and_infeasible() {
    let unbounded = LpInstance {
        objective: vec![-1.0, 0.0],
        rows: vec![vec![0.0, 1.0]],
        senses: vec![RowSense::Le],
        rhs: vec![1.0],
        lower: vec![0.0, 0.0],
        upper: vec![f64::INFINITY; 2],
        integer: vec![false; 2],
    };
    assert_eq!(solve_lp(&unbounded).unwrap().status, LpStatus::Unbounded);
    let infeasible = LpInstance {
        rows: vec![vec![1.0, 1.0]],
        senses: vec![RowSense::Ge],
        rhs: vec![5.0],
        upper: vec![1.0, 1.0],
        ..unbounded
    };
    assert_eq!(solve_lp(&infeasible).unwrap().status, LpStatus::Infeasible);
}
