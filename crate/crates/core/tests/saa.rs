mod common;

use common::{dot, enumerated, reduce};
use scenred::coordinates::{coordinates_serial, CoordinateConfig};
use scenred::linsolve::MilpOptions;
use scenred::saa::{
    consistency_report, evaluate_objective, evaluate_recourse, extensive_form, random_feasible_points, solve_saa,
};

#[test]
fn example1_golden_value() {
    let (program, scen) = enumerated("example1");
    let ef = extensive_form(&program, &scen).unwrap();
    assert_eq!((ef.num_vars(), ef.num_constraints()), (202, 201));
    let rep = solve_saa(&program, &scen, &MilpOptions::default()).unwrap();
    assert!((rep.nu - 231.2).abs() <= 1e-9);
    assert_eq!(rep.x_star, vec![70.0, 30.0]);
}

#[test]
fn decomposition_identity() {
    let (program, scen) = enumerated("example1");
    let rep = solve_saa(&program, &scen, &MilpOptions::default()).unwrap();
    let rebuilt = dot(&program.first_stage().c, &rep.x_star)
        + scen.iter().zip(&rep.per_scenario_q).map(|(s, q)| s.prob * q).sum::<f64>();
    assert!((rep.nu - rebuilt).abs() <= 1e-9);
    assert!(rep.decomposition_residual <= 1e-9);
    for (s, q) in scen.iter().zip(&rep.per_scenario_q) {
        assert_eq!(*q, evaluate_recourse(&program, &rep.x_star, s).unwrap());
    }
    assert!((evaluate_objective(&program, &rep.x_star, &scen).unwrap() - rep.nu).abs() <= 1e-9);
}

#[test]
fn optimum_beats_random_feasible_points() {
    let (program, scen) = enumerated("example1");
    let rep = solve_saa(&program, &scen, &MilpOptions::default()).unwrap();
    for x in random_feasible_points(&program, 40, 9).unwrap() {
        assert!(rep.nu <= evaluate_objective(&program, &x, &scen).unwrap() + 1e-9);
    }
}

#[test]
fn reduction_gap_within_beta_prime_across_deltas() {
    let (program, scen) = enumerated("example1");
    let coords = coordinates_serial(&program, &scen, &CoordinateConfig::default()).unwrap();
    let opts = MilpOptions::default();
    let full = solve_saa(&program, &scen, &opts).unwrap();
    let probes = random_feasible_points(&program, 10, 0).unwrap();
    for delta in [0.0, 1.8, 7.2, 28.8, 60.0] {
        let (result, reduced) = reduce(&coords, &scen, delta);
        let v = reduced.len();
        let red = solve_saa(&program, &reduced, &opts).unwrap();
        assert_eq!((red.variables, red.constraints), (2 + 2 * v, 1 + 2 * v));
        let c = consistency_report(&program, &scen, &reduced, &full, &red, &probes, result.beta, result.beta_prime).unwrap();
        assert!(c.reduced_optimality && c.full_optimality, "delta {delta}");
        assert!(c.nu_gap <= result.beta_prime + 1e-6, "delta {delta}: gap {} > {}", c.nu_gap, result.beta_prime);
        assert!(result.beta <= result.beta_prime);
    }
}
