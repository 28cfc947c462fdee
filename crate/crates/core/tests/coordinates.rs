mod common;

use common::{dot, enumerated, rng};
use rand::Rng;
use scenred::coordinates::{
    coordinate, coordinates_serial, epsilon_k, from_csv, to_csv, CoordinateConfig, CoordinateStatus, KappaMode,
};
use scenred::ellipsoid::max_volume_inscribed_ellipsoid;
use scenred::model::scenario_polyhedron;
use scenred::saa::{evaluate_recourse, random_feasible_points};

#[test]
fn ordering_on_example1() {
    let (program, scen) = enumerated("example1");
    let coords = coordinates_serial(&program, &scen, &CoordinateConfig::default()).unwrap();
    assert_eq!(coords.len(), 100);
    for c in &coords {
        assert_eq!(c.status, CoordinateStatus::Ok);
        assert!(c.kappa.unwrap() <= c.sigma.unwrap() + 1e-7, "scenario {}", c.k);
    }
}

#[test]
fn ordering_on_synthetic750() {
    let (program, scen) = enumerated("synthetic750");
    assert_eq!(scen.len(), 750);
    let coords = coordinates_serial(&program, &scen, &CoordinateConfig::default()).unwrap();
    for c in &coords {
        assert!(c.status.is_usable(), "scenario {} is {:?}", c.k, c.status);
        assert!(c.kappa.unwrap() <= c.sigma.unwrap() + 1e-7, "scenario {}", c.k);
    }
}

#[test]
fn sigma_matches_sampled_ellipsoid_minimum() {
    let (program, scen) = enumerated("example1");
    let cfg = CoordinateConfig::default();
    let prepared = cfg.prepare(&program, &scen).unwrap();
    let mut r = rng(21);
    for s in scen.iter().step_by(17) {
        let poly = scenario_polyhedron(&prepared, s, &cfg.relaxation()).unwrap();
        let (e, _) = max_volume_inscribed_ellipsoid(&poly, &cfg.mvie).unwrap();
        let sigma = coordinate(&prepared, s, &cfg).sigma.unwrap();
        let mut w = program.first_stage().c.clone();
        w.extend_from_slice(&s.q);
        let d = w.len();
        let spread = e.shape_norm(&w);
        let mut best = f64::INFINITY;
        for _ in 0..20_000 {
            let u: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
            let n = dot(&u, &u).sqrt();
            let z: Vec<f64> = (0..d).map(|i| e.center[i] + (0..d).map(|j| e.shape[i][j] * u[j] / n).sum::<f64>()).collect();
            assert!(poly.contains(&z, 1e-7));
            best = best.min(dot(&w, &z));
        }
        assert!(best >= sigma - 1e-7);
        assert!(best - sigma <= 0.05 * spread, "sampled {best}, closed form {sigma}");
    }
}

#[test]
fn kappa_is_below_every_feasible_objective() {
    let (program, scen) = enumerated("example1");
    let cfg = CoordinateConfig::default();
    let coords = coordinates_serial(&program, &scen, &cfg).unwrap();
    let mut probes = random_feasible_points(&program, 20, 3).unwrap();
    probes.push(vec![70.0, 30.0]);
    for (c, s) in coords.iter().zip(&scen) {
        for x in &probes {
            let v = dot(&program.first_stage().c, x) + evaluate_recourse(&program, x, s).unwrap();
            assert!(c.kappa.unwrap() <= v + 1e-7);
        }
    }
}

#[test]
fn milp_kappa_is_at_least_lp_kappa() {
    let (program, scen) = enumerated("example1");
    let lp = CoordinateConfig::default();
    let milp = CoordinateConfig { kappa_mode: KappaMode::Milp, ..lp };
    let a = coordinates_serial(&program, &scen[..10], &lp).unwrap();
    let b = coordinates_serial(&program, &scen[..10], &milp).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(x.kappa.unwrap() <= y.kappa.unwrap() + 1e-9);
    }
}

#[test]
fn csv_is_stable_through_a_round_trip() {
    let (program, scen) = enumerated("example1");
    let coords = coordinates_serial(&program, &scen[..20], &CoordinateConfig::default()).unwrap();
    let text = to_csv(&coords);
    assert_eq!(to_csv(&from_csv(&text).unwrap()), text);
}

#[test]
fn sigma_at_310_292_matches_dense_boundary_sampling() {
    let (program, scen) = enumerated("example1");
    let cfg = CoordinateConfig::default();
    let prepared = cfg.prepare(&program, &scen).unwrap();
    let s = scen.iter().find(|s| s.h == [310.0, 292.0]).unwrap();
    let poly = scenario_polyhedron(&prepared, s, &cfg.relaxation()).unwrap();
    let (e, _) = max_volume_inscribed_ellipsoid(&poly, &cfg.mvie).unwrap();
    let sigma = coordinate(&prepared, s, &cfg).sigma.unwrap();
    let mut w = program.first_stage().c.clone();
    w.extend_from_slice(&s.q);
    let mut r = rng(22);
    let normal = rand_distr_normal();
    let boundary = |u: &[f64]| -> f64 {
        let n = dot(u, u).sqrt();
        let z: Vec<f64> = (0..4).map(|i| e.center[i] + (0..4).map(|j| e.shape[i][j] * u[j] / n).sum::<f64>()).collect();
        dot(&w, &z)
    };
    // 20k uniform directions, then four rounds of 20k around the best so far.
    let mut best_u = vec![1.0, 0.0, 0.0, 0.0];
    let mut best = boundary(&best_u);
    for (round, spread) in [f64::INFINITY, 0.1, 0.02, 0.004, 0.0008].into_iter().enumerate() {
        let center = best_u.clone();
        for _ in 0..20_000 {
            let g: Vec<f64> = (0..4).map(|_| r.sample(&normal)).collect();
            let u: Vec<f64> = if round == 0 { g } else { center.iter().zip(&g).map(|(c, g)| c + spread * g).collect() };
            let v = boundary(&u);
            if v < best {
                best = v;
                let n = dot(&u, &u).sqrt();
                best_u = u.iter().map(|x| x / n).collect();
            }
        }
    }
    assert!(best >= sigma - 1e-9);
    assert!(best - sigma <= 1e-3, "sampled {best}, closed form {sigma}");
}

/// Standard normal via Box-Muller, to avoid another dependency.
fn rand_distr_normal() -> impl rand::distributions::Distribution<f64> {
    struct Normal;
    impl rand::distributions::Distribution<f64> for Normal {
        fn sample<R: Rng + ?Sized>(&self, r: &mut R) -> f64 {
            let u1: f64 = r.gen_range(f64::EPSILON..1.0);
            let u2: f64 = r.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    }
    Normal
}

#[test]
fn epsilon_spread_at_the_optimum_is_within_d() {
    let (program, scen) = enumerated("example1");
    let coords = coordinates_serial(&program, &scen, &CoordinateConfig::default()).unwrap();
    let x = [70.0, 30.0];
    let eps: Vec<f64> = coords
        .iter()
        .zip(&scen)
        .map(|(c, s)| epsilon_k(c.sigma.unwrap(), evaluate_recourse(&program, &x, s).unwrap()))
        .collect();
    let d = coords.iter().map(|c| c.sigma.unwrap() - c.kappa.unwrap()).fold(0.0, f64::max);
    let lo = eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("epsilon_k at (70, 30): min {lo}, max {hi}, D = {d}");
    assert!(hi - lo <= d);
}
