#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scenred::io::builtin;
use scenred::model::{enumerate_scenarios, Polyhedron, Scenario, StochasticProgram, ENUMERATION_CAP};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn enumerated(name: &str) -> (StochasticProgram, Vec<Scenario>) {
    let inst = builtin(name).unwrap();
    let scen = enumerate_scenarios(&inst.program, inst.distribution.as_ref().unwrap(), ENUMERATION_CAP).unwrap();
    (inst.program, scen)
}

pub fn boxed(lo: &[f64], hi: &[f64]) -> Polyhedron {
    let d = lo.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for k in 0..d {
        let mut r = vec![0.0; d];
        r[k] = 1.0;
        rows.push(r.clone());
        rhs.push(hi[k]);
        r[k] = -1.0;
        rows.push(r);
        rhs.push(-lo[k]);
    }
    Polyhedron::new(rows, rhs, d).unwrap()
}

/// Bounded polytope around the origin: the box `[-3, 3]^d` cut by `extra`
/// random halfspaces `a·z <= b` with `b` in `[0.5, 2]`.
pub fn random_polytope(rng: &mut ChaCha8Rng, d: usize, extra: usize) -> Polyhedron {
    let base = boxed(&vec![-3.0; d], &vec![3.0; d]);
    let mut rows = base.rows;
    let mut rhs = base.rhs;
    for _ in 0..extra {
        rows.push((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect());
        rhs.push(rng.gen_range(0.5..2.0));
    }
    Polyhedron::new(rows, rhs, d).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

use scenred::clustering::{grid_cluster, select_representatives, ClusterResult, GridConfig};
use scenred::coordinates::Coordinate;

/// Grid-cluster `coords` (one per scenario, same order) and build the reduced sample.
pub fn reduce(coords: &[Coordinate], scen: &[Scenario], delta: f64) -> (ClusterResult, Vec<Scenario>) {
    let probs: Vec<f64> = scen.iter().map(|s| s.prob).collect();
    let result = grid_cluster(coords, &probs, &GridConfig::new(delta)).unwrap();
    let reduced = select_representatives(&result, scen).unwrap();
    (result, reduced)
}
