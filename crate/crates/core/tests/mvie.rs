mod common;

use std::f64::consts::PI;

use common::{boxed, random_polytope, rng};
use scenred::ellipsoid::{
    max_volume_inscribed_ellipsoid, max_volume_inscribed_ellipsoid_from, verify_inscribed, EllipsoidError, MvieOptions,
    MvieStart, MvieStatus,
};
use scenred::linsolve::enumerate_vertices;
use scenred::model::Polyhedron;

fn mvie(p: &Polyhedron) -> (scenred::ellipsoid::Ellipsoid, scenred::ellipsoid::MvieReport) {
    max_volume_inscribed_ellipsoid(p, &MvieOptions::default()).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn box_is_exact() {
    let (e, rep) = mvie(&boxed(&[1.0, -2.0, 0.0], &[3.0, 4.0, 0.5]));
    assert_eq!(rep.status, MvieStatus::Converged);
    assert!(max_diff(&e.center, &[2.0, 1.0, 0.25]) <= 1e-6);
    let half = [1.0, 3.0, 0.25];
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { half[i] } else { 0.0 };
            assert!((e.shape[i][j] - want).abs() <= 1e-6, "S[{i}][{j}] = {}", e.shape[i][j]);
        }
    }
}

#[test]
fn triangle_steiner_inellipse() {
    // Scalene triangle with vertices (0,0), (4,0), (1,3); area 6.
    let p = Polyhedron::new(
        vec![vec![0.0, -1.0], vec![1.0, 1.0], vec![-3.0, 1.0]],
        vec![0.0, 4.0, 0.0],
        2,
    )
    .unwrap();
    let (e, _) = mvie(&p);
    assert!(max_diff(&e.center, &[5.0 / 3.0, 1.0]) <= 1e-4);
    let area = PI * e.logdet.exp();
    assert!((area - PI / (3.0 * 3f64.sqrt()) * 6.0).abs() <= 1e-4, "area {area}");
}

#[test]
fn containment_on_random_polytopes() {
    let mut r = rng(11);
    for _ in 0..20 {
        let p = random_polytope(&mut r, 3, 6);
        let (e, rep) = mvie(&p);
        assert_eq!(rep.status, MvieStatus::Converged);
        assert!(rep.containment_residual <= 1e-8);
        assert!(rep.gradient_norm <= 1e-7, "gradient norm {}", rep.gradient_norm);
        assert!(verify_inscribed(&e, &p).unwrap().iter().all(|&s| s <= 1e-8));
    }
}

#[test]
fn restarts_agree() {
    let mut r = rng(12);
    for t in 0..50 {
        let d = 2 + t % 3;
        let p = random_polytope(&mut r, d, 3 + t % 5);
        let opts = MvieOptions::default();
        let (a, _) = max_volume_inscribed_ellipsoid(&p, &opts).unwrap();
        let (b, _) = max_volume_inscribed_ellipsoid_from(&p, &opts, MvieStart::Random(t as u64)).unwrap();
        assert!(max_diff(&a.center, &b.center) <= 1e-5, "center, polytope {t}");
        for i in 0..d {
            assert!(max_diff(&a.shape[i], &b.shape[i]) <= 1e-5, "shape, polytope {t}");
        }
    }
}

#[test]
fn john_factor_bounds_every_vertex() {
    let mut r = rng(13);
    for t in 0..30 {
        let d = 2 + t % 3;
        let p = random_polytope(&mut r, d, 4);
        let (e, _) = mvie(&p);
        for v in enumerate_vertices(&p).unwrap() {
            assert!(e.gauge(&v).unwrap() <= d as f64 + 1e-6);
        }
    }
}

#[test]
fn shrinking_the_polytope_shrinks_the_volume() {
    let mut r = rng(14);
    for _ in 0..10 {
        let p = random_polytope(&mut r, 3, 4);
        let mut rows = p.rows.clone();
        let mut rhs = p.rhs.clone();
        rows.push(vec![1.0, 1.0, 1.0]);
        rhs.push(0.3);
        let q = Polyhedron::new(rows, rhs, 3).unwrap();
        assert!(mvie(&q).0.logdet <= mvie(&p).0.logdet + 1e-9);
    }
}

#[test]
fn affine_equivariance() {
    // z -> M z + t maps the MVIE to the MVIE; log det grows by ln|det M|.
    let mut r = rng(15);
    let m = [[2.0, 0.5], [-0.3, 1.5]];
    let t = [4.0, -1.0];
    let det: f64 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
    for _ in 0..10 {
        let p = random_polytope(&mut r, 2, 5);
        // a·z <= b  becomes  (a M^-1)·w <= b + a M^-1 t.
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for (a, b) in p.rows.iter().zip(&p.rhs) {
            let row = vec![a[0] * inv[0][0] + a[1] * inv[1][0], a[0] * inv[0][1] + a[1] * inv[1][1]];
            rhs.push(b + row[0] * t[0] + row[1] * t[1]);
            rows.push(row);
        }
        let q = Polyhedron::new(rows, rhs, 2).unwrap();
        let (e, _) = mvie(&p);
        let (f, _) = mvie(&q);
        let mapped = [m[0][0] * e.center[0] + m[0][1] * e.center[1] + t[0], m[1][0] * e.center[0] + m[1][1] * e.center[1] + t[1]];
        assert!(max_diff(&f.center, &mapped) <= 1e-6);
        assert!((f.logdet - e.logdet - det.abs().ln()).abs() <= 1e-6);
    }
}

#[test]
fn flat_polytope_is_degenerate() {
    let p = boxed(&[0.0, 0.0], &[1.0, 0.0]);
    assert!(matches!(mvie_err(&p), EllipsoidError::Degenerate { .. }));
}

fn mvie_err(p: &Polyhedron) -> EllipsoidError {
    max_volume_inscribed_ellipsoid(p, &MvieOptions::default()).unwrap_err()
}
