use nalgebra::{DMatrix, DVector};

use super::{simplex, LpError, LpInstance, LpStatus, RowSense};
use crate::model::Polyhedron;

pub const VERTEX_MAX_DIM: usize = 6;
pub const VERTEX_MAX_ROWS: usize = 40;

/// Largest ball inside a polyhedron.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Maximize the smallest row slack, each row scaled by its Euclidean norm.
///
/// A radius above a small threshold certifies that the polyhedron has a
/// nonempty interior (Slater's condition).
pub fn chebyshev_center(poly: &Polyhedron) -> Result<ChebyshevBall, LpError> {
    let d = poly.dim();
    let mut rows = Vec::with_capacity(poly.rows.len());
    for row in &poly.rows {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut r = row.clone();
        r.push(norm);
        rows.push(r);
    }
    let mut objective = vec![0.0; d + 1];
    objective[d] = -1.0;
    let mut lower = vec![f64::NEG_INFINITY; d + 1];
    lower[d] = 0.0;
    let inst = LpInstance {
        objective,
        senses: vec![RowSense::Le; rows.len()],
        rows,
        rhs: poly.rhs.clone(),
        lower,
        upper: vec![f64::INFINITY; d + 1],
        integer: vec![false; d + 1],
    };
    inst.validate()?;
    let sol = simplex::solve(&inst)?;
    match sol.status {
        LpStatus::Optimal => {
            let mut center = sol.point;
            let radius = center.pop().unwrap_or(0.0).max(0.0);
            Ok(ChebyshevBall { center, radius })
        }
        LpStatus::Infeasible => Err(LpError::Infeasible),
        LpStatus::Unbounded => Err(LpError::Unbounded),
    }
}

fn combinations(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Brute-force vertex enumeration: solve every `d x d` row subsystem and
/// keep the feasible, distinct solutions. Test scale only.
pub fn enumerate_vertices(poly: &Polyhedron) -> Result<Vec<Vec<f64>>, LpError> {
    let d = poly.dim();
    let m = poly.rows.len();
    if d > VERTEX_MAX_DIM || m > VERTEX_MAX_ROWS {
        return Err(LpError::ScaleGuard { dim: d, rows: m });
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    if d == 0 {
        return Ok(out);
    }
    combinations(m, d, |subset| {
        let a = DMatrix::from_fn(d, d, |r, c| poly.rows[subset[r]][c]);
        let b = DVector::from_fn(d, |r, _| poly.rhs[subset[r]]);
        let lu = a.lu();
        if lu.determinant().abs() < 1e-12 {
            return;
        }
        let Some(z) = lu.solve(&b) else { return };
        let z: Vec<f64> = z.iter().copied().collect();
        if poly.max_violation(&z) > 1e-9 {
            return;
        }
        if out
            .iter()
            .any(|v| v.iter().zip(&z).all(|(p, q)| (p - q).abs() <= 1e-9))
        {
            return;
        }
        out.push(z);
    });
    Ok(out)
}
