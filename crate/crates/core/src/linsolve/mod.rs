//! Self-contained dense LP and MILP solvers plus small polyhedral helpers.

mod geometry;
mod milp;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Polyhedron;

pub use geometry::{chebyshev_center, enumerate_vertices, ChebyshevBall, VERTEX_MAX_DIM, VERTEX_MAX_ROWS};
pub use milp::{solve_milp, MilpOptions, MilpSolution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("simplex numerical failure: {0}")]
    Numerical(String),
    #[error("branch-and-bound node limit {limit} reached (incumbent {incumbent:?})")]
    NodeLimit { limit: usize, incumbent: Option<f64> },
    #[error("problem is unbounded")]
    Unbounded,
    #[error("polyhedron is empty")]
    Infeasible,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("vertex enumeration limited to dimension <= {VERTEX_MAX_DIM} and <= {VERTEX_MAX_ROWS} rows (got d={dim}, rows={rows})")]
    ScaleGuard { dim: usize, rows: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowSense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

/// `min objective·z` over dense rows with senses and variable bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpInstance {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub senses: Vec<RowSense>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
}

impl LpInstance {
    /// Unconstrained-bound instance: all structure lives in the rows.
    pub fn from_polyhedron(objective: Vec<f64>, poly: &Polyhedron) -> Self {
        let d = poly.dim();
        LpInstance {
            objective,
            rows: poly.rows.clone(),
            senses: vec![RowSense::Le; poly.rows.len()],
            rhs: poly.rhs.clone(),
            lower: vec![f64::NEG_INFINITY; d],
            upper: vec![f64::INFINITY; d],
            integer: vec![false; d],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        let bad = |what: &str| Err(LpError::Dimension(what.to_string()));
        if self.lower.len() != n || self.upper.len() != n || self.integer.len() != n {
            return bad("bound/integrality vectors must match objective length");
        }
        if self.senses.len() != self.rows.len() || self.rhs.len() != self.rows.len() {
            return bad("senses and rhs must match row count");
        }
        if self.rows.iter().any(|r| r.len() != n) {
            return bad("every row must have one coefficient per variable");
        }
        let finite = self.objective.iter().chain(self.rhs.iter()).all(|v| v.is_finite())
            && self.rows.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return bad("non-finite coefficient");
        }
        Ok(())
    }

    /// Worst scaled row violation and bound violation of a point.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for ((row, &sense), &rhs) in self.rows.iter().zip(&self.senses).zip(&self.rhs) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let lhs: f64 = row.iter().zip(z).map(|(a, x)| a * x).sum();
            let v = match sense {
                RowSense::Le => lhs - rhs,
                RowSense::Ge => rhs - lhs,
                RowSense::Eq => (lhs - rhs).abs(),
            };
            worst = worst.max(v / norm);
        }
        for ((&l, &u), &x) in self.lower.iter().zip(&self.upper).zip(z) {
            worst = worst.max(l - x).max(x - u);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub point: Vec<f64>,
    /// Indices of the input rows that are tight at the returned point.
    pub active_rows: Vec<usize>,
    pub pivots: usize,
}

impl LpSolution {
    fn infeasible(n: usize) -> Self {
        LpSolution {
            status: LpStatus::Infeasible,
            value: f64::INFINITY,
            point: vec![f64::NAN; n],
            active_rows: Vec::new(),
            pivots: 0,
        }
    }

    fn unbounded(n: usize, pivots: usize) -> Self {
        LpSolution {
            status: LpStatus::Unbounded,
            value: f64::NEG_INFINITY,
            point: vec![f64::NAN; n],
            active_rows: Vec::new(),
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solve the LP relaxation (integrality flags are ignored).
pub fn solve_lp(inst: &LpInstance) -> Result<LpSolution, LpError> {
    inst.validate()?;
    simplex::solve(inst)
}

/// Solve `min objective·z` over a polyhedron.
pub fn minimize_over(poly: &Polyhedron, objective: &[f64]) -> Result<LpSolution, LpError> {
    if objective.len() != poly.dim() {
        return Err(LpError::Dimension(format!(
            "objective has {} entries, polyhedron dimension {}",
            objective.len(),
            poly.dim()
        )));
    }
    solve_lp(&LpInstance::from_polyhedron(objective.to_vec(), poly))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_var(obj: f64, rows: Vec<(f64, RowSense, f64)>) -> LpInstance {
        LpInstance {
            objective: vec![obj],
            rows: rows.iter().map(|r| vec![r.0]).collect(),
            senses: rows.iter().map(|r| r.1).collect(),
            rhs: rows.iter().map(|r| r.2).collect(),
            lower: vec![0.0],
            upper: vec![f64::INFINITY],
            integer: vec![false],
        }
    }

    #[test]
    fn maximize_bounded_by_one() {
        let sol = solve_lp(&one_var(-1.0, vec![(1.0, RowSense::Le, 1.0)])).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value + 1.0).abs() < 1e-12);
        assert!((sol.point[0] - 1.0).abs() < 1e-12);
        assert_eq!(sol.active_rows, vec![0]);
    }

    #[test]
    fn infeasible_negative_upper() {
        let sol = solve_lp(&one_var(1.0, vec![(1.0, RowSense::Le, -1.0)])).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let sol = solve_lp(&one_var(-1.0, vec![(1.0, RowSense::Ge, 1.0)])).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_free_variables() {
        // min x + 2y, x + y = 3, x - y >= -1, x,y free but x <= 5 row.
        let inst = LpInstance {
            objective: vec![1.0, 2.0],
            rows: vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![1.0, 0.0]],
            senses: vec![RowSense::Eq, RowSense::Ge, RowSense::Le],
            rhs: vec![3.0, -1.0, 5.0],
            lower: vec![f64::NEG_INFINITY; 2],
            upper: vec![f64::INFINITY; 2],
            integer: vec![false; 2],
        };
        let sol = solve_lp(&inst).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.point[0] - 5.0).abs() < 1e-9);
        assert!((sol.point[1] + 2.0).abs() < 1e-9);
        assert!((sol.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_row_is_dropped_or_rejected() {
        let mut inst = one_var(-1.0, vec![(1.0, RowSense::Le, 2.0), (0.0, RowSense::Le, 0.0)]);
        assert!(solve_lp(&inst).unwrap().is_optimal());
        inst.rhs[1] = -1.0;
        assert_eq!(solve_lp(&inst).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn dimension_errors_are_reported() {
        let mut inst = one_var(1.0, vec![(1.0, RowSense::Le, 1.0)]);
        inst.rows[0].push(2.0);
        assert!(matches!(solve_lp(&inst), Err(LpError::Dimension(_))));
    }

    #[test]
    fn bounded_variables_flip() {
        // max x + y with box bounds only.
        let inst = LpInstance {
            objective: vec![-1.0, -1.0],
            rows: vec![vec![1.0, 1.0]],
            senses: vec![RowSense::Le],
            rhs: vec![10.0],
            lower: vec![0.0, 0.0],
            upper: vec![2.0, 3.0],
            integer: vec![false; 2],
        };
        let sol = solve_lp(&inst).unwrap();
        assert!((sol.value + 5.0).abs() < 1e-12);
    }
}
