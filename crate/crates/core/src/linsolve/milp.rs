//! Best-first branch-and-bound over the dense simplex.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{simplex, LpError, LpInstance, LpStatus};

const INT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpOptions {
    pub node_limit: usize,
    /// Absolute optimality gap used for pruning.
    pub gap: f64,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            node_limit: 10_000_000,
            gap: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub point: Vec<f64>,
    /// Nodes whose LP relaxation was solved, root included.
    pub nodes: usize,
    /// Value of the root LP relaxation.
    pub root_bound: f64,
}

struct Node {
    bound: f64,
    seq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then the newest node
    // so equal-bound ties dive toward an incumbent.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| self.seq.cmp(&other.seq))
    }
}

/// Most fractional flagged variable; ties go to the lowest index.
fn branching_variable(point: &[f64], integer: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&v, &int)) in point.iter().zip(integer).enumerate() {
        if !int {
            continue;
        }
        let frac = v - v.floor();
        let dist = frac.min(1.0 - frac);
        if dist > INT_TOL && best.is_none_or(|(_, d)| dist > d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

/// Solve to global optimality within `opts.gap`.
///
/// Hitting the node limit is an error carrying the incumbent value, never a
/// silently returned suboptimal point.
pub fn solve_milp(inst: &LpInstance, opts: &MilpOptions) -> Result<MilpSolution, LpError> {
    inst.validate()?;
    let n = inst.num_vars();
    let mut lower = inst.lower.clone();
    let mut upper = inst.upper.clone();
    for j in 0..n {
        if inst.integer[j] {
            lower[j] = lower[j].ceil();
            upper[j] = upper[j].floor();
        }
    }

    let mut work = inst.clone();
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0usize;
    let mut seq = 0usize;
    let mut root_bound = f64::INFINITY;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq,
        lower,
        upper,
    });

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - opts.gap {
                continue;
            }
        }
        if nodes >= opts.node_limit {
            return Err(LpError::NodeLimit {
                limit: opts.node_limit,
                incumbent: incumbent.map(|(v, _)| v),
            });
        }
        nodes += 1;
        work.lower.clone_from(&node.lower);
        work.upper.clone_from(&node.upper);
        let lp = simplex::solve(&work)?;
        match lp.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if nodes == 1 {
                    return Ok(MilpSolution {
                        status: LpStatus::Unbounded,
                        value: f64::NEG_INFINITY,
                        point: vec![f64::NAN; n],
                        nodes,
                        root_bound: f64::NEG_INFINITY,
                    });
                }
                return Err(LpError::Unbounded);
            }
            LpStatus::Optimal => {}
        }
        if nodes == 1 {
            root_bound = lp.value;
        }
        if let Some((best, _)) = &incumbent {
            if lp.value >= best - opts.gap {
                continue;
            }
        }
        match branching_variable(&lp.point, &inst.integer) {
            None => {
                let mut point = lp.point;
                for j in 0..n {
                    if inst.integer[j] {
                        point[j] = point[j].round();
                    }
                }
                let value: f64 = inst.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
                if incumbent.as_ref().is_none_or(|(best, _)| value < *best) {
                    incumbent = Some((value, point));
                }
            }
            Some(j) => {
                let v = lp.point[j];
                let mut down_upper = node.upper.clone();
                down_upper[j] = v.floor();
                let mut up_lower = node.lower.clone();
                up_lower[j] = v.ceil();
                seq += 1;
                heap.push(Node {
                    bound: lp.value,
                    seq,
                    lower: node.lower.clone(),
                    upper: down_upper,
                });
                seq += 1;
                heap.push(Node {
                    bound: lp.value,
                    seq,
                    lower: up_lower,
                    upper: node.upper,
                });
            }
        }
    }

    Ok(match incumbent {
        Some((value, point)) => MilpSolution {
            status: LpStatus::Optimal,
            value,
            point,
            nodes,
            root_bound,
        },
        None => MilpSolution {
            status: LpStatus::Infeasible,
            value: f64::INFINITY,
            point: vec![f64::NAN; n],
            nodes,
            root_bound,
        },
    })
}
