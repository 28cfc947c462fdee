//! Grid clustering of `(kappa, sigma)` coordinates and the reduced sample.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coordinates::Coordinate;
use crate::model::Scenario;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("no coordinates to cluster")]
    Empty,
    #[error("delta must be finite and >= 0, got {0}")]
    Delta(f64),
    #[error("non-finite coordinate for scenario {0}")]
    NonFinite(usize),
    #[error("{0} probabilities for {1} coordinates")]
    Length(usize, usize),
    #[error("scenario {0} is not in the scenario list")]
    Missing(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    /// Grid origin at `(min kappa, min sigma)` over the clustered points.
    MinCorner,
    Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepresentativeRule {
    /// Member nearest the probability-weighted cell centroid.
    NearestCentroid,
    LowestIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub delta: f64,
    pub anchor: Anchor,
    pub rule: RepresentativeRule,
}

impl GridConfig {
    pub fn new(delta: f64) -> Self {
        GridConfig {
            delta,
            anchor: Anchor::MinCorner,
            rule: RepresentativeRule::NearestCentroid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Grid indices along kappa and sigma. With `delta = 0` these are the
    /// ranks of the distinct coordinate values instead.
    pub cell_id: [i64; 2],
    /// Scenario indices, ascending.
    pub members: Vec<usize>,
    pub representative: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub delta: f64,
    pub anchor: [f64; 2],
    pub cells: Vec<Cell>,
    /// Scenarios without a usable coordinate; each keeps its own probability.
    pub unclustered: Vec<usize>,
    /// Total number of scenarios.
    #[serde(rename = "K")]
    pub k_total: usize,
    /// Scenarios replaced by a representative.
    #[serde(rename = "K_delta")]
    pub k_delta: usize,
    #[serde(rename = "D")]
    pub d: f64,
    pub beta: f64,
    pub beta_prime: f64,
}

impl ClusterResult {
    pub fn representatives(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cells.iter().map(|c| c.representative).collect();
        r.extend_from_slice(&self.unclustered);
        r.sort_unstable();
        r
    }

    /// Scenario index -> the index that stands in for it.
    pub fn assignment(&self) -> BTreeMap<usize, usize> {
        let mut map = BTreeMap::new();
        for c in &self.cells {
            for &m in &c.members {
                map.insert(m, c.representative);
            }
        }
        for &u in &self.unclustered {
            map.insert(u, u);
        }
        map
    }
}

/// `(beta, beta_prime)`: the bound `K(d) delta / 2K + K(d) D / 2K` and the
/// more conservative `K(d) (delta + 2D) / 2K`.
pub fn error_bound(k_delta: usize, k_total: usize, delta: f64, d: f64) -> (f64, f64) {
    if k_delta == 0 || k_total == 0 {
        return (0.0, 0.0);
    }
    let kd = k_delta as f64;
    let k2 = 2.0 * k_total as f64;
    (kd * delta / k2 + kd * d / k2, kd * (delta + 2.0 * d) / k2)
}

/// Cluster usable coordinates on square cells of side `delta / 2`.
///
/// `probs[i]` is the probability of the scenario behind `coords[i]`.
pub fn grid_cluster(coords: &[Coordinate], probs: &[f64], cfg: &GridConfig) -> Result<ClusterResult, ClusterError> {
    if coords.is_empty() {
        return Err(ClusterError::Empty);
    }
    if probs.len() != coords.len() {
        return Err(ClusterError::Length(probs.len(), coords.len()));
    }
    if !(cfg.delta >= 0.0 && cfg.delta.is_finite()) {
        return Err(ClusterError::Delta(cfg.delta));
    }
    let mut points = Vec::new();
    let mut unclustered = Vec::new();
    for (c, &p) in coords.iter().zip(probs) {
        match (c.status.is_usable(), c.kappa, c.sigma) {
            (true, Some(a), Some(b)) => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(ClusterError::NonFinite(c.k));
                }
                points.push((c.k, a, b, p));
            }
            _ => unclustered.push(c.k),
        }
    }
    unclustered.sort_unstable();

    let anchor = match cfg.anchor {
        Anchor::MinCorner if !points.is_empty() => [
            points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
            points.iter().map(|p| p.2).fold(f64::INFINITY, f64::min),
        ],
        _ => [0.0, 0.0],
    };
    let side = cfg.delta * 0.5;

    let mut cells: BTreeMap<[i64; 2], Vec<(usize, f64, f64, f64)>> = BTreeMap::new();
    if side > 0.0 {
        for &pt in &points {
            let id = [
                ((pt.1 - anchor[0]) / side).floor() as i64,
                ((pt.2 - anchor[1]) / side).floor() as i64,
            ];
            cells.entry(id).or_default().push(pt);
        }
    } else {
        let mut by_value: BTreeMap<(i64, i64), Vec<(usize, f64, f64, f64)>> = BTreeMap::new();
        for &pt in &points {
            by_value.entry((total_key(pt.1), total_key(pt.2))).or_default().push(pt);
        }
        for (rank, members) in by_value.into_values().enumerate() {
            cells.insert([rank as i64, 0], members);
        }
    }

    let mut out_cells = Vec::with_capacity(cells.len());
    for (id, mut members) in cells {
        members.sort_by_key(|m| m.0);
        let probability: f64 = members.iter().map(|m| m.3).sum();
        let representative = match cfg.rule {
            RepresentativeRule::LowestIndex => members[0].0,
            RepresentativeRule::NearestCentroid => {
                let (ck, cs) = if probability > 0.0 {
                    (
                        members.iter().map(|m| m.3 * m.1).sum::<f64>() / probability,
                        members.iter().map(|m| m.3 * m.2).sum::<f64>() / probability,
                    )
                } else {
                    let n = members.len() as f64;
                    (members.iter().map(|m| m.1).sum::<f64>() / n, members.iter().map(|m| m.2).sum::<f64>() / n)
                };
                let mut best = members[0];
                let mut best_d = f64::INFINITY;
                for &m in &members {
                    let dist = (m.1 - ck).powi(2) + (m.2 - cs).powi(2);
                    if dist < best_d {
                        best_d = dist;
                        best = m;
                    }
                }
                best.0
            }
        };
        out_cells.push(Cell {
            cell_id: id,
            members: members.iter().map(|m| m.0).collect(),
            representative,
            probability,
        });
    }

    let k_total = coords.len();
    let k_delta = points.len() - out_cells.len();
    let d = points.iter().map(|p| p.2 - p.1).fold(0.0, f64::max);
    let (beta, beta_prime) = error_bound(k_delta, k_total, cfg.delta, d);
    Ok(ClusterResult {
        delta: cfg.delta,
        anchor,
        cells: out_cells,
        unclustered,
        k_total,
        k_delta,
        d,
        beta,
        beta_prime,
    })
}

/// Order-preserving integer key for a finite double.
fn total_key(v: f64) -> i64 {
    let bits = (v + 0.0).to_bits() as i64;
    bits ^ (((bits >> 63) as u64) >> 1) as i64
}

/// Reduced sample: one scenario per cell carrying the cell's probability,
/// plus every unclustered scenario with its own, ordered by index.
pub fn select_representatives(result: &ClusterResult, scenarios: &[Scenario]) -> Result<Vec<Scenario>, ClusterError> {
    let find = |k: usize| scenarios.iter().find(|s| s.k == k).ok_or(ClusterError::Missing(k));
    let mut out = Vec::with_capacity(result.cells.len() + result.unclustered.len());
    for c in &result.cells {
        for &m in &c.members {
            find(m)?;
        }
        let mut s = find(c.representative)?.clone();
        s.prob = c.probability;
        out.push(s);
    }
    for &u in &result.unclustered {
        out.push(find(u)?.clone());
    }
    out.sort_by_key(|s| s.k);
    Ok(out)
}

/// Representative table: one column per representative with its random
/// values (or `h` when none are recorded) and probability.
pub fn representative_table(reduced: &[Scenario]) -> String {
    let rows = reduced
        .first()
        .map(|s| s.xi.as_ref().map_or(s.h.len(), Vec::len))
        .unwrap_or(0);
    let mut out = String::new();
    let _ = write!(out, "k");
    for s in reduced {
        let _ = write!(out, ",{}", s.k);
    }
    out.push('\n');
    for r in 0..rows {
        let _ = write!(out, "xi{}", r + 1);
        for s in reduced {
            let v = s.xi.as_ref().map_or(s.h[r], |xi| xi[r]);
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    let _ = write!(out, "probability");
    for s in reduced {
        let _ = write!(out, ",{:?}", s.prob);
    }
    out.push('\n');
    out
}
