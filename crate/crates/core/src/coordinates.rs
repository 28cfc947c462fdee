//! Per-scenario similarity coordinates `(kappa, sigma)`.
//!
//! `kappa` is the minimum of the joint objective `[c; q_k]` over the relaxed
//! scenario polyhedron; `sigma` is its minimum over the polyhedron's
//! maximum-volume inscribed ellipsoid. Since the ellipsoid lies inside the
//! polyhedron, `kappa <= sigma`.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ellipsoid::{self, Ellipsoid, EllipsoidError, MvieOptions};
use crate::linsolve::{self, LpInstance, LpStatus, MilpOptions};
use crate::model::{scenario_polyhedron, ModelError, Polyhedron, RelaxationConfig, Scenario, StochasticProgram};

pub const CSV_HEADER: &str = "k,kappa,sigma,status";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoordinateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ellipsoid(#[from] EllipsoidError),
    #[error(transparent)]
    Solver(#[from] linsolve::LpError),
    #[error("scenario polyhedron is empty")]
    Infeasible,
    #[error("objective is unbounded over the scenario polyhedron")]
    Unbounded,
    #[error("coordinates CSV line {line} (byte {offset}): {msg}")]
    Csv { line: usize, offset: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateStatus {
    Ok,
    /// Equality rows were split and relaxed before the ellipsoid solve.
    Regularized,
    /// The polyhedron is flat, so no ellipsoid exists; only `kappa` is set.
    Degenerate,
    Infeasible,
    /// Any other per-scenario failure (unboundable variable, solver limit).
    Failed,
}

impl CoordinateStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CoordinateStatus::Ok => "ok",
            CoordinateStatus::Regularized => "regularized",
            CoordinateStatus::Degenerate => "degenerate",
            CoordinateStatus::Infeasible => "infeasible",
            CoordinateStatus::Failed => "failed",
        }
    }

    /// Ok and regularized coordinates take part in clustering.
    pub fn is_usable(self) -> bool {
        matches!(self, CoordinateStatus::Ok | CoordinateStatus::Regularized)
    }
}

impl FromStr for CoordinateStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "ok" => CoordinateStatus::Ok,
            "regularized" => CoordinateStatus::Regularized,
            "degenerate" => CoordinateStatus::Degenerate,
            "infeasible" => CoordinateStatus::Infeasible,
            "failed" => CoordinateStatus::Failed,
            other => return Err(format!("unknown status {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub k: usize,
    pub kappa: Option<f64>,
    pub sigma: Option<f64>,
    pub status: CoordinateStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaMode {
    Lp,
    Milp,
}

impl FromStr for KappaMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lp" => Ok(KappaMode::Lp),
            "milp" => Ok(KappaMode::Milp),
            other => Err(format!("kappa mode must be lp or milp, got {other:?}")),
        }
    }
}

/// How missing upper bounds on `y` are filled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMode {
    /// One bound per variable, the largest over the whole scenario set.
    Sample,
    /// Each scenario derives its own bounds.
    PerScenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinateConfig {
    pub epsilon: f64,
    pub mvie: MvieOptions,
    pub kappa_mode: KappaMode,
    pub bounds: BoundMode,
}

impl Default for CoordinateConfig {
    fn default() -> Self {
        CoordinateConfig {
            epsilon: crate::model::DEFAULT_EPSILON,
            mvie: MvieOptions::default(),
            kappa_mode: KappaMode::Lp,
            bounds: BoundMode::Sample,
        }
    }
}

impl CoordinateConfig {
    pub fn relaxation(&self) -> RelaxationConfig {
        RelaxationConfig { epsilon: self.epsilon }
    }

    /// The program whose scenario polyhedra are used for this scenario set.
    pub fn prepare(&self, program: &StochasticProgram, scenarios: &[Scenario]) -> Result<StochasticProgram, ModelError> {
        match self.bounds {
            BoundMode::Sample if !scenarios.is_empty() => program.with_sample_recourse_bounds(scenarios),
            _ => Ok(program.clone()),
        }
    }
}

fn joint_objective(program: &StochasticProgram, scenario: &Scenario) -> Vec<f64> {
    let mut w = program.first_stage().c.clone();
    w.extend_from_slice(&scenario.q);
    w
}

fn kappa_over(
    program: &StochasticProgram,
    scenario: &Scenario,
    poly: &Polyhedron,
    mode: KappaMode,
) -> Result<f64, CoordinateError> {
    let w = joint_objective(program, scenario);
    let (status, value) = match mode {
        KappaMode::Lp => {
            let sol = linsolve::minimize_over(poly, &w)?;
            (sol.status, sol.value)
        }
        KappaMode::Milp => {
            let mut inst = LpInstance::from_polyhedron(w, poly);
            inst.integer = program
                .first_stage()
                .integer
                .iter()
                .chain(&program.template().integer)
                .copied()
                .collect();
            let sol = linsolve::solve_milp(&inst, &MilpOptions::default())?;
            (sol.status, sol.value)
        }
    };
    match status {
        LpStatus::Optimal => Ok(value),
        LpStatus::Infeasible => Err(CoordinateError::Infeasible),
        LpStatus::Unbounded => Err(CoordinateError::Unbounded),
    }
}

/// Minimum of `c'x + q_k'y` over the relaxed scenario polyhedron.
pub fn kappa(program: &StochasticProgram, scenario: &Scenario, cfg: &CoordinateConfig) -> Result<f64, CoordinateError> {
    let poly = scenario_polyhedron(program, scenario, &cfg.relaxation())?;
    kappa_over(program, scenario, &poly, cfg.kappa_mode)
}

/// Minimum of `c'x + q_k'y` over `e`, in closed form.
pub fn sigma(program: &StochasticProgram, scenario: &Scenario, e: &Ellipsoid) -> Result<f64, CoordinateError> {
    Ok(e.min_linear(&joint_objective(program, scenario))?)
}

/// Full per-scenario computation. Failures are folded into the status.
pub fn coordinate(program: &StochasticProgram, scenario: &Scenario, cfg: &CoordinateConfig) -> Coordinate {
    let failed = |status| Coordinate {
        k: scenario.k,
        kappa: None,
        sigma: None,
        status,
    };
    let poly = match scenario_polyhedron(program, scenario, &cfg.relaxation()) {
        Ok(p) => p,
        Err(ModelError::InfeasiblePolyhedron) => return failed(CoordinateStatus::Infeasible),
        Err(_) => return failed(CoordinateStatus::Failed),
    };
    let kappa = match kappa_over(program, scenario, &poly, cfg.kappa_mode) {
        Ok(v) => v,
        Err(CoordinateError::Infeasible) => return failed(CoordinateStatus::Infeasible),
        Err(_) => return failed(CoordinateStatus::Failed),
    };
    match ellipsoid::max_volume_inscribed_ellipsoid(&poly, &cfg.mvie) {
        Ok((e, _)) => match sigma(program, scenario, &e) {
            Ok(s) => Coordinate {
                k: scenario.k,
                kappa: Some(kappa),
                sigma: Some(s),
                status: if poly.regularized_rows > 0 {
                    CoordinateStatus::Regularized
                } else {
                    CoordinateStatus::Ok
                },
            },
            Err(_) => failed(CoordinateStatus::Failed),
        },
        Err(EllipsoidError::Degenerate { .. }) => Coordinate {
            k: scenario.k,
            kappa: Some(kappa),
            sigma: None,
            status: CoordinateStatus::Degenerate,
        },
        Err(_) => failed(CoordinateStatus::Failed),
    }
}

/// Serial batch: prepares the program per `cfg.bounds`, then one
/// coordinate per scenario in input order.
pub fn coordinates_serial(
    program: &StochasticProgram,
    scenarios: &[Scenario],
    cfg: &CoordinateConfig,
) -> Result<Vec<Coordinate>, ModelError> {
    let prepared = cfg.prepare(program, scenarios)?;
    Ok(scenarios.iter().map(|s| coordinate(&prepared, s, cfg)).collect())
}

/// `sigma_k - Q(x, xi_k)`; may be negative.
pub fn epsilon_k(sigma_k: f64, recourse_value: f64) -> f64 {
    sigma_k - recourse_value
}

/// Pairs of scenario indices with bit-identical usable coordinates.
pub fn collisions(coords: &[Coordinate]) -> Vec<(usize, usize)> {
    let mut keyed: Vec<(u64, u64, usize)> = coords
        .iter()
        .filter(|c| c.status.is_usable())
        .filter_map(|c| Some((c.kappa?.to_bits(), c.sigma?.to_bits(), c.k)))
        .collect();
    keyed.sort_unstable();
    keyed
        .windows(2)
        .filter(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1)
        .map(|w| (w[0].2, w[1].2))
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// CSV with header `k,kappa,sigma,status`, sorted by `k`. Values use the
/// shortest representation that round-trips; missing values are empty.
pub fn to_csv(coords: &[Coordinate]) -> String {
    let mut sorted: Vec<&Coordinate> = coords.iter().collect();
    sorted.sort_by_key(|c| c.k);
    let mut out = String::with_capacity(32 * (coords.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for c in sorted {
        let _ = writeln!(out, "{},{},{},{}", c.k, fmt_opt(c.kappa), fmt_opt(c.sigma), c.status.as_str());
    }
    out
}

pub fn from_csv(text: &str) -> Result<Vec<Coordinate>, CoordinateError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let start = offset;
        offset += line.len();
        let line = line.trim_end_matches(['\n', '\r']);
        let err = |msg: String| CoordinateError::Csv { line: i + 1, offset: start, msg };
        if i == 0 {
            if line != CSV_HEADER {
                return Err(err(format!("expected header {CSV_HEADER:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        }
        let num = |s: &str| -> Result<Option<f64>, CoordinateError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|e| err(format!("{s:?}: {e}")))
            }
        };
        out.push(Coordinate {
            k: fields[0].parse().map_err(|e| err(format!("index {:?}: {e}", fields[0])))?,
            kappa: num(fields[1])?,
            sigma: num(fields[2])?,
            status: fields[3].parse().map_err(err)?,
        });
    }
    if offset == 0 {
        return Err(CoordinateError::Csv { line: 1, offset: 0, msg: "empty file".into() });
    }
    Ok(out)
}
