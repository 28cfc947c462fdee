//! Extensive-form sample average approximation and recourse evaluation.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linsolve::{self, LpError, LpInstance, LpStatus, MilpOptions, RowSense};
use crate::model::{ModelError, Scenario, StochasticProgram};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SaaError {
    #[error("empty scenario list")]
    NoScenarios,
    #[error("scenario probabilities sum to {0}, expected 1")]
    Probabilities(f64),
    #[error("extensive form is infeasible")]
    Infeasible,
    #[error("extensive form is unbounded")]
    Unbounded,
    #[error("recourse problem infeasible at this x for scenario {k}")]
    RecourseInfeasible { k: usize },
    #[error("recourse problem unbounded for scenario {k}")]
    RecourseUnbounded { k: usize },
    #[error("x has {got} entries, expected {want}")]
    Dimension { got: usize, want: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] LpError),
}

const PROB_SUM_TOL: f64 = 1e-9;

/// Deterministic equivalent: variables `x, y_1, ..., y_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensiveForm {
    pub instance: LpInstance,
    pub n: usize,
    pub m: usize,
    pub scenarios: usize,
}

impl ExtensiveForm {
    pub fn num_vars(&self) -> usize {
        self.instance.num_vars()
    }

    pub fn num_constraints(&self) -> usize {
        self.instance.num_rows()
    }
}

/// `(variables, constraints)` of the extensive form without building it.
pub fn extensive_form_size(program: &StochasticProgram, scenarios: usize) -> (usize, usize) {
    (
        program.n() + scenarios * program.m(),
        program.first_stage_rows() + scenarios * program.l(),
    )
}

fn check_scenarios(program: &StochasticProgram, scenarios: &[Scenario]) -> Result<(), SaaError> {
    if scenarios.is_empty() {
        return Err(SaaError::NoScenarios);
    }
    for s in scenarios {
        program.check_scenario(s)?;
    }
    let total: f64 = scenarios.iter().map(|s| s.prob).sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(SaaError::Probabilities(total));
    }
    Ok(())
}

pub fn extensive_form(program: &StochasticProgram, scenarios: &[Scenario]) -> Result<ExtensiveForm, SaaError> {
    check_scenarios(program, scenarios)?;
    let (n, m) = (program.n(), program.m());
    let first = program.first_stage();
    let tpl = program.template();
    let (nv, nr) = extensive_form_size(program, scenarios.len());

    let mut objective = first.c.clone();
    let mut lower = first.lower.clone();
    let mut upper = first.upper.clone();
    let mut integer = first.integer.clone();
    for s in scenarios {
        objective.extend(s.q.iter().map(|q| s.prob * q));
        lower.extend_from_slice(&tpl.lower);
        upper.extend_from_slice(&tpl.upper);
        integer.extend_from_slice(&tpl.integer);
    }

    let mut rows = Vec::with_capacity(nr);
    let mut senses = Vec::with_capacity(nr);
    let mut rhs = Vec::with_capacity(nr);
    for (a, b) in first.a.iter().zip(&first.b) {
        let mut row = a.clone();
        row.resize(nv, 0.0);
        rows.push(row);
        senses.push(RowSense::Le);
        rhs.push(*b);
    }
    for (i, s) in scenarios.iter().enumerate() {
        let offset = n + i * m;
        for (r, w) in tpl.w.iter().enumerate() {
            let mut row = vec![0.0; nv];
            row[..n].copy_from_slice(&s.t[r]);
            row[offset..offset + m].copy_from_slice(w);
            rows.push(row);
            senses.push(tpl.senses[r]);
            rhs.push(s.h[r]);
        }
    }
    Ok(ExtensiveForm {
        instance: LpInstance {
            objective,
            rows,
            senses,
            rhs,
            lower,
            upper,
            integer,
        },
        n,
        m,
        scenarios: scenarios.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub nu: f64,
    pub x_star: Vec<f64>,
    #[serde(rename = "per_scenario_Q")]
    pub per_scenario_q: Vec<f64>,
    pub scenarios: Vec<usize>,
    pub variables: usize,
    pub constraints: usize,
    pub nodes: usize,
    /// `|nu - (c'x* + sum p_k Q(x*, xi_k))|`.
    pub decomposition_residual: f64,
    /// Wall-clock time; callers drop it when reports must be reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub solve_seconds: f64,
}

/// Solve the extensive form to optimality and recompute the objective
/// scenario by scenario.
pub fn solve_saa(
    program: &StochasticProgram,
    scenarios: &[Scenario],
    opts: &MilpOptions,
) -> Result<SolveReport, SaaError> {
    let start = Instant::now();
    let ef = extensive_form(program, scenarios)?;
    let has_int = ef.instance.integer.iter().any(|&b| b);
    let (status, value, point, nodes) = if has_int {
        let s = linsolve::solve_milp(&ef.instance, opts)?;
        (s.status, s.value, s.point, s.nodes)
    } else {
        let s = linsolve::solve_lp(&ef.instance)?;
        (s.status, s.value, s.point, 1)
    };
    match status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(SaaError::Infeasible),
        LpStatus::Unbounded => return Err(SaaError::Unbounded),
    }
    let x_star = point[..ef.n].to_vec();
    let per_scenario_q = scenarios
        .iter()
        .map(|s| evaluate_recourse(program, &x_star, s))
        .collect::<Result<Vec<_>, _>>()?;
    let recomputed = dot(&program.first_stage().c, &x_star)
        + scenarios.iter().zip(&per_scenario_q).map(|(s, q)| s.prob * q).sum::<f64>();
    Ok(SolveReport {
        nu: value,
        x_star,
        per_scenario_q,
        scenarios: scenarios.iter().map(|s| s.k).collect(),
        variables: ef.num_vars(),
        constraints: ef.num_constraints(),
        nodes,
        decomposition_residual: (value - recomputed).abs(),
        timings: Some(Timings {
            solve_seconds: start.elapsed().as_secs_f64(),
        }),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Q(x, xi_k)`: the second-stage optimum at a fixed `x`, honoring the
/// template's integrality flags and its original bounds.
pub fn evaluate_recourse(program: &StochasticProgram, x: &[f64], scenario: &Scenario) -> Result<f64, SaaError> {
    if x.len() != program.n() {
        return Err(SaaError::Dimension { got: x.len(), want: program.n() });
    }
    program.check_scenario(scenario)?;
    let tpl = program.template();
    let inst = LpInstance {
        objective: scenario.q.clone(),
        rows: tpl.w.clone(),
        senses: tpl.senses.clone(),
        rhs: scenario.h.iter().zip(&scenario.t).map(|(h, t)| h - dot(t, x)).collect(),
        lower: tpl.lower.clone(),
        upper: tpl.upper.clone(),
        integer: tpl.integer.clone(),
    };
    let (status, value) = if tpl.integer.iter().any(|&b| b) {
        let s = linsolve::solve_milp(&inst, &MilpOptions::default())?;
        (s.status, s.value)
    } else {
        let s = linsolve::solve_lp(&inst)?;
        (s.status, s.value)
    };
    match status {
        LpStatus::Optimal => Ok(value),
        LpStatus::Infeasible => Err(SaaError::RecourseInfeasible { k: scenario.k }),
        LpStatus::Unbounded => Err(SaaError::RecourseUnbounded { k: scenario.k }),
    }
}

/// `c'x + sum_k p_k Q(x, xi_k)`.
pub fn evaluate_objective(program: &StochasticProgram, x: &[f64], scenarios: &[Scenario]) -> Result<f64, SaaError> {
    let mut total = dot(&program.first_stage().c, x);
    for s in scenarios {
        total += s.prob * evaluate_recourse(program, x, s)?;
    }
    Ok(total)
}

/// `count` seeded first-stage feasible points, integral where required.
pub fn random_feasible_points(program: &StochasticProgram, count: usize, seed: u64) -> Result<Vec<Vec<f64>>, SaaError> {
    let (lo, hi) = program.first_stage_box()?;
    let first = program.first_stage();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 100_000 * count.max(1) {
            return Err(SaaError::Infeasible);
        }
        let x: Vec<f64> = (0..program.n())
            .map(|j| {
                let v = if hi[j] > lo[j] { rng.gen_range(lo[j]..=hi[j]) } else { lo[j] };
                if first.integer[j] {
                    v.round().clamp(lo[j].ceil(), hi[j].floor())
                } else {
                    v
                }
            })
            .collect();
        let ok = first.a.iter().zip(&first.b).all(|(row, b)| dot(row, &x) <= b + 1e-9);
        if ok {
            out.push(x);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGap {
    pub x: Vec<f64>,
    pub nu_full: f64,
    pub nu_reduced: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub nu_full: f64,
    pub nu_reduced: f64,
    pub x_full: Vec<f64>,
    pub x_reduced: Vec<f64>,
    /// `|nu~* - nu*|`.
    pub nu_gap: f64,
    /// `|nu(x~*) - nu*|`.
    pub x_gap: f64,
    pub probe_gaps: Vec<ProbeGap>,
    pub max_probe_gap: f64,
    pub beta: f64,
    pub beta_prime: f64,
    pub nu_gap_within_beta_prime: bool,
    pub probes_within_beta_prime: bool,
    /// `nu~(x~*) <= nu~(x*)`.
    pub reduced_optimality: bool,
    /// `nu(x*) <= nu(x~*)`.
    pub full_optimality: bool,
}

/// Compare the full and reduced solves at both optima and at `probes`.
pub fn consistency_report(
    program: &StochasticProgram,
    full: &[Scenario],
    reduced: &[Scenario],
    full_report: &SolveReport,
    reduced_report: &SolveReport,
    probes: &[Vec<f64>],
    beta: f64,
    beta_prime: f64,
) -> Result<ConsistencyReport, SaaError> {
    let tol = 1e-7;
    let x_full = &full_report.x_star;
    let x_red = &reduced_report.x_star;
    let full_at_red = evaluate_objective(program, x_red, full)?;
    let red_at_full = evaluate_objective(program, x_full, reduced)?;
    let mut points = vec![x_full.clone(), x_red.clone()];
    points.extend(probes.iter().cloned());
    let probe_gaps = points
        .into_iter()
        .map(|x| {
            let nu_full = evaluate_objective(program, &x, full)?;
            let nu_reduced = evaluate_objective(program, &x, reduced)?;
            Ok(ProbeGap { gap: (nu_reduced - nu_full).abs(), x, nu_full, nu_reduced })
        })
        .collect::<Result<Vec<_>, SaaError>>()?;
    let max_probe_gap = probe_gaps.iter().map(|p| p.gap).fold(0.0, f64::max);
    let nu_gap = (reduced_report.nu - full_report.nu).abs();
    Ok(ConsistencyReport {
        nu_full: full_report.nu,
        nu_reduced: reduced_report.nu,
        x_full: x_full.clone(),
        x_reduced: x_red.clone(),
        nu_gap,
        x_gap: (full_at_red - full_report.nu).abs(),
        max_probe_gap,
        probe_gaps,
        beta,
        beta_prime,
        nu_gap_within_beta_prime: nu_gap <= beta_prime + 1e-6,
        probes_within_beta_prime: max_probe_gap <= beta_prime + 1e-6,
        reduced_optimality: reduced_report.nu <= red_at_full + tol,
        full_optimality: full_report.nu <= full_at_red + tol,
    })
}
