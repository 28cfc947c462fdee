//! Two-stage stochastic programs, scenarios, and per-scenario polyhedra.
//!
//! A program is `min c'x + E[Q(x, xi)]` over `Ax <= b`, `lb <= x <= ub`
//! with recourse `Q(x, xi) = min { q'y : W y (sense) h - T x, y bounds }`.
//! Only `q`, `T`, `h` depend on the scenario; `W` is fixed.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linsolve::{self, LpInstance, LpStatus, RowSense};
use crate::serde_ext;

/// Default cap on the number of enumerated scenarios.
pub const ENUMERATION_CAP: usize = 1_000_000;
/// Default Slater relaxation applied to split equality rows.
pub const DEFAULT_EPSILON: f64 = 1e-3;

const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid bounds on variable {0}: lower > upper")]
    Bounds(String),
    #[error("first-stage feasible set is empty")]
    EmptyFirstStage,
    #[error("invalid probability: {0}")]
    Probability(String),
    #[error("scenario count {count} exceeds enumeration cap {cap}")]
    CapExceeded { count: u128, cap: usize },
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("program has no scenario map; scenarios must be supplied explicitly")]
    NoScenarioMap,
    #[error("scenario polyhedron is empty")]
    InfeasiblePolyhedron,
    #[error("no finite bound can be derived for variable {0}; supply one explicitly")]
    Unboundable(String),
    #[error(transparent)]
    Solver(#[from] linsolve::LpError),
}

/// First-stage data: `min c'x`, `Ax <= b`, `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStage {
    pub c: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub integer: Vec<bool>,
    #[serde(rename = "lb", with = "serde_ext::lower")]
    pub lower: Vec<f64>,
    #[serde(rename = "ub", with = "serde_ext::upper")]
    pub upper: Vec<f64>,
}

/// `value = base + coef · xi`, one coefficient row per entry. An empty
/// `coef` means the entry is constant.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AffineMap {
    pub base: Vec<f64>,
    #[serde(default, rename = "xi", skip_serializing_if = "Vec::is_empty")]
    pub coef: Vec<Vec<f64>>,
}

impl AffineMap {
    pub fn constant(base: Vec<f64>) -> Self {
        AffineMap { base, coef: Vec::new() }
    }

    pub fn eval(&self, xi: &[f64]) -> Vec<f64> {
        if self.coef.is_empty() {
            return self.base.clone();
        }
        self.base
            .iter()
            .zip(&self.coef)
            .map(|(b, row)| b + row.iter().zip(xi).map(|(a, x)| a * x).sum::<f64>())
            .collect()
    }

    fn check(&self, len: usize, xi_dim: Option<usize>, what: &str) -> Result<(), ModelError> {
        if self.base.len() != len {
            return Err(ModelError::Dimension(format!(
                "{what} base has {} entries, expected {len}",
                self.base.len()
            )));
        }
        if !self.coef.is_empty() {
            if self.coef.len() != len {
                return Err(ModelError::Dimension(format!(
                    "{what} has {} coefficient rows, expected {len}",
                    self.coef.len()
                )));
            }
            if let Some(r) = xi_dim {
                if self.coef.iter().any(|row| row.len() != r) {
                    return Err(ModelError::Dimension(format!(
                        "{what} coefficient rows must have {r} entries"
                    )));
                }
            }
        }
        if !all_finite(&self.base) || !self.coef.iter().all(|r| all_finite(r)) {
            return Err(ModelError::NonFinite(what.to_string()));
        }
        Ok(())
    }

    fn xi_dim(&self) -> Option<usize> {
        self.coef.first().map(Vec::len)
    }
}

/// How `(q, T, h)` depend on the random vector. `t` is row-major `l x n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMap {
    pub q: AffineMap,
    #[serde(rename = "T")]
    pub t: AffineMap,
    pub h: AffineMap,
}

/// Fixed second-stage structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub senses: Vec<RowSense>,
    pub integer: Vec<bool>,
    #[serde(rename = "lb", with = "serde_ext::lower")]
    pub lower: Vec<f64>,
    #[serde(rename = "ub", with = "serde_ext::upper")]
    pub upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<ScenarioMap>,
}

/// One realization of `(q, T, h)` with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub k: usize,
    pub q: Vec<f64>,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Marginal {
    pub fn uniform(values: Vec<f64>) -> Self {
        let p = 1.0 / values.len() as f64;
        Marginal {
            probs: vec![p; values.len()],
            values,
        }
    }
}

/// Independent finite-support marginals of the random vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub marginals: Vec<Marginal>,
    #[serde(default)]
    pub seed: u64,
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, m) in self.marginals.iter().enumerate() {
            if m.values.is_empty() || m.values.len() != m.probs.len() {
                return Err(ModelError::Dimension(format!(
                    "marginal {i} needs matching nonempty values and probs"
                )));
            }
            if !all_finite(&m.values) || !all_finite(&m.probs) {
                return Err(ModelError::NonFinite(format!("marginal {i}")));
            }
            if m.probs.iter().any(|&p| p < 0.0) {
                return Err(ModelError::Probability(format!("marginal {i} has a negative probability")));
            }
            let total: f64 = m.probs.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(ModelError::Probability(format!(
                    "marginal {i} probabilities sum to {total}"
                )));
            }
        }
        Ok(())
    }

    /// Product of the support sizes.
    pub fn support_size(&self) -> u128 {
        self.marginals.iter().map(|m| m.values.len() as u128).product()
    }
}

/// Validated program handle. Serializes as the `first_stage` and
/// `second_stage` parts of a problem file; only [`build_problem`] creates one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticProgram {
    #[serde(rename = "first_stage")]
    pub(crate) first: FirstStage,
    #[serde(rename = "second_stage")]
    pub(crate) second: ScenarioTemplate,
}

impl StochasticProgram {
    pub fn first_stage(&self) -> &FirstStage {
        &self.first
    }

    pub fn template(&self) -> &ScenarioTemplate {
        &self.second
    }

    /// Number of first-stage variables.
    pub fn n(&self) -> usize {
        self.first.c.len()
    }

    /// Number of second-stage variables.
    pub fn m(&self) -> usize {
        self.second.lower.len()
    }

    /// Number of recourse rows.
    pub fn l(&self) -> usize {
        self.second.w.len()
    }

    pub fn first_stage_rows(&self) -> usize {
        self.first.a.len()
    }

    /// Build the scenario realized by `xi` through the program's affine map.
    pub fn realize(&self, k: usize, xi: &[f64], prob: f64) -> Result<Scenario, ModelError> {
        let map = self.second.map.as_ref().ok_or(ModelError::NoScenarioMap)?;
        let (n, l) = (self.n(), self.l());
        let flat = map.t.eval(xi);
        Ok(Scenario {
            k,
            q: map.q.eval(xi),
            t: (0..l).map(|r| flat[r * n..(r + 1) * n].to_vec()).collect(),
            h: map.h.eval(xi),
            prob,
            xi: Some(xi.to_vec()),
        })
    }

    pub fn check_scenario(&self, s: &Scenario) -> Result<(), ModelError> {
        let (n, m, l) = (self.n(), self.m(), self.l());
        if s.q.len() != m || s.h.len() != l || s.t.len() != l || s.t.iter().any(|r| r.len() != n) {
            return Err(ModelError::Dimension(format!(
                "scenario {} does not match template (q:{m}, T:{l}x{n}, h:{l})",
                s.k
            )));
        }
        if !all_finite(&s.q) || !all_finite(&s.h) || !s.t.iter().all(|r| all_finite(r)) {
            return Err(ModelError::NonFinite(format!("scenario {}", s.k)));
        }
        if !(s.prob > 0.0 && s.prob <= 1.0) {
            return Err(ModelError::Probability(format!("scenario {} has p = {}", s.k, s.prob)));
        }
        Ok(())
    }

    /// Replace unbounded recourse upper bounds by the largest bound derived
    /// over a whole scenario set, so every scenario polyhedron shares them.
    pub fn with_sample_recourse_bounds(&self, scenarios: &[Scenario]) -> Result<Self, ModelError> {
        let x_box = self.first_stage_box()?;
        let mut widest = vec![f64::NEG_INFINITY; self.m()];
        for s in scenarios {
            self.check_scenario(s)?;
            for (w, d) in widest.iter_mut().zip(self.recourse_upper_bounds(s, &x_box, 0.0)?) {
                *w = w.max(d);
            }
        }
        let mut out = self.clone();
        for (u, w) in out.second.upper.iter_mut().zip(widest) {
            if !u.is_finite() && w.is_finite() {
                *u = w;
            }
        }
        Ok(out)
    }

    /// Finite box `[lower, upper]` on `x`, deriving missing upper bounds from
    /// rows of `A` with nonnegative coefficients.
    pub fn first_stage_box(&self) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        let n = self.n();
        let lower = self.first.lower.clone();
        let mut upper = self.first.upper.clone();
        for j in 0..n {
            if !lower[j].is_finite() {
                return Err(ModelError::Unboundable(format!("x{}", j + 1)));
            }
        }
        for j in 0..n {
            if upper[j].is_finite() {
                continue;
            }
            let mut best = f64::INFINITY;
            for (row, &b) in self.first.a.iter().zip(&self.first.b) {
                if row[j] <= 0.0 || row.iter().any(|&v| v < 0.0) {
                    continue;
                }
                let others: f64 = (0..n).filter(|&i| i != j).map(|i| row[i] * lower[i]).sum();
                best = best.min((b - others) / row[j]);
            }
            if !best.is_finite() {
                return Err(ModelError::Unboundable(format!("x{}", j + 1)));
            }
            upper[j] = best;
        }
        Ok((lower, upper))
    }

    /// Upper bounds for `y` in one scenario: explicit where given, else the
    /// tightest row-implied bound, else the largest requirement of the
    /// covering rows (valid because `q_j >= 0` makes larger values useless).
    fn recourse_upper_bounds(
        &self,
        s: &Scenario,
        x_box: &(Vec<f64>, Vec<f64>),
        epsilon: f64,
    ) -> Result<Vec<f64>, ModelError> {
        let m = self.m();
        let (xl, xu) = x_box;
        let tpl = &self.second;
        // Each recourse row as one or two `w·y <= h - T x (+eps)` rows.
        let mut eff: Vec<(Vec<f64>, f64, f64)> = Vec::new(); // (w, rhs max over x, rhs min over x)
        for (r, row) in tpl.w.iter().enumerate() {
            let t = &s.t[r];
            let tx_min: f64 = t.iter().zip(xl.iter().zip(xu)).map(|(&a, (&l, &u))| (a * l).min(a * u)).sum();
            let tx_max: f64 = t.iter().zip(xl.iter().zip(xu)).map(|(&a, (&l, &u))| (a * l).max(a * u)).sum();
            let h = s.h[r];
            match tpl.senses[r] {
                RowSense::Le => eff.push((row.clone(), h - tx_min, h - tx_max)),
                RowSense::Ge => eff.push((neg(row), -h + tx_max, -h + tx_min)),
                RowSense::Eq => {
                    eff.push((row.clone(), h - tx_min + epsilon, h - tx_max + epsilon));
                    eff.push((neg(row), -h + tx_max + epsilon, -h + tx_min + epsilon));
                }
            }
        }
        let mut upper = tpl.upper.clone();
        for j in 0..m {
            if upper[j].is_finite() {
                continue;
            }
            let mut hard = f64::INFINITY;
            let mut need: f64 = 0.0;
            let mut need_finite = true;
            for (w, rhs_max, rhs_min) in &eff {
                let wj = w[j];
                if wj == 0.0 {
                    continue;
                }
                if wj > 0.0 {
                    let others_ok = (0..m).all(|i| i == j || w[i] == 0.0 || (w[i] > 0.0 && tpl.lower[i].is_finite()));
                    if others_ok {
                        let others: f64 = (0..m).filter(|&i| i != j && w[i] != 0.0).map(|i| w[i] * tpl.lower[i]).sum();
                        hard = hard.min((rhs_max - others) / wj);
                    }
                } else {
                    // -|wj| y_j <= rhs - sum_{i != j} w_i y_i
                    let mut others_max = 0.0;
                    for i in (0..m).filter(|&i| i != j && w[i] != 0.0) {
                        let v = if w[i] > 0.0 { w[i] * tpl.upper[i] } else { w[i] * tpl.lower[i] };
                        if !v.is_finite() {
                            need_finite = false;
                        }
                        others_max += v;
                    }
                    need = need.max((others_max - rhs_min) / -wj);
                }
            }
            if hard.is_finite() {
                upper[j] = hard.max(tpl.lower[j]);
            } else if need_finite && s.q[j] >= 0.0 && need.is_finite() {
                upper[j] = need.max(0.0).max(tpl.lower[j]);
            } else {
                return Err(ModelError::Unboundable(format!("y{}", j + 1)));
            }
        }
        Ok(upper)
    }
}

fn neg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Validate and freeze a program.
pub fn build_problem(first: FirstStage, template: ScenarioTemplate) -> Result<StochasticProgram, ModelError> {
    let n = first.c.len();
    let dim = |what: String| Err(ModelError::Dimension(what));
    if first.a.len() != first.b.len() {
        return dim(format!("A has {} rows but b has {}", first.a.len(), first.b.len()));
    }
    if let Some(row) = first.a.iter().find(|r| r.len() != n) {
        return dim(format!("A has {} columns, c has length {n}", row.len()));
    }
    if first.integer.len() != n || first.lower.len() != n || first.upper.len() != n {
        return dim(format!("first-stage integer/lb/ub must have length {n}"));
    }
    if !all_finite(&first.c) || !all_finite(&first.b) || !first.a.iter().all(|r| all_finite(r)) {
        return Err(ModelError::NonFinite("first stage".into()));
    }
    for j in 0..n {
        if first.lower[j].is_nan() || first.upper[j].is_nan() || first.lower[j] == f64::INFINITY {
            return Err(ModelError::NonFinite(format!("bounds of x{}", j + 1)));
        }
        if first.lower[j] > first.upper[j] {
            return Err(ModelError::Bounds(format!("x{}", j + 1)));
        }
    }
    let l = template.w.len();
    let m = template.lower.len();
    if let Some(row) = template.w.iter().find(|r| r.len() != m) {
        return dim(format!("W has {} columns, expected {m}", row.len()));
    }
    if template.senses.len() != l {
        return dim(format!("{} senses for {l} recourse rows", template.senses.len()));
    }
    if template.integer.len() != m || template.upper.len() != m {
        return dim(format!("second-stage integer/lb/ub must have length {m}"));
    }
    if !template.w.iter().all(|r| all_finite(r)) {
        return Err(ModelError::NonFinite("W".into()));
    }
    for j in 0..m {
        if template.lower[j].is_nan() || template.upper[j].is_nan() || template.lower[j] == f64::INFINITY {
            return Err(ModelError::NonFinite(format!("bounds of y{}", j + 1)));
        }
        if template.lower[j] > template.upper[j] {
            return Err(ModelError::Bounds(format!("y{}", j + 1)));
        }
    }
    if let Some(map) = &template.map {
        let r = map.q.xi_dim().or(map.t.xi_dim()).or(map.h.xi_dim());
        map.q.check(m, r, "q map")?;
        map.t.check(l * n, r, "T map")?;
        map.h.check(l, r, "h map")?;
    }

    // Vacuous all-zero rows go; violated ones make X empty.
    let mut first = first;
    let mut keep_a = Vec::new();
    let mut keep_b = Vec::new();
    for (row, b) in first.a.iter().zip(&first.b) {
        if row.iter().all(|&v| v == 0.0) {
            if *b < 0.0 {
                return Err(ModelError::EmptyFirstStage);
            }
        } else {
            keep_a.push(row.clone());
            keep_b.push(*b);
        }
    }
    first.a = keep_a;
    first.b = keep_b;

    let feas = LpInstance {
        objective: vec![0.0; n],
        rows: first.a.clone(),
        senses: vec![RowSense::Le; first.a.len()],
        rhs: first.b.clone(),
        lower: first.lower.clone(),
        upper: first.upper.clone(),
        integer: vec![false; n],
    };
    if linsolve::solve_lp(&feas)?.status == LpStatus::Infeasible {
        return Err(ModelError::EmptyFirstStage);
    }
    Ok(StochasticProgram { first, second: template })
}

/// Full Cartesian product of the marginals, lexicographic in the marginal
/// support indices (first marginal varies slowest).
pub fn enumerate_scenarios(
    program: &StochasticProgram,
    dist: &DistributionSpec,
    cap: usize,
) -> Result<Vec<Scenario>, ModelError> {
    dist.validate()?;
    let count = dist.support_size();
    if count > cap as u128 {
        return Err(ModelError::CapExceeded { count, cap });
    }
    let r = dist.marginals.len();
    let mut idx = vec![0usize; r];
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let xi: Vec<f64> = (0..r).map(|i| dist.marginals[i].values[idx[i]]).collect();
        let prob: f64 = (0..r).map(|i| dist.marginals[i].probs[idx[i]]).product();
        if prob > 0.0 {
            out.push(program.realize(out.len(), &xi, prob)?);
        }
        for i in (0..r).rev() {
            idx[i] += 1;
            if idx[i] < dist.marginals[i].values.len() {
                break;
            }
            idx[i] = 0;
        }
    }
    Ok(out)
}

/// `count` iid draws, each with probability `1 / count`. A pure function of
/// `(dist, count, seed)`.
pub fn sample_iid(
    program: &StochasticProgram,
    dist: &DistributionSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<Scenario>, ModelError> {
    if count == 0 {
        return Err(ModelError::EmptySample);
    }
    dist.validate()?;
    let samplers: Vec<WeightedIndex<f64>> = dist
        .marginals
        .iter()
        .map(|m| WeightedIndex::new(&m.probs).map_err(|e| ModelError::Probability(e.to_string())))
        .collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = 1.0 / count as f64;
    (0..count)
        .map(|k| {
            let xi: Vec<f64> = samplers
                .iter()
                .zip(&dist.marginals)
                .map(|(s, m)| m.values[s.sample(&mut rng)])
                .collect();
            program.realize(k, &xi, p)
        })
        .collect()
}

/// Inequality system `rows · z <= rhs` over `z = [x; y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub names: Vec<String>,
    /// Leading variables that belong to the first stage.
    pub n_first: usize,
    /// Equality rows that were split and relaxed by a positive epsilon.
    #[serde(default)]
    pub regularized_rows: usize,
}

impl Polyhedron {
    /// Generic polyhedron without stage roles. Rejects all-zero rows with a
    /// negative right-hand side and drops vacuous ones.
    pub fn new(rows: Vec<Vec<f64>>, rhs: Vec<f64>, dim: usize) -> Result<Self, ModelError> {
        let names = (0..dim).map(|i| format!("z{}", i + 1)).collect();
        Self::assemble(rows, rhs, names, dim, 0)
    }

    fn assemble(
        rows: Vec<Vec<f64>>,
        rhs: Vec<f64>,
        names: Vec<String>,
        n_first: usize,
        regularized_rows: usize,
    ) -> Result<Self, ModelError> {
        let d = names.len();
        if rows.len() != rhs.len() || rows.iter().any(|r| r.len() != d) {
            return Err(ModelError::Dimension("polyhedron rows must have one entry per variable".into()));
        }
        let mut out_rows = Vec::with_capacity(rows.len());
        let mut out_rhs = Vec::with_capacity(rows.len());
        for (row, g) in rows.into_iter().zip(rhs) {
            if !all_finite(&row) || !g.is_finite() {
                return Err(ModelError::NonFinite("polyhedron row".into()));
            }
            if row.iter().all(|&v| v == 0.0) {
                if g < 0.0 {
                    return Err(ModelError::InfeasiblePolyhedron);
                }
                continue;
            }
            out_rows.push(row);
            out_rhs.push(g);
        }
        Ok(Polyhedron {
            rows: out_rows,
            rhs: out_rhs,
            names,
            n_first,
            regularized_rows,
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Largest row violation, each row scaled by its norm.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, g)| {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                (row.iter().zip(z).map(|(a, x)| a * x).sum::<f64>() - g) / norm
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        self.max_violation(z) <= tol
    }

    /// Every variable has an upper-bound row `e_j` and a lower-bound row `-e_j`.
    pub fn has_bound_rows(&self) -> bool {
        (0..self.dim()).all(|j| {
            let is_unit = |row: &Vec<f64>, sign: f64| {
                row.iter().enumerate().all(|(i, &v)| if i == j { v * sign > 0.0 } else { v == 0.0 })
            };
            self.rows.iter().any(|r| is_unit(r, 1.0)) && self.rows.iter().any(|r| is_unit(r, -1.0))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationConfig {
    /// Relaxation applied to both halves of every equality recourse row.
    pub epsilon: f64,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        RelaxationConfig { epsilon: DEFAULT_EPSILON }
    }
}

/// Joint `[x; y]` polyhedron of one scenario with integrality dropped.
///
/// Contains `Ax <= b`, finite bound rows on every variable (derived when not
/// supplied), and the recourse rows. Equality recourse rows become two
/// inequalities each relaxed by `cfg.epsilon`.
pub fn scenario_polyhedron(
    program: &StochasticProgram,
    scenario: &Scenario,
    cfg: &RelaxationConfig,
) -> Result<Polyhedron, ModelError> {
    program.check_scenario(scenario)?;
    if !(cfg.epsilon >= 0.0 && cfg.epsilon.is_finite()) {
        return Err(ModelError::NonFinite("epsilon".into()));
    }
    let (n, m) = (program.n(), program.m());
    let d = n + m;
    let x_box = program.first_stage_box()?;
    let y_upper = program.recourse_upper_bounds(scenario, &x_box, cfg.epsilon)?;
    let tpl = &program.second;

    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (a, b) in program.first.a.iter().zip(&program.first.b) {
        let mut row = a.clone();
        row.resize(d, 0.0);
        rows.push(row);
        rhs.push(*b);
    }
    let mut regularized = 0;
    for (r, w) in tpl.w.iter().enumerate() {
        let mut row = scenario.t[r].clone();
        row.extend_from_slice(w);
        let h = scenario.h[r];
        match tpl.senses[r] {
            RowSense::Le => {
                rows.push(row);
                rhs.push(h);
            }
            RowSense::Ge => {
                rows.push(neg(&row));
                rhs.push(-h);
            }
            RowSense::Eq => {
                rows.push(neg(&row));
                rhs.push(-h + cfg.epsilon);
                rows.push(row);
                rhs.push(h + cfg.epsilon);
                if cfg.epsilon > 0.0 {
                    regularized += 1;
                }
            }
        }
    }
    let (xl, xu) = &x_box;
    let lowers = xl.iter().chain(&tpl.lower);
    let uppers = xu.iter().chain(&y_upper);
    for (j, (&lo, &up)) in lowers.zip(uppers).enumerate() {
        if !lo.is_finite() {
            let name = if j < n { format!("x{}", j + 1) } else { format!("y{}", j - n + 1) };
            return Err(ModelError::Unboundable(name));
        }
        let mut row = vec![0.0; d];
        row[j] = -1.0;
        rows.push(row.clone());
        rhs.push(-lo);
        row[j] = 1.0;
        rows.push(row);
        rhs.push(up);
    }

    let names = (0..n)
        .map(|i| format!("x{}", i + 1))
        .chain((0..m).map(|i| format!("y{}", i + 1)))
        .collect();
    let poly = Polyhedron::assemble(rows, rhs, names, n, regularized)?;
    let feas = linsolve::minimize_over(&poly, &vec![0.0; d])?;
    if feas.status != LpStatus::Optimal {
        return Err(ModelError::InfeasiblePolyhedron);
    }
    Ok(poly)
}

/// The two-product shortage example: `min 2x1 + 3x2 + E[7 y1 + 12 y2]`
/// subject to `x1 + x2 <= 100`, `y1 >= xi1 - 2x1 - 6x2`,
/// `y2 >= xi2 - 3x1 - 3x2`, everything nonnegative and integer, with
/// `xi1` uniform on `310..=319` and `xi2` uniform on `292..=301`.
pub fn builtin_example1() -> (StochasticProgram, DistributionSpec) {
    let first = FirstStage {
        c: vec![2.0, 3.0],
        a: vec![vec![1.0, 1.0]],
        b: vec![100.0],
        integer: vec![true, true],
        lower: vec![0.0, 0.0],
        upper: vec![f64::INFINITY, f64::INFINITY],
    };
    let template = ScenarioTemplate {
        w: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        senses: vec![RowSense::Ge, RowSense::Ge],
        integer: vec![true, true],
        lower: vec![0.0, 0.0],
        upper: vec![f64::INFINITY, f64::INFINITY],
        map: Some(ScenarioMap {
            q: AffineMap::constant(vec![7.0, 12.0]),
            t: AffineMap::constant(vec![2.0, 6.0, 3.0, 3.0]),
            h: AffineMap {
                base: vec![0.0, 0.0],
                coef: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            },
        }),
    };
    let program = build_problem(first, template).expect("built-in instance is valid");
    let dist = DistributionSpec {
        marginals: vec![
            Marginal::uniform((310..=319).map(f64::from).collect()),
            Marginal::uniform((292..=301).map(f64::from).collect()),
        ],
        seed: 0,
    };
    (program, dist)
}

/// Single-period newsvendor as a two-stage program:
/// `min cost·x + (cost - salvage) y+ + (price - cost) y-` with
/// `x - y+ + y- = xi`. The equality recourse makes every scenario polyhedron
/// flat unless it is regularized.
pub fn builtin_newsvendor(cost: f64, price: f64, salvage: f64, demands: Vec<f64>) -> (StochasticProgram, DistributionSpec) {
    let cap = demands.iter().cloned().fold(0.0, f64::max) * 2.0;
    let first = FirstStage {
        c: vec![cost],
        a: vec![],
        b: vec![],
        integer: vec![false],
        lower: vec![0.0],
        upper: vec![cap],
    };
    let template = ScenarioTemplate {
        w: vec![vec![-1.0, 1.0]],
        senses: vec![RowSense::Eq],
        integer: vec![false, false],
        lower: vec![0.0, 0.0],
        upper: vec![cap, cap],
        map: Some(ScenarioMap {
            q: AffineMap::constant(vec![cost - salvage, price - cost]),
            t: AffineMap::constant(vec![1.0]),
            h: AffineMap {
                base: vec![0.0],
                coef: vec![vec![1.0]],
            },
        }),
    };
    let program = build_problem(first, template).expect("built-in instance is valid");
    let dist = DistributionSpec {
        marginals: vec![Marginal::uniform(demands)],
        seed: 0,
    };
    (program, dist)
}

/// Synthetic covering instance with three independent demands whose support
/// sizes multiply to 750. Used for scale tests.
pub fn builtin_synthetic750() -> (StochasticProgram, DistributionSpec) {
    // Three products, four facilities; facility j supplies T[r][j] of product r.
    let first = FirstStage {
        c: vec![4.0, 5.5, 3.0, 6.0],
        a: vec![vec![1.0, 1.0, 1.0, 1.0], vec![2.0, 0.0, 1.0, 0.0]],
        b: vec![120.0, 150.0],
        integer: vec![true; 4],
        lower: vec![0.0; 4],
        upper: vec![f64::INFINITY; 4],
    };
    let t = vec![
        3.0, 1.0, 0.0, 2.0, //
        1.0, 4.0, 2.0, 0.0, //
        0.0, 1.0, 3.0, 2.5,
    ];
    let template = ScenarioTemplate {
        w: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        senses: vec![RowSense::Ge; 3],
        integer: vec![true; 3],
        lower: vec![0.0; 3],
        upper: vec![f64::INFINITY; 3],
        map: Some(ScenarioMap {
            q: AffineMap::constant(vec![9.0, 14.0, 11.0]),
            t: AffineMap::constant(t),
            h: AffineMap {
                base: vec![0.0; 3],
                coef: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            },
        }),
    };
    let program = build_problem(first, template).expect("built-in instance is valid");
    let dist = DistributionSpec {
        marginals: vec![
            Marginal::uniform((0..5).map(|i| 180.0 + 10.0 * i as f64).collect()),
            Marginal::uniform((0..10).map(|i| 200.0 + 7.0 * i as f64).collect()),
            Marginal::uniform((0..15).map(|i| 150.0 + 5.0 * i as f64).collect()),
        ],
        seed: 0,
    };
    (program, dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1_scenarios() -> (StochasticProgram, Vec<Scenario>) {
        let (p, d) = builtin_example1();
        let s = enumerate_scenarios(&p, &d, ENUMERATION_CAP).unwrap();
        (p, s)
    }

    #[test]
    fn example1_data() {
        let (p, d) = builtin_example1();
        assert_eq!(p.first_stage().c, vec![2.0, 3.0]);
        assert_eq!(p.template().map.as_ref().unwrap().q.base, vec![7.0, 12.0]);
        assert_eq!(d.marginals[1].values, (292..=301).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (p, _) = builtin_example1();
        let mut first = p.first_stage().clone();
        first.c.push(1.0);
        assert!(matches!(
            build_problem(first, p.template().clone()),
            Err(ModelError::Dimension(_))
        ));
    }

    #[test]
    fn zero_row_removed() {
        let (p, _) = builtin_example1();
        let mut first = p.first_stage().clone();
        first.a.push(vec![0.0, 0.0]);
        first.b.push(0.0);
        let built = build_problem(first.clone(), p.template().clone()).unwrap();
        assert_eq!(built.first_stage_rows(), 1);
        first.b[1] = -1.0;
        assert_eq!(
            build_problem(first, p.template().clone()),
            Err(ModelError::EmptyFirstStage)
        );
    }

    #[test]
    fn empty_first_stage_detected() {
        let (p, _) = builtin_example1();
        let mut first = p.first_stage().clone();
        first.a.push(vec![-1.0, -1.0]);
        first.b.push(-101.0);
        assert_eq!(build_problem(first, p.template().clone()), Err(ModelError::EmptyFirstStage));
    }

    #[test]
    fn enumeration_of_example1() {
        let (_, s) = example1_scenarios();
        assert_eq!(s.len(), 100);
        assert!(s.iter().all(|sc| (sc.prob - 0.01).abs() < 1e-15));
        let total: f64 = s.iter().map(|sc| sc.prob).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Lexicographic: second marginal varies fastest.
        assert_eq!(s[0].h, vec![310.0, 292.0]);
        assert_eq!(s[1].h, vec![310.0, 293.0]);
        assert_eq!(s[10].h, vec![311.0, 292.0]);
        assert_eq!(s[99].h, vec![319.0, 301.0]);
    }

    #[test]
    fn enumeration_singleton_and_product() {
        let (p, _) = builtin_newsvendor(1.0, 3.0, 0.5, vec![5.0]);
        let d = DistributionSpec {
            marginals: vec![Marginal::uniform(vec![5.0])],
            seed: 0,
        };
        let s = enumerate_scenarios(&p, &d, 10).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].prob, 1.0);

        let (p1, _) = builtin_example1();
        let d = DistributionSpec {
            marginals: vec![
                Marginal { values: vec![1.0, 2.0, 3.0], probs: vec![0.2, 0.3, 0.5] },
                Marginal::uniform(vec![1.0, 2.0, 3.0, 4.0]),
            ],
            seed: 0,
        };
        let s = enumerate_scenarios(&p1, &d, 100).unwrap();
        assert_eq!(s.len(), 12);
        assert!((s.iter().map(|x| x.prob).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_cap() {
        let (p, d) = builtin_example1();
        assert!(matches!(
            enumerate_scenarios(&p, &d, 99),
            Err(ModelError::CapExceeded { count: 100, cap: 99 })
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let (p, d) = builtin_example1();
        let a = sample_iid(&p, &d, 100, 7).unwrap();
        let b = sample_iid(&p, &d, 100, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_iid(&p, &d, 100, 8).unwrap();
        assert_ne!(a, c);
        let one = sample_iid(&p, &d, 1, 7).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].prob, 1.0);
        assert_eq!(sample_iid(&p, &d, 0, 7), Err(ModelError::EmptySample));
    }

    #[test]
    fn example1_polyhedron_rows() {
        let (p, s) = example1_scenarios();
        let sc = s.iter().find(|x| x.h == vec![319.0, 301.0]).unwrap();
        let poly = scenario_polyhedron(&p, sc, &RelaxationConfig::default()).unwrap();
        assert_eq!(poly.dim(), 4);
        assert_eq!(poly.n_first, 2);
        let expect = |row: [f64; 4], g: f64| {
            assert!(
                poly.rows.iter().zip(&poly.rhs).any(|(r, &h)| r.as_slice() == row && h == g),
                "missing row {row:?} <= {g}"
            )
        };
        expect([1.0, 1.0, 0.0, 0.0], 100.0);
        expect([-2.0, -6.0, -1.0, -0.0], -319.0);
        expect([-3.0, -3.0, -0.0, -1.0], -301.0);
        expect([1.0, 0.0, 0.0, 0.0], 100.0);
        expect([0.0, 1.0, 0.0, 0.0], 100.0);
        expect([0.0, 0.0, 1.0, 0.0], 319.0);
        expect([0.0, 0.0, 0.0, 1.0], 301.0);
        expect([0.0, 0.0, -1.0, 0.0], 0.0);
        assert!(poly.has_bound_rows());
        assert_eq!(poly.regularized_rows, 0);
    }

    #[test]
    fn equality_rows_are_split_and_relaxed() {
        let (p, d) = builtin_newsvendor(1.0, 3.0, 0.5, vec![10.0]);
        let s = enumerate_scenarios(&p, &d, 10).unwrap();
        let poly = scenario_polyhedron(&p, &s[0], &RelaxationConfig { epsilon: 0.01 }).unwrap();
        // x - y+ + y- <= 10 + 0.01 and -(x - y+ + y-) <= -10 + 0.01
        assert!(poly.rows.iter().zip(&poly.rhs).any(|(r, &g)| r == &vec![1.0, -1.0, 1.0] && g == 10.01));
        assert!(poly.rows.iter().zip(&poly.rhs).any(|(r, &g)| r == &vec![-1.0, 1.0, -1.0] && g == -10.0 + 0.01));
        assert_eq!(poly.regularized_rows, 1);
    }

    #[test]
    fn infeasible_scenario_polyhedron() {
        let (p, _) = builtin_example1();
        // y2 <= -1 forces 3x1 + 3x2 >= 401, beyond the capacity row.
        let mut tpl = p.template().clone();
        tpl.upper = vec![f64::INFINITY, -1.0];
        tpl.lower = vec![0.0, -5.0];
        let prog = build_problem(p.first_stage().clone(), tpl).unwrap();
        let sc = prog.realize(0, &[310.0, 400.0], 1.0).unwrap();
        assert_eq!(
            scenario_polyhedron(&prog, &sc, &RelaxationConfig::default()),
            Err(ModelError::InfeasiblePolyhedron)
        );
    }

    #[test]
    fn unboundable_variable() {
        let (p, _) = builtin_newsvendor(1.0, 3.0, 0.5, vec![10.0]);
        let mut tpl = p.template().clone();
        tpl.upper = vec![f64::INFINITY; 2];
        let prog = build_problem(p.first_stage().clone(), tpl).unwrap();
        let sc = prog.realize(0, &[10.0], 1.0).unwrap();
        assert!(matches!(
            scenario_polyhedron(&prog, &sc, &RelaxationConfig::default()),
            Err(ModelError::Unboundable(_))
        ));
    }

    #[test]
    fn sample_bounds_take_the_maximum() {
        let (p, s) = example1_scenarios();
        let q = p.with_sample_recourse_bounds(&s).unwrap();
        assert_eq!(q.template().upper, vec![319.0, 301.0]);
        let poly = scenario_polyhedron(&q, &s[0], &RelaxationConfig::default()).unwrap();
        assert!(poly.rows.iter().zip(&poly.rhs).any(|(r, &g)| r == &vec![0.0, 0.0, 1.0, 0.0] && g == 319.0));
    }
}
