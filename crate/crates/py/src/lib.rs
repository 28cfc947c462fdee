//! Python bindings: `import scenred`.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use scenred::clustering::{self, Anchor, GridConfig};
use scenred::coordinates::{self, CoordinateConfig, KappaMode};
use scenred::distribute::run_parallel_coordinates;
use scenred::io::{self, Instance};
use scenred::linsolve::MilpOptions;
use scenred::model::{enumerate_scenarios, sample_iid, Scenario, ENUMERATION_CAP};
use scenred::saa;

create_exception!(scenred, ScenredError, PyException);

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    ScenredError::new_err(e.to_string())
}

/// A two-stage program together with a scenario sample.
#[pyclass(module = "scenred", frozen)]
struct Problem {
    instance: Instance,
    scenarios: Vec<Scenario>,
}

#[pymethods]
impl Problem {
    /// One of `example1`, `newsvendor`, `synthetic750`, without scenarios.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        Ok(Problem {
            instance: io::builtin(name).map_err(err)?,
            scenarios: Vec::new(),
        })
    }

    /// Parse a problem file; an embedded scenario list is kept.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let mut instance = io::parse_instance(text).map_err(err)?;
        let scenarios = instance.scenarios.take().unwrap_or_default();
        Ok(Problem { instance, scenarios })
    }

    #[pyo3(signature = (cap = ENUMERATION_CAP))]
    fn enumerate(&self, cap: usize) -> PyResult<Self> {
        let dist = self.distribution()?;
        let scenarios = enumerate_scenarios(&self.instance.program, dist, cap).map_err(err)?;
        Ok(self.with(scenarios))
    }

    #[pyo3(signature = (count, seed = 0))]
    fn sample(&self, count: usize, seed: u64) -> PyResult<Self> {
        let dist = self.distribution()?;
        let scenarios = sample_iid(&self.instance.program, dist, count, seed).map_err(err)?;
        Ok(self.with(scenarios))
    }

    fn to_json(&self) -> String {
        let mut inst = self.instance.clone();
        inst.scenarios = Some(self.scenarios.clone());
        io::to_json(&inst.to_file())
    }

    #[getter]
    fn n(&self) -> usize {
        self.instance.program.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.instance.program.m()
    }

    fn __len__(&self) -> usize {
        self.scenarios.len()
    }

    /// Scenario probabilities in sample order.
    fn probabilities(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.prob).collect()
    }

    fn __repr__(&self) -> String {
        format!("Problem(n={}, m={}, scenarios={})", self.n(), self.m(), self.scenarios.len())
    }
}

impl Problem {
    fn distribution(&self) -> PyResult<&scenred::model::DistributionSpec> {
        self.instance
            .distribution
            .as_ref()
            .ok_or_else(|| ScenredError::new_err("problem has no distribution"))
    }

    fn with(&self, scenarios: Vec<Scenario>) -> Self {
        Problem {
            instance: self.instance.clone(),
            scenarios,
        }
    }

    fn sample_or_err(&self) -> PyResult<&[Scenario]> {
        if self.scenarios.is_empty() {
            return Err(ScenredError::new_err("problem has no scenarios; call enumerate() or sample() first"));
        }
        Ok(&self.scenarios)
    }
}

#[pyclass(module = "scenred", frozen, get_all)]
struct Coordinate {
    k: usize,
    kappa: Option<f64>,
    sigma: Option<f64>,
    status: String,
}

#[pymethods]
impl Coordinate {
    fn __repr__(&self) -> String {
        format!("Coordinate(k={}, kappa={:?}, sigma={:?}, status={:?})", self.k, self.kappa, self.sigma, self.status)
    }
}

impl From<&coordinates::Coordinate> for Coordinate {
    fn from(c: &coordinates::Coordinate) -> Self {
        Coordinate {
            k: c.k,
            kappa: c.kappa,
            sigma: c.sigma,
            status: c.status.as_str().to_string(),
        }
    }
}

impl TryFrom<&Coordinate> for coordinates::Coordinate {
    type Error = PyErr;

    fn try_from(c: &Coordinate) -> PyResult<Self> {
        Ok(coordinates::Coordinate {
            k: c.k,
            kappa: c.kappa,
            sigma: c.sigma,
            status: c.status.parse().map_err(PyValueError::new_err)?,
        })
    }
}

/// `(kappa, sigma)` for every scenario of `problem`.
#[pyfunction]
#[pyo3(signature = (problem, epsilon = scenred::model::DEFAULT_EPSILON, kappa_mode = "lp", threads = 1))]
fn compute_coordinates(py: Python<'_>, problem: &Problem, epsilon: f64, kappa_mode: &str, threads: usize) -> PyResult<Vec<Coordinate>> {
    let kappa_mode = match kappa_mode {
        "lp" => KappaMode::Lp,
        "milp" => KappaMode::Milp,
        other => return Err(PyValueError::new_err(format!("kappa_mode must be 'lp' or 'milp', got {other:?}"))),
    };
    let cfg = CoordinateConfig {
        epsilon,
        kappa_mode,
        ..CoordinateConfig::default()
    };
    let scen = problem.sample_or_err()?;
    let program = &problem.instance.program;
    let coords = py.detach(|| run_parallel_coordinates(program, scen, &cfg, threads)).map_err(err)?;
    Ok(coords.iter().map(Coordinate::from).collect())
}

#[pyfunction]
fn coordinates_csv(coords: Vec<PyRef<'_, Coordinate>>) -> PyResult<String> {
    let list = coords
        .iter()
        .map(|c| coordinates::Coordinate::try_from(&**c))
        .collect::<PyResult<Vec<_>>>()?;
    Ok(coordinates::to_csv(&list))
}

#[pyclass(module = "scenred", frozen)]
struct Clustering {
    inner: clustering::ClusterResult,
}

#[pymethods]
impl Clustering {
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn representatives(&self) -> Vec<usize> {
        self.inner.representatives()
    }

    /// Scenarios replaced by a representative.
    #[getter]
    fn k_delta(&self) -> usize {
        self.inner.k_delta
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn beta_prime(&self) -> f64 {
        self.inner.beta_prime
    }

    /// Member lists, one per cell.
    fn cells(&self) -> Vec<Vec<usize>> {
        self.inner.cells.iter().map(|c| c.members.clone()).collect()
    }

    fn to_json(&self) -> String {
        io::to_json(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Clustering(delta={}, representatives={}, beta_prime={})",
            self.inner.delta,
            self.inner.representatives().len(),
            self.inner.beta_prime
        )
    }
}

#[pyfunction]
#[pyo3(signature = (problem, coords, delta, anchor = "min-corner"))]
fn cluster(problem: &Problem, coords: Vec<PyRef<'_, Coordinate>>, delta: f64, anchor: &str) -> PyResult<Clustering> {
    let scen = problem.sample_or_err()?;
    if coords.len() != scen.len() {
        return Err(PyValueError::new_err(format!("{} coordinates for {} scenarios", coords.len(), scen.len())));
    }
    let list = coords
        .iter()
        .map(|c| coordinates::Coordinate::try_from(&**c))
        .collect::<PyResult<Vec<_>>>()?;
    let anchor = match anchor {
        "min-corner" => Anchor::MinCorner,
        "origin" => Anchor::Origin,
        other => return Err(PyValueError::new_err(format!("unknown anchor {other:?}"))),
    };
    let cfg = GridConfig {
        anchor,
        ..GridConfig::new(delta)
    };
    let probs: Vec<f64> = scen.iter().map(|s| s.prob).collect();
    let inner = clustering::grid_cluster(&list, &probs, &cfg).map_err(err)?;
    Ok(Clustering { inner })
}

#[pyclass(module = "scenred", frozen, get_all)]
struct SolveReport {
    nu: f64,
    x_star: Vec<f64>,
    variables: usize,
    constraints: usize,
    nodes: usize,
    scenarios: Vec<usize>,
}

#[pymethods]
impl SolveReport {
    fn __repr__(&self) -> String {
        format!("SolveReport(nu={}, x_star={:?})", self.nu, self.x_star)
    }
}

/// Solve the extensive form over the full sample, or over the
/// representatives of `clustering` when given.
#[pyfunction]
#[pyo3(signature = (problem, clustering = None))]
fn solve(py: Python<'_>, problem: &Problem, clustering: Option<&Clustering>) -> PyResult<SolveReport> {
    let scen = problem.sample_or_err()?;
    let sample = match clustering {
        Some(c) => clustering::select_representatives(&c.inner, scen).map_err(err)?,
        None => scen.to_vec(),
    };
    let program = &problem.instance.program;
    let r = py
        .detach(|| saa::solve_saa(program, &sample, &MilpOptions::default()))
        .map_err(err)?;
    Ok(SolveReport {
        nu: r.nu,
        x_star: r.x_star,
        variables: r.variables,
        constraints: r.constraints,
        nodes: r.nodes,
        scenarios: r.scenarios,
    })
}

#[pymodule]
#[pyo3(name = "scenred")]
fn scenred_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ScenredError", m.py().get_type::<ScenredError>())?;
    m.add("BUILTINS", io::BUILTINS.to_vec())?;
    m.add_class::<Problem>()?;
    m.add_class::<Coordinate>()?;
    m.add_class::<Clustering>()?;
    m.add_class::<SolveReport>()?;
    m.add_function(wrap_pyfunction!(compute_coordinates, m)?)?;
    m.add_function(wrap_pyfunction!(coordinates_csv, m)?)?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    Ok(())
}
