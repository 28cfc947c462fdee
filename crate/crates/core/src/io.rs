//! JSON problem files.
//!
//! ```json
//! {
//!   "first_stage": {"c": [..], "A": [[..]], "b": [..], "integer": [..], "lb": [..], "ub": [.., null]},
//!   "second_stage": {
//!     "W": [[..]], "senses": [">=", ..], "integer": [..], "lb": [..], "ub": [..],
//!     "map": {"q": {"base": [..]}, "T": {"base": [..]}, "h": {"base": [..], "xi": [[..]]}},
//!     "distribution": {"marginals": [{"values": [..], "probs": [..]}], "seed": 0}
//!   },
//!   "scenarios": [{"q": [..], "T": [[..]], "h": [..], "prob": 0.5}]
//! }
//! ```
//!
//! `null` in `lb`/`ub` is an infinite bound. Scenario indices default to
//! their position in the list.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    build_problem, builtin_example1, builtin_newsvendor, builtin_synthetic750, DistributionSpec, FirstStage,
    ModelError, Scenario, ScenarioTemplate, StochasticProgram,
};

pub const BUILTINS: &[&str] = &["example1", "newsvendor", "synthetic750"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON at line {line}, column {column} (byte {offset}): {msg}")]
    Format {
        line: usize,
        column: usize,
        offset: usize,
        msg: String,
    },
    #[error("unknown builtin {0:?} (available: example1, newsvendor, synthetic750)")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondStage {
    #[serde(flatten)]
    pub template: ScenarioTemplate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub first_stage: FirstStage,
    pub second_stage: SecondStage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<Vec<Scenario>>,
}

/// A validated program with whatever scenario information came with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub program: StochasticProgram,
    pub distribution: Option<DistributionSpec>,
    pub scenarios: Option<Vec<Scenario>>,
}

impl Instance {
    pub fn to_file(&self) -> ProblemFile {
        ProblemFile {
            first_stage: self.program.first_stage().clone(),
            second_stage: SecondStage {
                template: self.program.template().clone(),
                distribution: self.distribution.clone(),
            },
            scenarios: self.scenarios.clone(),
        }
    }
}

pub fn builtin(name: &str) -> Result<Instance, IoError> {
    let (program, dist) = match name {
        "example1" => builtin_example1(),
        "newsvendor" => builtin_newsvendor(1.0, 3.0, 0.5, (10..=20).map(f64::from).collect()),
        "synthetic750" => builtin_synthetic750(),
        other => return Err(IoError::UnknownBuiltin(other.to_string())),
    };
    Ok(Instance {
        program,
        distribution: Some(dist),
        scenarios: None,
    })
}

fn format_error(text: &str, e: serde_json::Error) -> IoError {
    let (line, column) = (e.line(), e.column());
    let offset = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + column.saturating_sub(1);
    IoError::Format {
        line,
        column,
        offset,
        msg: e.to_string(),
    }
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, IoError> {
    serde_json::from_str(text).map_err(|e| format_error(text, e))
}

pub fn parse_instance(text: &str) -> Result<Instance, IoError> {
    let file: ProblemFile = parse_json(text)?;
    let program = build_problem(file.first_stage, file.second_stage.template)?;
    let scenarios = match file.scenarios {
        Some(mut list) => {
            for (i, s) in list.iter_mut().enumerate() {
                s.k = i;
                program.check_scenario(s)?;
            }
            Some(list)
        }
        None => None,
    };
    Ok(Instance {
        program,
        distribution: file.second_stage.distribution,
        scenarios,
    })
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_instance(path: &Path) -> Result<Instance, IoError> {
    parse_instance(&read_text(path)?)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })
}
