//! Scenario front end for the mlsatnet laboratory.
//!
//! A scenario is a single TOML file describing a stack of constellation
//! layers, a time grid, a deployment algorithm with its parameters, and
//! optionally a ground-traffic replay. Running one produces a directory
//! of plot-ready CSV series, a metrics JSON, and a manifest from which
//! the run can be reproduced bit for bit: every output is a pure
//! function of the config file and the seed.

use thiserror::Error;

use mlsatnet::aplmodel::AplError;
use mlsatnet::constellation::ConstellationError;
use mlsatnet::evaluation::EvalError;
use mlsatnet::linkmodel::LinkError;
use mlsatnet::optimizer::OptimizerError;
use mlsatnet::topology::TopologyError;
use mlsatnet::traffic::TrafficError;

pub mod config;
pub mod run;
pub mod svg;

pub use config::Scenario;
pub use run::{compare, run_scenario, Algorithm, CompareRow, RunOutput};

#[derive(Debug, Error)]
pub enum CliError {
    /// A structurally valid config with an out-of-domain value; `field`
    /// is the dotted path of the offending key.
    #[error("config field {field}: {msg}")]
    Config { field: String, msg: String },
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown algorithm {0:?}; expected tpilcd, otlc, greedy, random, max-time-weight or exact")]
    UnknownAlgorithm(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Apl(#[from] AplError),
    #[error(transparent)]
    Constellation(#[from] ConstellationError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit status: 2 for configuration problems the user can
    /// fix in the file or on the command line, 1 for runtime failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. }
            | CliError::Read { .. }
            | CliError::Parse(_)
            | CliError::UnknownAlgorithm(_) => 2,
            _ => 1,
        }
    }
}
