//! Definition documents, suite orchestration and reports for the
//! `lcs-verify` binary.

mod document;
mod run;

use thiserror::Error;

use crate::connection::ConnectionError;
use crate::expr::{EvalError, ParseError};
use crate::lcs::LcsError;
use crate::manifold::ManifoldError;
use crate::submanifold::SubmanifoldError;

pub use document::{
    load, Definition, DefinitionDocument, ImmersionBlock, Sampling, SamplingBlock, DEFAULT_POINTS, DEFAULT_SEED,
};
pub use run::{render, run, Format, GammaPerturbation, RunOptions, RunReport, SuiteGroup, TOOL_VERSION};

/// The built-in example document.
pub const PAPER_EXAMPLE_JSON: &str = include_str!("../../data/paper_example.json");

/// Problems with the input; they end a run with exit code 2.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("cannot read {0}")]
    Io(String),
    #[error("malformed document: {0}")]
    Json(String),
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("{field}: expected {expected} entries, found {found}")]
    Dimension { field: String, expected: usize, found: usize },
    #[error("{path}: interval [{lo}, {hi}] is empty or not finite")]
    Box { path: String, lo: f64, hi: f64 },
    #[error("metric[{i}][{j}] and metric[{j}][{i}] evaluate differently")]
    Asymmetric { i: usize, j: usize },
    #[error("sampling: {0}")]
    Sampling(String),
    #[error("the document has no immersion block")]
    NoImmersion,
    #[error("unknown format `{0}` (expected text or json)")]
    UnknownFormat(String),
    #[error("perturbation: {0}")]
    Perturbation(String),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Lcs(#[from] LcsError),
    #[error(transparent)]
    Submanifold(#[from] SubmanifoldError),
}

impl CliError {
    pub const EXIT_CODE: u8 = 2;
}
