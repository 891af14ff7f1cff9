//! Certification of ambient isotopy between nearby embedded polygonal
//! knots, links and knotted graphs, with explicit sampled isotopies and
//! independent topological cross-checks.

pub mod certify;
pub mod cli_io;
pub mod fixtures;
pub mod geo;
pub mod graph_core;
pub mod invariants;
pub mod isotopy;
pub mod metrics;
pub mod refine;

pub use geo::{Direction, Point, Vec3};
pub use graph_core::{ArcId, EmbeddedGraph, PolylineArc, VertexId};

use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum Error {
    #[error("invalid arc: {0}")]
    InvalidArc(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid correspondence: {0}")]
    InvalidCorrespondence(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("graph is not embedded: {0}")]
    NotEmbedded(String),
    #[error("neighborhood construction failed: {0}")]
    Neighborhood(String),
    #[error("isotopy construction failed: {0}")]
    Isotopy(String),
    #[error("no generic projection found after {0} retries")]
    ProjectionRetriesExhausted(usize),
    #[error("diagram is not generic: {0}")]
    NonGenericDiagram(String),
    #[error("theta-graph construction failed: {0}")]
    Theta(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
