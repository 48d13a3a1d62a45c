use std::path::PathBuf;

use crate::autodiff::AutodiffError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: negative weight {weight}")]
    NegativeWeight {
        path: PathBuf,
        line: usize,
        weight: f64,
    },

    #[error("graph has no edges with positive weight")]
    EmptyGraph,

    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    #[error("no features")]
    NoFeatures,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("soft assignment is not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("visit rates in closed form require an undirected graph")]
    DirectedGraph,

    #[error("graph has {components} weakly connected components")]
    Disconnected { components: usize },

    #[error("exhaustive search limited to {max} nodes, graph has {n}")]
    TooLarge { n: usize, max: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("failed to generate a connected graph after {0} attempts")]
    GenerationFailed(usize),

    #[error(transparent)]
    Autodiff(#[from] AutodiffError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
