use get_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GetError {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("block {0} has no atoms")]
    EmptyBlock(usize),

    #[error("graph has no blocks")]
    EmptyGraph,

    #[error("non-finite coordinate in block {block}, atom {atom}")]
    NonFiniteCoordinate { block: usize, atom: usize },

    #[error("empty interface: no block lies within {cutoff} Å of another molecule")]
    EmptyInterface { cutoff: f64 },

    #[error("need at least two molecule groups, found {0}")]
    TooFewMolecules(usize),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty structure")]
    EmptyStructure,

    #[error("schema: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("graph {graph} has {blocks} blocks, over the batch budget of {budget}")]
    BudgetExceeded {
        graph: usize,
        blocks: usize,
        budget: usize,
    },

    #[error("non-finite loss at epoch {epoch}, batch {batch} (parameter norms: {norms})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        norms: String,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = GetError> = std::result::Result<T, E>;
