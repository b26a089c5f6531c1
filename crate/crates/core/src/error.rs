use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    #[error("graph is cyclic (node `{0}` lies on a cycle)")]
    Cyclic(String),

    #[error("conditioning set {set:?} gives a singular covariance submatrix")]
    Singular { set: Vec<String> },

    #[error("column `{0}` has zero variance")]
    DegenerateColumn(String),

    #[error("degenerate direction: Var(beta'Z) = {0:e}")]
    DegenerateDirection(f64),

    #[error("gamma has zero norm; the objective is not differentiable there")]
    ZeroGamma,

    #[error("population covariance has no sampling distribution")]
    PopulationView,

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
