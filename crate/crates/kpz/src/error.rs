use kpz_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("schema violation at `{path}`: {msg}")]
    Schema { path: String, msg: String },
    #[error("invalid instance: {0}")]
    Instance(CoreError),
    #[error(transparent)]
    Numerics(CoreError),
    #[error("{0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for bad input, 3 for non-convergence, 4 for an exceeded budget, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } | CliError::Instance(_) | CliError::Usage(_) => 2,
            CliError::Numerics(e) => match e {
                CoreError::Budget(_) => 4,
                CoreError::NonConvergence(_) | CoreError::NonFinite(_) | CoreError::Pole(_) => 3,
                _ => 2,
            },
            _ => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Numerics(e)
    }
}
