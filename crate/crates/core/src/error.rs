use thiserror::Error;

/// Errors produced anywhere in the simulation and estimation chain.
#[derive(Debug, Error)]
pub enum IsarError {
    #[error("invalid Golay parameters: {0}")]
    Golay(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no target detected: no correlation lag exceeds the threshold {threshold:.3e}")]
    NoTargetDetected { threshold: f64 },

    #[error("symbol matrix is rank deficient: delays {first} and {second} collide")]
    RankDeficient { first: usize, second: usize },

    #[error("geometry violates small-angle/receding assumption for scatterer {index}")]
    NegativeRadicand { index: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("malformed frame file: {0}")]
    Format(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<IsarError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl IsarError {
    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        IsarError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &IsarError {
        match self {
            IsarError::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, IsarError>;
