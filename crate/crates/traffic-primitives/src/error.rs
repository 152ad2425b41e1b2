use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-monotonic time at line {line}")]
    NonMonotonicTime { line: usize },

    #[error("non-uniform sampling at line {line}: dt {actual:.6} s vs expected {expected:.6} s")]
    NonUniformSampling {
        line: usize,
        expected: f64,
        actual: f64,
    },

    #[error("invalid encounter: {0}")]
    InvalidEncounter(String),

    #[error("already projected")]
    AlreadyProjected,

    #[error("encounter must be in the local metric frame")]
    NotProjected,

    #[error("degenerate primitive")]
    DegeneratePrimitive,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("state label {label} out of range (max {max})")]
    LabelOutOfRange { label: usize, max: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("feature matrices must be normalized first")]
    UnnormalizedFeatures,

    #[error("clustering error: {0}")]
    Cluster(String),

    #[error("instance too large for exhaustive search: n={n}, k={k}")]
    InstanceTooLarge { n: usize, k: usize },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("stage {stage} failed{}: {source}", encounter_id.as_deref().map(|id| format!(" on encounter {id}")).unwrap_or_default())]
    Pipeline {
        stage: &'static str,
        encounter_id: Option<String>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tag an error with the pipeline stage (and encounter) it occurred in.
    pub fn in_stage(self, stage: &'static str, encounter_id: Option<&str>) -> Self {
        Error::Pipeline {
            stage,
            encounter_id: encounter_id.map(str::to_owned),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
