use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("load error at line {line}, column '{column}': {message}")]
    Load {
        line: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("resampling error: {0}")]
    Resample(String),

    #[error("spec parse error at position {position}: {message}")]
    SpecParse { position: usize, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at iteration {iteration}: loss {loss} on batch rows {batch:?}")]
    Diverged {
        iteration: usize,
        loss: f64,
        batch: Vec<usize>,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("relevance propagation error: {0}")]
    Relevance(String),

    #[error("explainer error: {0}")]
    Explainer(String),

    #[error("ranking error: {0}")]
    Ranking(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("missing artifact {}: run `{subcommand}` first", path.display())]
    MissingArtifact { path: PathBuf, subcommand: String },

    #[error("artifact mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Load { .. } => "load",
            Self::Schema(_) => "schema",
            Self::Split(_) => "split",
            Self::Resample(_) => "resample",
            Self::SpecParse { .. } => "spec_parse",
            Self::Shape(_) => "shape",
            Self::NonFinite(_) => "non_finite",
            Self::Config(_) => "config",
            Self::Diverged { .. } => "diverged",
            Self::Checkpoint(_) => "checkpoint",
            Self::Relevance(_) => "relevance",
            Self::Explainer(_) => "explainer",
            Self::Ranking(_) => "ranking",
            Self::Fold { source, .. } => source.kind(),
            Self::MissingArtifact { .. } => "missing_artifact",
            Self::Mismatch(_) => "mismatch",
            Self::Io(_) => "io",
            Self::Json(_) => "json",
            Self::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
