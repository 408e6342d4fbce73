use std::path::PathBuf;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two fields or images that must share a shape do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Input that makes a statistic undefined (empty cold set, constant vector, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A DMOS value at or above the `100*Q` anchor cannot be inverted.
    #[error("DMOS {dmos} saturates the anchor {limit}; clamp before inverting")]
    Saturated { dmos: f64, limit: f64 },

    /// The least-squares design matrix is numerically singular.
    #[error("design matrix is rank-deficient (condition {condition:.3e})")]
    RankDeficient { condition: f64 },

    /// An iterative fit stopped without meeting its tolerance. Carries the
    /// best parameters found and the residual RMSE at that point.
    #[error("fit did not converge: best params {params:?}, residual rmse {residual_rmse:.6}")]
    Convergence { params: Vec<f64>, residual_rmse: f64 },

    /// Conversion-curve knots violate the required ordering.
    #[error("knot ordering violation: {0}")]
    KnotOrdering(String),

    /// A manifest row failed to parse; `line` is 1-based and counts the header.
    #[error("manifest parse error at line {line}: {message}")]
    ManifestParse { line: usize, message: String },

    /// One or more files referenced by a manifest do not exist.
    #[error("missing input files: {}", format_paths(.0))]
    MissingFiles(Vec<PathBuf>),

    /// Image decoding failed.
    #[error("image decode failed for {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, Error>;
