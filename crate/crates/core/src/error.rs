use thiserror::Error;

/// Errors produced by the estimation, bound and harness layers.
#[derive(Debug, Error)]
pub enum DoaError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("unknown array preset `{0}` (expected nested, coprime, mra or ula)")]
    UnknownPreset(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("ill-conditioned system ({what}): condition number {cond:.3e}")]
    IllConditioned { what: &'static str, cond: f64 },

    #[error("{sources} sources cannot be resolved with a co-array segment of length {v} (need K <= v - 1)")]
    Identifiability { sources: usize, v: usize },

    #[error("degenerate scene: {0}")]
    DegenerateScene(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, DoaError>;
