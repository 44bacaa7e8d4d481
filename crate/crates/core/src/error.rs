use thiserror::Error;

/// Error type covering scene validation, meshing, assembly, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid geometric configuration (interface, obstacle, strip, source
    /// or receiver placement).
    #[error("geometry: {0}")]
    Geometry(String),

    /// Wavenumber pair outside the supported regimes, or an obstacle
    /// boundary condition that the theory does not cover for that regime.
    #[error("regime: {0}")]
    Regime(String),

    /// Mesh generation failed or the mesh cannot resolve a feature.
    #[error("mesh: {0}")]
    Mesh(String),

    /// Invalid source description (position, patch radius, resolution).
    #[error("source: {0}")]
    Source(String),

    /// Linear-algebra failure (singular factorization, size mismatch).
    #[error("solver: {0}")]
    Solver(String),

    /// Request outside an operation's domain of validity
    /// (e.g. downward continuation into the strip).
    #[error("evaluation: {0}")]
    Evaluation(String),

    /// Special-function argument outside the supported domain.
    #[error("special function: {0}")]
    Special(String),

    /// Malformed configuration file.
    #[error("config: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }
    pub fn regime(msg: impl Into<String>) -> Self {
        Error::Regime(msg.into())
    }
    pub fn mesh(msg: impl Into<String>) -> Self {
        Error::Mesh(msg.into())
    }
    pub fn source(msg: impl Into<String>) -> Self {
        Error::Source(msg.into())
    }
    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
    pub fn evaluation(msg: impl Into<String>) -> Self {
        Error::Evaluation(msg.into())
    }
    pub fn special(msg: impl Into<String>) -> Self {
        Error::Special(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
