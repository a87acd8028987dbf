use std::fmt;

/// Pipeline stage that produced an error, attached when errors cross module boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Planar,
    Arc,
    Rough,
    Obstacle,
    Forward,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Planar => "planar",
            Stage::Arc => "arc stage",
            Stage::Rough => "rough stage",
            Stage::Obstacle => "obstacle",
            Stage::Forward => "forward",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular evaluation: {0}")]
    Singularity(String),
    #[error("quadrature did not reach tolerance {tol:e} (estimate {achieved:e})")]
    Accuracy { achieved: f64, tol: f64 },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("linear solver error: {0}")]
    Solver(String),
    #[error("{stage}: {source}")]
    InStage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(self, stage: Stage) -> Error {
        match self {
            e @ Error::InStage { .. } => e,
            e => Error::InStage { stage, source: Box::new(e) },
        }
    }

    /// Innermost error with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::InStage { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for configuration and geometry problems, false for numerical failures.
    pub fn is_config(&self) -> bool {
        matches!(self.root(), Error::Config(_) | Error::Geometry(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
