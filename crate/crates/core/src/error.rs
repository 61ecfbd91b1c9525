use std::fmt;

use thiserror::Error;

/// Stage of the reconstruction pipeline, used to tag pipeline failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Solve,
    Classify,
    Compensate,
    Profile,
    SensorCenterline,
    Transfer,
    ArcLength,
    CurvatureTransfer,
    CdmCenterline,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Solve => "solve",
            Stage::Classify => "classify",
            Stage::Compensate => "compensate",
            Stage::Profile => "profile",
            Stage::SensorCenterline => "sensor-centerline",
            Stage::Transfer => "transfer",
            Stage::ArcLength => "arc-length",
            Stage::CurvatureTransfer => "curvature-transfer",
            Stage::CdmCenterline => "cdm-centerline",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invariant violated for `{field}`: {reason}")]
    Invariant { field: String, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("fiber strain limit exceeded at node N{fiber}{aa}: |strain| = {strain:.5} > {limit}")]
    StrainLimit {
        fiber: usize,
        aa: usize,
        strain: f64,
        limit: f64,
    },

    #[error("ambiguous deflection signal: fiber shifts agree in sign on every decisive active area")]
    AmbiguousSignal,

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("least squares did not converge within {iterations} iterations")]
    Divergence { iterations: usize },

    #[error("singular jacobian: {0}")]
    SingularJacobian(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("pipeline stage `{stage}` failed: {source}")]
    Pipeline {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invariant(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invariant {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Io(_) => 2,
            Error::Invariant { .. } | Error::Precondition(_) | Error::InsufficientData(_) => 4,
            Error::Pipeline { .. }
            | Error::NonFinite(_)
            | Error::StrainLimit { .. }
            | Error::AmbiguousSignal
            | Error::Geometry(_)
            | Error::Divergence { .. }
            | Error::SingularJacobian(_) => 3,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|e| Error::Pipeline {
            stage,
            source: Box::new(e),
        })
    }
}
