use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Config(String),

    #[error("duplicate row for key (unit={unit}, indicator={indicator}, year={year})")]
    DuplicateKey { unit: String, indicator: String, year: i32 },
    #[error("indicator `{0}` is present in the data but absent from the hierarchy")]
    UnknownIndicator(String),
    #[error("invalid hierarchy: {0}")]
    Hierarchy(String),
    #[error("population weights sum {sum} ≠ 1 for year {year}")]
    PopulationSum { year: i32, sum: f64 },
    #[error("invalid population weights: {0}")]
    Population(String),
    #[error("years are not contiguous: {0:?}")]
    NonContiguousYears(Vec<i32>),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("unrecoverable gap: indicator `{indicator}` has no donor values in region `{region}`")]
    UnrecoverableGap { indicator: String, region: String },
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("moments undefined: series has zero variance")]
    UndefinedMoments,
    #[error("no feasible transform for the series")]
    NoFeasibleTransform,
    #[error("degenerate indicator `{0}`: zero spread")]
    Degenerate(String),
    #[error("factor analysis did not converge for subdomain `{0}`")]
    FaConvergence(String),
    #[error("singular regression: {0}")]
    Singular(String),
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::DuplicateKey { .. }
            | Error::UnknownIndicator(_)
            | Error::Hierarchy(_)
            | Error::PopulationSum { .. }
            | Error::Population(_)
            | Error::NonContiguousYears(_)
            | Error::Data(_)
            | Error::UnrecoverableGap { .. }
            | Error::Precondition(_) => ErrorKind::Data,
            Error::UndefinedMoments
            | Error::NoFeasibleTransform
            | Error::Degenerate(_)
            | Error::FaConvergence(_)
            | Error::Singular(_)
            | Error::Numeric(_) => ErrorKind::Numeric,
            Error::Stage { source, .. } => source.kind(),
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
