use std::fmt;

/// A single validation finding. Collected exhaustively so a bad config
/// surfaces every problem in one pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
    /// 1-based line in the originating config, when known.
    pub line: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    UnknownColumn,
    Underidentified,
    EndogenousWithoutIv,
    DuplicateLabel,
    InvalidSpec,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into(), line: None }
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {:?}: {}", self.kind, self.message),
            None => write!(f, "{:?}: {}", self.kind, self.message),
        }
    }
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("model is underidentified: {0}")]
    Underidentified(String),
    #[error("endogenous cause `{0}` declared but the estimator is not a 2SLS variant")]
    EndogenousWithoutIv(String),
    #[error("invalid model specification: {}", join_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix `{0}` is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("line search failed: implied covariance not positive definite along every trial step")]
    StepFailure,
    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),
    #[error("eigen-equation has no admissible real solution: {0}")]
    ComplexEigenvalue(String),
    #[error("singular Hessian")]
    SingularHessian,
    #[error("series `{name}` too short: {len} points, need at least {min}")]
    SeriesTooShort { name: String, len: usize, min: usize },
    #[error("series `{0}` is constant")]
    ConstantSeries(String),
    #[error("model has zero degrees of freedom")]
    ZeroDf,
    #[error("index construction needs at least two groups")]
    SingleGroup,
    #[error("only {converged} of {total} resamples converged")]
    TooFewConverged { converged: usize, total: usize },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
    #[error("non-numeric cell `{value}` at row {row}, column `{column}`")]
    NonNumericCell { row: usize, column: String, value: String },
    #[error("no rows left after dropping incomplete cases")]
    EmptyAfterFiltering,
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Diagnostics carried by a validation failure, or a singleton built from
    /// the error itself.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            Error::Invalid(d) => d.clone(),
            Error::UnknownColumn(c) => vec![Diagnostic::new(DiagnosticKind::UnknownColumn, c.clone())],
            Error::Underidentified(m) => vec![Diagnostic::new(DiagnosticKind::Underidentified, m.clone())],
            Error::EndogenousWithoutIv(c) => {
                vec![Diagnostic::new(DiagnosticKind::EndogenousWithoutIv, c.clone())]
            }
            other => vec![Diagnostic::new(DiagnosticKind::InvalidSpec, other.to_string())],
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
