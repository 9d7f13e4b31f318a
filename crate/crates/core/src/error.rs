use thiserror::Error;

/// Errors raised by the planning engine. Each variant maps to a stable
/// machine-readable code via [`Error::code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("route is empty")]
    EmptyRoute,
    #[error("coverage tensor is empty (volume 0)")]
    EmptyCoverage,
    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),
    #[error("coordinate ({x}, {y}) lies outside the grid")]
    OutOfBounds { x: u32, y: u32 },
    #[error("bad segment [{from}, {to}] for route of length {len}")]
    BadSegment { from: usize, to: usize, len: usize },
    #[error("invalid annealing schedule: {0}")]
    BadSaSchedule(String),
    #[error("state space of {states} exceeds cap {cap}")]
    InstanceTooLarge { states: usize, cap: usize },
    #[error("no candidates supplied")]
    NoCandidates,
    #[error("endpoint unavailable: {0}")]
    EndpointUnavailable(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("degenerate config: {0}")]
    DegenerateConfig(String),
    #[error("duplicate cell ({x}, {y}) at line {line}")]
    DuplicateCell { x: u32, y: u32, line: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyRoute => "empty_route",
            Error::EmptyCoverage => "empty_coverage",
            Error::InfeasibleSchedule(_) => "infeasible_schedule",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::BadSegment { .. } => "bad_segment",
            Error::BadSaSchedule(_) => "bad_sa_schedule",
            Error::InstanceTooLarge { .. } => "instance_too_large",
            Error::NoCandidates => "no_candidates",
            Error::EndpointUnavailable(_) => "endpoint_unavailable",
            Error::MalformedResponse(_) => "malformed_response",
            Error::ContractViolation(_) => "contract_violation",
            Error::DegenerateConfig(_) => "degenerate_config",
            Error::DuplicateCell { .. } => "duplicate_cell",
            Error::Parse { .. } => "parse_error",
            Error::Invalid(_) => "invalid_input",
            Error::UnknownMethod(_) => "unknown_method",
            Error::Io(_) => "io_error",
            Error::Json(_) => "json_error",
            Error::Csv(_) => "csv_error",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
