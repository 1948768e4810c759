use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Stage of [`run_pipeline`](crate::anonymizer::run_pipeline) that produced an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineStep {
    Classify,
    Deidentify,
    Generalize,
    Directives,
    Enforce,
    LDiversity,
    Utility,
}

impl fmt::Display for PipelineStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PipelineStep::Classify => "classify",
            PipelineStep::Deidentify => "deidentify",
            PipelineStep::Generalize => "generalize",
            PipelineStep::Directives => "directives",
            PipelineStep::Enforce => "enforce",
            PipelineStep::LDiversity => "l-diversity",
            PipelineStep::Utility => "utility",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema must contain at least one attribute")]
    EmptySchema,
    #[error("attribute name must be non-empty")]
    EmptyAttributeName,
    #[error("row {0} does not have one cell per attribute")]
    ArityMismatch(usize),
    #[error("duplicate attribute `{0}`")]
    DuplicateAttribute(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("attribute `{0}` has no category")]
    UnclassifiedAttribute(String),
    #[error("retained attribute `{0}` is not classified as PII")]
    RetainNotPii(String),

    #[error("malformed hierarchy: {0}")]
    MalformedSpec(String),
    #[error("value `{0}` is not covered by the hierarchy ground level")]
    UncoveredGroundValue(String),
    #[error("level {level} out of range for hierarchy of height {height}")]
    LevelOutOfRange { level: usize, height: usize },
    #[error("value `{value}` unknown to hierarchy{}", row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    UnknownValue { value: String, row: Option<usize> },
    #[error("hierarchy for `{hierarchy}` bound to attribute `{attribute}`")]
    HierarchyMismatch { hierarchy: String, attribute: String },

    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("no sensitive attribute to measure")]
    NoSensitiveAttribute,
    #[error("sensitive attribute `{0}` is also part of the quasi-identifier")]
    SensitiveInQid(String),
    #[error("published schema is not compatible with the original: `{0}`")]
    IncompatibleSchema(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("row {0} out of range")]
    RowOutOfRange(usize),
    #[error("{violators} rows violate {k}-anonymity but the budget allows only {allowed}")]
    InfeasibleWithinBudget {
        k: usize,
        violators: usize,
        allowed: usize,
    },
    #[error("achieved l-diversity {achieved} is below the required {required}")]
    LDiversityUnmet { required: usize, achieved: usize },

    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("row at line {0} has the wrong number of fields")]
    RaggedRow(u64),
    #[error("CSV error: {0}")]
    Csv(String),
    #[error("policy parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("unknown hierarchy reference `{0}`")]
    UnknownHierarchyRef(String),

    #[error("{step} step failed: {source}")]
    Pipeline { step: PipelineStep, source: Box<Error> },
}

impl Error {
    /// Unwraps any pipeline-step annotation.
    pub fn root(&self) -> &Error {
        match self {
            Error::Pipeline { source, .. } => source.root(),
            other => other,
        }
    }

    /// True when the input was valid but the privacy target could not be met.
    pub fn is_privacy_unachievable(&self) -> bool {
        matches!(
            self.root(),
            Error::InfeasibleWithinBudget { .. } | Error::LDiversityUnmet { .. }
        )
    }

    pub(crate) fn at(step: PipelineStep) -> impl FnOnce(Error) -> Error {
        move |source| Error::Pipeline {
            step,
            source: Box::new(source),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
