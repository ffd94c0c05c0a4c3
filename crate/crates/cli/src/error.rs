//! Error classification for exit codes: 1 validation, 2 ingest, 3 I/O.

use std::fmt;

use daypop::census::CensusError;
use daypop::clip::ClipError;
use daypop::density::GeoidMismatch;
use daypop::emit::EmitError;
use daypop::flows::AggregateError;
use daypop::lodes::IngestError;
use daypop::stats::StatsError;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments, caught before ingestion.
    Validation(anyhow::Error),
    /// An input file failed to parse or violated a data invariant.
    Ingest(anyhow::Error),
    /// Fetching or writing files failed.
    Io(anyhow::Error),
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError::Validation(anyhow::anyhow!(message.into()))
    }

    pub fn ingest(message: impl Into<String>) -> Self {
        CliError::Ingest(anyhow::anyhow!(message.into()))
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError::Io(anyhow::anyhow!(message.into()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Ingest(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    /// Add pipeline-stage context to the underlying error.
    pub fn context(self, stage: &'static str) -> Self {
        match self {
            CliError::Validation(e) => CliError::Validation(e.context(stage)),
            CliError::Ingest(e) => CliError::Ingest(e.context(stage)),
            CliError::Io(e) => CliError::Io(e.context(stage)),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(e) => write!(f, "validation error: {e:#}"),
            CliError::Ingest(e) => write!(f, "ingest error: {e:#}"),
            CliError::Io(e) => write!(f, "i/o error: {e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CensusError> for CliError {
    fn from(e: CensusError) -> Self {
        CliError::Ingest(e.into())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Ingest(e.into())
    }
}

impl From<AggregateError> for CliError {
    fn from(e: AggregateError) -> Self {
        CliError::Ingest(e.into())
    }
}

impl From<GeoidMismatch> for CliError {
    fn from(e: GeoidMismatch) -> Self {
        CliError::Ingest(e.into())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Ingest(e.into())
    }
}

impl From<ClipError> for CliError {
    fn from(e: ClipError) -> Self {
        CliError::Ingest(e.into())
    }
}

impl From<EmitError> for CliError {
    fn from(e: EmitError) -> Self {
        CliError::Io(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.into())
    }
}
