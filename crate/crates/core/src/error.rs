//! Crate-level error with a stable category name per variant, used by the
//! command line as `error: <category>: <detail>`.

use std::path::PathBuf;

use thiserror::Error;

use crate::classify::ClassifyError;
use crate::metrics::MetricError;
use crate::naming::NamingError;
use crate::palette::PaletteError;
use crate::pipeline::PipelineError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: line {line}: {detail}", path.display())]
    Parse { path: PathBuf, line: usize, detail: String },
    #[error("record `{id}`: {detail}")]
    InvariantViolation { id: String, detail: String },
    #[error("{}: {detail}", path.display())]
    Image { path: PathBuf, detail: String },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Spec(String),
    #[error(transparent)]
    Naming(#[from] NamingError),
    #[error(transparent)]
    Palette(#[from] PaletteError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Machine-readable category, one word.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::InvariantViolation { .. } => "invariant",
            Error::Image { .. } => "image",
            Error::Usage(_) => "usage",
            Error::Spec(_) => "spec",
            Error::Naming(_) => "naming",
            Error::Palette(_) => "palette",
            Error::Classify(_) => "classify",
            Error::Pipeline(_) => "pipeline",
            Error::Metric(_) => "metric",
        }
    }

    /// `<category>: <detail>` on a single line.
    pub fn one_line(&self) -> String {
        let detail = self.to_string().replace(['\n', '\r'], " ");
        format!("{}: {detail}", self.category())
    }
}
