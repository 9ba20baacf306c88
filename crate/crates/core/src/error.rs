use std::path::PathBuf;

use thiserror::Error;

use crate::autodiff::Shape;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs} vs {rhs}")]
    Dimension { op: &'static str, lhs: Shape, rhs: Shape },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("field {field}: id {id} outside vocabulary of size {vocab}")]
    OutOfVocabulary { field: usize, id: u64, vocab: usize },

    #[error("sharing plan: {0}")]
    Plan(String),

    #[error("data: {0}")]
    Data(String),

    #[error("{}", config_message(.path, .line, .message))]
    Config {
        path: Option<PathBuf>,
        line: Option<usize>,
        message: String,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

fn config_message(path: &Option<PathBuf>, line: &Option<usize>, message: &str) -> String {
    let mut out = String::from("config");
    if let Some(p) = path {
        out.push(' ');
        out.push_str(&p.display().to_string());
    }
    if let Some(l) = line {
        out.push_str(&format!(" line {l}"));
    }
    out.push_str(": ");
    out.push_str(message);
    out
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn config(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Config {
            path: None,
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
