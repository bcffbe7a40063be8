use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{0}")]
    EmptyInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("scorer `{scorer}` failed: {message}")]
    Scorer { scorer: String, message: String },

    #[error("missing embedding for key(s): {}", .0.join(", "))]
    MissingEmbedding(Vec<String>),

    #[error("stage `{stage}` failed at {question_id}/{}: {source}", .option_label.as_deref().unwrap_or("-"))]
    Stage {
        stage: &'static str,
        question_id: String,
        option_label: Option<String>,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse failure class, mapped onto process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Scorer,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn scorer(scorer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scorer {
            scorer: scorer.into(),
            message: message.into(),
        }
    }

    /// Wraps `self` with the stage and (question, option) it failed on.
    pub fn in_stage(self, stage: &'static str, question_id: &str, option_label: Option<&str>) -> Self {
        Error::Stage {
            stage,
            question_id: question_id.to_string(),
            option_label: option_label.map(str::to_string),
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Scorer { .. } => ErrorKind::Scorer,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    /// 0 is success; 1 config, 2 data, 3 scorer/remote.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 1,
            ErrorKind::Data => 2,
            ErrorKind::Scorer => 3,
        }
    }
}
