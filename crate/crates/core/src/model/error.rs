use std::path::PathBuf;

use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unresolved reference: {0}")]
    Reference(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("unknown task `{task}` in domain `{domain}`")]
    UnknownTask { domain: String, task: String },
    #[error("unknown flow `{0}`")]
    UnknownFlow(String),
    #[error("graph error: {0}")]
    Graph(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("duplicate {category} `{name}`")]
    DuplicateName { category: String, name: String },
    #[error("{context}: {error}")]
    Expression { context: String, error: ExprError },
    #[error("{path}: {error}")]
    InFile { path: PathBuf, error: Box<ModelError> },
    #[error("{}", join(.0))]
    Multiple(Vec<ModelError>),
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn join(errors: &[ModelError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl ModelError {
    pub(crate) fn from_json(err: serde_json::Error) -> ModelError {
        use serde_json::error::Category;
        match err.classify() {
            Category::Syntax | Category::Eof | Category::Io => ModelError::Syntax {
                line: err.line(),
                column: err.column(),
                message: err.to_string(),
            },
            Category::Data => ModelError::Schema(err.to_string()),
        }
    }

    /// Leaf errors, with file annotations and aggregation flattened away.
    pub fn causes(&self) -> Vec<&ModelError> {
        match self {
            ModelError::Multiple(all) => all.iter().flat_map(ModelError::causes).collect(),
            ModelError::InFile { error, .. } => error.causes(),
            other => vec![other],
        }
    }

    pub fn any(&self, pred: impl Fn(&ModelError) -> bool) -> bool {
        self.causes().into_iter().any(pred)
    }

    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> ModelError {
        ModelError::InFile {
            path: path.into(),
            error: Box::new(self),
        }
    }
}

/// Accumulates every problem found in one document.
#[derive(Debug, Default)]
pub(crate) struct Diagnostics(Vec<ModelError>);

impl Diagnostics {
    pub fn push(&mut self, err: ModelError) {
        self.0.push(err);
    }

    pub fn finish<T>(mut self, value: T) -> Result<T, ModelError> {
        match self.0.len() {
            0 => Ok(value),
            1 => Err(self.0.remove(0)),
            _ => Err(ModelError::Multiple(self.0)),
        }
    }
}
