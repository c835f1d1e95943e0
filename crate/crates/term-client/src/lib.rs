//! Generic terminal client. Turns iteration requests into text prompts and
//! posts the answers back; it knows nothing about the flows behind them.

mod render;
mod session;
mod transport;

use thiserror::Error;

pub use render::{parse_input, render_request, Prompt, RenderedRequest};
pub use session::Session;
pub use transport::{HttpTransport, Transport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClientError {
    #[error("malformed request: {0}")]
    Schema(String),
    #[error("`{value}` is not one of the allowed choices for {element}")]
    LocalConstraintViolation { element: String, value: String },
    #[error("cannot read `{input}` as {expected}")]
    Parse { input: String, expected: String },
    #[error("a value is required")]
    Required,
    #[error("server answered {status}: {error}: {detail}")]
    Rejected { status: u16, error: String, detail: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("input ended before the session finished")]
    InputExhausted,
    #[error("no launcher `{0}`")]
    UnknownLauncher(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// `std::io::Error` is neither `Clone` nor `PartialEq`; keep its text.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct IoError(pub String);

impl From<std::io::Error> for ClientError {
    fn from(e: std::io::Error) -> Self {
        ClientError::Io(IoError(e.to_string()))
    }
}
