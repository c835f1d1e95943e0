//! Server-side execution of flow instances.
//!
//! An instance runs step after step, following transitions, until a user
//! iteration is needed. At that point it emits an [`IterationRequest`],
//! becomes `WaitingForUser` and holds no execution resources until the
//! matching response arrives. Each step kind is executed by a
//! [`StepHandler`] looked up by name in a [`StepRegistry`].

mod coordinator;
mod exec;
mod instance;
mod models;
mod steps;

use thiserror::Error;

use crate::model::ModelError;
use crate::protocol::IterationRequest;
use crate::store::StoreError;

pub use coordinator::{Coordinator, InstanceSummary};
pub use exec::{
    advance, apply_response, build_iteration_request, cancel, create_instance, launch, restore, select_transition,
    snapshot, ExecContext,
};
pub use instance::{Direction, FlowInstance, InstanceState, LogEntry};
pub use models::Models;
pub use steps::{StepError, StepHandler, StepOutcome, StepRegistry};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FinalStatus {
    Finalized,
    Failed,
    Cancelled,
}

impl FinalStatus {
    pub fn state(&self) -> InstanceState {
        match self {
            FinalStatus::Finalized => InstanceState::Finalized,
            FinalStatus::Failed => InstanceState::Failed,
            FinalStatus::Cancelled => InstanceState::Cancelled,
        }
    }
}

/// What the client sees after launching or answering.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Request(IterationRequest),
    Final(FinalStatus),
}

impl Outcome {
    pub fn request(&self) -> Option<&IterationRequest> {
        match self {
            Outcome::Request(r) => Some(r),
            Outcome::Final(_) => None,
        }
    }

    pub fn state(&self) -> InstanceState {
        match self {
            Outcome::Request(_) => InstanceState::WaitingForUser,
            Outcome::Final(f) => f.state(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("unknown app `{0}`")]
    UnknownApp(String),
    #[error("unknown launcher `{0}`")]
    UnknownLauncher(String),
    #[error("unknown flow `{0}`")]
    UnknownFlow(String),
    #[error("unknown instance {0}")]
    UnknownInstance(u64),
    #[error("instance {0} is not running")]
    NotRunning(u64),
    #[error("instance {0} is not waiting for a response")]
    StaleInstance(u64),
    #[error("instance {0} has already terminated")]
    AlreadyTerminal(u64),
    #[error("response addressed to instance {found}, expected {expected}")]
    InstanceMismatch { expected: u64, found: u64 },
    #[error("response names unknown element `{0}`")]
    UnknownElement(String),
    #[error("response answers `{0}` more than once")]
    DuplicateElement(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("value `{value}` is not an allowed choice for `{element}`")]
    ConstraintViolation { element: String, value: String },
    #[error("response is missing element `{0}`")]
    MissingElement(String),
    #[error("instance {instance_id} failed: {reason}")]
    StepFailure { instance_id: u64, reason: String },
    #[error("invalid snapshot: {0}")]
    Schema(String),
    #[error("app `{app_id}` version {version} is not available")]
    ModelVersionMissing { app_id: String, version: u64 },
    #[error("version conflict: current version is {current}, submitted {submitted}")]
    VersionConflict { current: u64, submitted: u64 },
    #[error(transparent)]
    InvalidModel(#[from] ModelError),
    #[error(transparent)]
    Storage(#[from] StoreError),
}

impl EngineError {
    /// Errors that reject a response but leave the request outstanding.
    pub fn is_response_rejection(&self) -> bool {
        matches!(
            self,
            EngineError::InstanceMismatch { .. }
                | EngineError::UnknownElement(_)
                | EngineError::DuplicateElement(_)
                | EngineError::TypeMismatch(_)
                | EngineError::ConstraintViolation { .. }
                | EngineError::MissingElement(_)
        )
    }
}
