use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::expr::Env;
use crate::protocol::IterationRequest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceState {
    Running,
    WaitingForUser,
    Finalized,
    Failed,
    Cancelled,
}

impl InstanceState {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            InstanceState::Finalized | InstanceState::Failed | InstanceState::Cancelled
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            InstanceState::Running => "Running",
            InstanceState::WaitingForUser => "WaitingForUser",
            InstanceState::Finalized => "Finalized",
            InstanceState::Failed => "Failed",
            InstanceState::Cancelled => "Cancelled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    EngineToClient,
    ClientToEngine,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    pub direction: Direction,
    pub payload: serde_json::Value,
}

/// One cloud-side execution of a flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FlowInstance {
    pub instance_id: u64,
    pub app_id: String,
    pub launcher_id: String,
    pub flow_name: String,
    /// App version in force at launch; later updates never affect this instance.
    pub model_version: u64,
    pub state: InstanceState,
    pub current_step: String,
    pub pending_action_index: usize,
    pub env: Env,
    /// The unanswered request, present iff `state` is `WaitingForUser`.
    pub pending_request: Option<IterationRequest>,
    pub started_at: DateTime<Utc>,
    pub log: Vec<LogEntry>,
}

impl FlowInstance {
    pub(crate) fn push_log(&mut self, timestamp: DateTime<Utc>, direction: Direction, payload: serde_json::Value) {
        let seq = self.log.len() as u64;
        self.log.push(LogEntry {
            seq,
            timestamp,
            direction,
            payload,
        });
    }

    /// Internal events only, i.e. payloads like `{"event":"StepEntered",...}`.
    pub fn events(&self) -> impl Iterator<Item = &serde_json::Value> {
        self.log
            .iter()
            .filter(|e| e.direction == Direction::Internal)
            .map(|e| &e.payload)
    }

    /// Step ids in the order the instance entered them.
    pub fn visited_steps(&self) -> Vec<String> {
        self.events()
            .filter(|p| p["event"] == "StepEntered")
            .filter_map(|p| p["step"].as_str().map(str::to_owned))
            .collect()
    }
}
