use std::sync::Arc;

use flow_core::engine::EngineError;
use flow_core::protocol::{AppSummary, IterationResponse, Reply};
use flow_tui::{ClientError, Transport};

use crate::error::ApiError;
use crate::Server;

/// Lets the terminal client drive an in-process coordinator, with the same
/// error statuses the HTTP endpoints would produce.
pub struct LocalTransport(pub Arc<Server>);

fn rejected(e: EngineError) -> ClientError {
    let e = ApiError::from(e);
    ClientError::Rejected {
        status: e.status.as_u16(),
        error: e.kind.to_string(),
        detail: e.detail,
    }
}

impl Transport for LocalTransport {
    fn app(&self, app_id: &str) -> Result<AppSummary, ClientError> {
        let models = self.0.coordinator().models();
        let app = models
            .app(app_id)
            .ok_or_else(|| rejected(EngineError::UnknownApp(app_id.to_string())))?;
        Ok(AppSummary::from(app))
    }

    fn launch(&self, app_id: &str, launcher_id: &str) -> Result<Reply, ClientError> {
        let (id, outcome) = self.0.coordinator().launch(app_id, launcher_id).map_err(rejected)?;
        Ok(Reply::from_outcome(Some(id), outcome))
    }

    fn respond(&self, response: &IterationResponse) -> Result<Reply, ClientError> {
        let outcome = self
            .0
            .coordinator()
            .respond(response, response.instance_id)
            .map_err(rejected)?;
        Ok(Reply::from_outcome(None, outcome))
    }
}
