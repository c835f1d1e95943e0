use std::time::Duration;

use flow_core::protocol::{AppSummary, IterationResponse, Reply};
use serde_json::Value as Json;

use crate::ClientError;

/// How a session reaches a coordinator.
pub trait Transport {
    fn app(&self, app_id: &str) -> Result<AppSummary, ClientError>;
    fn launch(&self, app_id: &str, launcher_id: &str) -> Result<Reply, ClientError>;
    fn respond(&self, response: &IterationResponse) -> Result<Reply, ClientError>;
}

pub struct HttpTransport {
    base: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(server_url: &str) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build();
        HttpTransport {
            base: server_url.trim_end_matches('/').to_string(),
            agent: ureq::Agent::new_with_config(config),
        }
    }

    fn finish<T: serde::de::DeserializeOwned>(
        &self,
        sent: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<T, ClientError> {
        let mut response = sent.map_err(|e| ClientError::Network(e.to_string()))?;
        let status = response.status().as_u16();
        let body: Json = response
            .body_mut()
            .read_json()
            .map_err(|e| ClientError::Network(e.to_string()))?;
        if !(200..300).contains(&status) {
            let field = |k: &str| body[k].as_str().unwrap_or_default().to_string();
            return Err(ClientError::Rejected {
                status,
                error: field("error"),
                detail: field("detail"),
            });
        }
        serde_json::from_value(body).map_err(|e| ClientError::Schema(e.to_string()))
    }
}

impl Transport for HttpTransport {
    fn app(&self, app_id: &str) -> Result<AppSummary, ClientError> {
        self.finish(self.agent.get(format!("{}/apps/{app_id}", self.base)).call())
    }

    fn launch(&self, app_id: &str, launcher_id: &str) -> Result<Reply, ClientError> {
        let url = format!("{}/apps/{app_id}/launchers/{launcher_id}/launch", self.base);
        self.finish(self.agent.post(url).send_empty())
    }

    fn respond(&self, response: &IterationResponse) -> Result<Reply, ClientError> {
        let url = format!("{}/instances/{}/response", self.base, response.instance_id);
        self.finish(
            self.agent
                .post(url)
                .header("content-type", "application/json")
                .send(response.to_wire()),
        )
    }
}
