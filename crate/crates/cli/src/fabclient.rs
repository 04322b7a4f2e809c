//! Talking to a fabrication server, remote over HTTP or in-process.

use std::sync::Arc;

use deskcad_fab::server::SliceResponse;
use deskcad_fab::{FabError, FabService, PrintCommand, PrintJob, SliceProfile};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot reach the fabrication server: {0}")]
    Network(String),
    #[error("fabrication server answered {status}: {message}")]
    Rejected { status: u16, message: String, body: Value },
}

impl ClientError {
    /// Job named by a rejection body, e.g. a slice that failed.
    pub fn job_id(&self) -> Option<&str> {
        match self {
            ClientError::Rejected { body, .. } => body.get("job_id").and_then(Value::as_str),
            ClientError::Network(_) => None,
        }
    }
}

impl From<FabError> for ClientError {
    fn from(e: FabError) -> Self {
        let mut body = json!({ "error": e.to_string() });
        if let FabError::SliceFailed { job_id, .. } = &e {
            body["job_id"] = json!(job_id);
        }
        ClientError::Rejected {
            status: e.status_code(),
            message: e.to_string(),
            body,
        }
    }
}

pub trait FabBackend: Send + Sync {
    fn slice(&self, stl: &[u8], profile: SliceProfile) -> Result<PrintJob, ClientError>;
    fn print(&self, id: &str, printer: &str) -> Result<PrintJob, ClientError>;
    fn status(&self, id: &str) -> Result<PrintJob, ClientError>;
    fn command(&self, id: &str, command: PrintCommand) -> Result<PrintJob, ClientError>;
    /// Where the backend lives, for messages.
    fn describe(&self) -> String;
}

impl FabBackend for Arc<FabService> {
    fn slice(&self, stl: &[u8], profile: SliceProfile) -> Result<PrintJob, ClientError> {
        Ok(FabService::slice(self, stl, profile)?)
    }

    fn print(&self, id: &str, printer: &str) -> Result<PrintJob, ClientError> {
        Ok(FabService::print(self, id, printer)?)
    }

    fn status(&self, id: &str) -> Result<PrintJob, ClientError> {
        Ok(FabService::status(self, id)?)
    }

    fn command(&self, id: &str, command: PrintCommand) -> Result<PrintJob, ClientError> {
        Ok(FabService::control(self, id, command)?)
    }

    fn describe(&self) -> String {
        "in-process server".into()
    }
}

/// Blocking HTTP client for the fabrication endpoints.
pub struct FabClient {
    base: String,
    agent: ureq::Agent,
}

impl FabClient {
    /// `address` is `host:port` or a full `http://` URL.
    pub fn new(address: &str) -> FabClient {
        let address = address.trim().trim_end_matches('/');
        let base = if address.contains("://") {
            address.to_string()
        } else {
            format!("http://{address}")
        };
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(std::time::Duration::from_secs(120)))
            .build()
            .into();
        FabClient { base, agent }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn decode<T: serde::de::DeserializeOwned>(
        resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<T, ClientError> {
        let mut resp = resp.map_err(|e| ClientError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Network(e.to_string()))?;
        if !(200..300).contains(&status) {
            let body: Value = serde_json::from_str(&text).unwrap_or(Value::String(text.clone()));
            let message = body.get("error").and_then(Value::as_str).unwrap_or(&text).to_string();
            return Err(ClientError::Rejected { status, message, body });
        }
        serde_json::from_str(&text).map_err(|e| ClientError::Network(format!("unexpected response: {e}")))
    }
}

impl FabBackend for FabClient {
    fn slice(&self, stl: &[u8], profile: SliceProfile) -> Result<PrintJob, ClientError> {
        let resp = self
            .agent
            .post(format!("{}/slice", self.base))
            .query("layer_height", profile.layer_height.to_string())
            .query("infill_percent", profile.infill_percent.to_string())
            .query("supports", profile.supports.to_string())
            .header("content-type", "application/octet-stream")
            .send(stl);
        let sliced: SliceResponse = Self::decode(resp)?;
        self.status(&sliced.job_id)
    }

    fn print(&self, id: &str, printer: &str) -> Result<PrintJob, ClientError> {
        let body = json!({ "id": id, "printer_address": printer }).to_string();
        Self::decode(
            self.agent
                .post(format!("{}/print", self.base))
                .header("content-type", "application/json")
                .send(body.as_bytes()),
        )
    }

    fn status(&self, id: &str) -> Result<PrintJob, ClientError> {
        Self::decode(self.agent.get(format!("{}/print", self.base)).query("id", id).call())
    }

    fn command(&self, id: &str, command: PrintCommand) -> Result<PrintJob, ClientError> {
        let body = json!({ "id": id, "command": command }).to_string();
        Self::decode(
            self.agent
                .put(format!("{}/print", self.base))
                .header("content-type", "application/json")
                .send(body.as_bytes()),
        )
    }

    fn describe(&self) -> String {
        self.base.clone()
    }
}
