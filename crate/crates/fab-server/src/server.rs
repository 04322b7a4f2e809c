//! HTTP front end.
//!
//! - `POST /slice?layer_height=&infill_percent=&supports=` with a binary or
//!   ASCII STL body
//! - `POST /print` with `{"id", "printer_address"}`
//! - `GET /print?id=`
//! - `PUT /print` with `{"id", "command": "continue"|"pause"|"stop"}`

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::clock::{Clock, SystemClock};
use crate::job::{JobState, PrintJob};
use crate::printer::PrinterNetwork;
use crate::profile::SliceProfile;
use crate::service::{FabService, PrintCommand};
use crate::slicer::{ExternalSlicer, MockSlicer, Slicer};
use crate::storage::Storage;
use crate::FabError;

pub const MAX_UPLOAD_BYTES: usize = 256 * 1024 * 1024;
const SHUTDOWN_GRACE: Duration = Duration::from_secs(2);

impl IntoResponse for FabError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status_code()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut body = json!({ "error": self.to_string() });
        if let FabError::SliceFailed { job_id, reason } = &self {
            body["job_id"] = json!(job_id);
            body["state"] = json!("failed");
            body["reason"] = json!(reason);
        }
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SliceResponse {
    pub job_id: String,
    #[serde(flatten)]
    pub state: JobState,
    pub total_layers: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrintRequest {
    pub id: String,
    pub printer_address: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobQuery {
    pub id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlRequest {
    pub id: String,
    pub command: PrintCommand,
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, FabError> + Send + 'static,
) -> Result<T, FabError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| FabError::Internal(e.to_string()))?
}

async fn slice(
    State(svc): State<Arc<FabService>>,
    profile: Result<Query<SliceProfile>, QueryRejection>,
    body: Bytes,
) -> Result<Json<SliceResponse>, FabError> {
    let Query(profile) = profile.map_err(|e| FabError::BadRequest(e.body_text()))?;
    let job = blocking(move || svc.slice(&body, profile)).await?;
    Ok(Json(SliceResponse {
        job_id: job.id,
        state: job.state,
        total_layers: job.total_layers,
    }))
}

async fn start_print(
    State(svc): State<Arc<FabService>>,
    req: Result<Json<PrintRequest>, JsonRejection>,
) -> Result<Json<PrintJob>, FabError> {
    let Json(req) = req.map_err(|e| FabError::BadRequest(e.body_text()))?;
    Ok(Json(blocking(move || svc.print(&req.id, &req.printer_address)).await?))
}

async fn print_status(
    State(svc): State<Arc<FabService>>,
    q: Result<Query<JobQuery>, QueryRejection>,
) -> Result<Json<PrintJob>, FabError> {
    let Query(q) = q.map_err(|e| FabError::BadRequest(e.body_text()))?;
    Ok(Json(blocking(move || svc.status(&q.id)).await?))
}

async fn control_print(
    State(svc): State<Arc<FabService>>,
    req: Result<Json<ControlRequest>, JsonRejection>,
) -> Result<Json<PrintJob>, FabError> {
    let Json(req) = req.map_err(|e| FabError::BadRequest(e.body_text()))?;
    Ok(Json(blocking(move || svc.control(&req.id, req.command)).await?))
}

/// The fabrication routes, ready to serve or to merge into a larger app.
pub fn router(service: Arc<FabService>) -> Router {
    Router::new()
        .route("/slice", post(slice))
        .route("/print", get(print_status).post(start_print).put(control_print))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(service)
}

/// Calls [`FabService::tick`] every `every` until the task is dropped.
pub async fn run_ticker(service: Arc<FabService>, every: Duration) {
    let mut interval = tokio::time::interval(every);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        interval.tick().await;
        let svc = service.clone();
        if tokio::task::spawn_blocking(move || svc.tick()).await.is_err() {
            tracing::error!("printer tick panicked");
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SlicerChoice {
    Mock,
    External,
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    pub storage_dir: PathBuf,
    pub slicer: SlicerChoice,
    pub slicer_cmd: Option<String>,
    pub token_ttl_secs: u64,
    /// Printer polling period; `None` leaves ticking to the caller.
    pub tick: Option<Duration>,
    pub layers_per_tick: u32,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            storage_dir: PathBuf::from("fab-storage"),
            slicer: SlicerChoice::Mock,
            slicer_cmd: None,
            token_ttl_secs: crate::DEFAULT_TOKEN_TTL_SECS,
            tick: Some(Duration::from_millis(500)),
            layers_per_tick: 1,
        }
    }
}

impl ServerConfig {
    pub fn make_slicer(&self) -> Result<Box<dyn Slicer>, FabError> {
        Ok(match self.slicer {
            SlicerChoice::Mock => Box::new(MockSlicer),
            SlicerChoice::External => Box::new(ExternalSlicer {
                command: self
                    .slicer_cmd
                    .clone()
                    .filter(|c| !c.trim().is_empty())
                    .ok_or_else(|| FabError::BadRequest("the external slicer needs a command".into()))?,
            }),
        })
    }

    pub fn build_service(
        &self,
        network: Arc<dyn PrinterNetwork>,
        clock: Option<Arc<dyn Clock>>,
    ) -> Result<FabService, FabError> {
        Ok(FabService::new(
            Storage::open(&self.storage_dir)?,
            self.make_slicer()?,
            network,
            clock.unwrap_or_else(|| Arc::new(SystemClock)),
            self.token_ttl_secs,
        ))
    }
}

/// A server running on its own thread. Dropping the handle stops it.
pub struct ServerHandle {
    pub addr: SocketAddr,
    pub service: Arc<FabService>,
    shutdown: Option<tokio::sync::watch::Sender<bool>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(true);
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown_now();
    }
}

/// Serve `app` on `host:port` from a background thread; port 0 picks a
/// free port. `service` is ticked every `tick` when given.
pub fn spawn(
    app: Router,
    service: Arc<FabService>,
    host: &str,
    port: u16,
    tick: Option<Duration>,
) -> std::io::Result<ServerHandle> {
    let listener = std::net::TcpListener::bind((host, port))?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let (tx, rx) = tokio::sync::watch::channel(false);
    let ticked = service.clone();
    let thread = std::thread::Builder::new().name("fab-server".into()).spawn(move || {
        let rt = match tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build() {
            Ok(rt) => rt,
            Err(e) => {
                tracing::error!("cannot start runtime: {e}");
                return;
            }
        };
        rt.block_on(async move {
            let listener = match tokio::net::TcpListener::from_std(listener) {
                Ok(l) => l,
                Err(e) => {
                    tracing::error!("cannot listen: {e}");
                    return;
                }
            };
            let ticker = tick.map(|every| tokio::spawn(run_ticker(ticked, every)));
            let stopping = |rx: tokio::sync::watch::Receiver<bool>| async move {
                let mut rx = rx;
                let _ = rx.wait_for(|stop| *stop).await;
            };
            let served = axum::serve(listener, app).with_graceful_shutdown(stopping(rx.clone()));
            // Long-lived streams would hold a graceful shutdown open forever.
            let deadline = async {
                stopping(rx).await;
                tokio::time::sleep(SHUTDOWN_GRACE).await;
            };
            tokio::select! {
                served = served => {
                    if let Err(e) = served {
                        tracing::error!("server stopped: {e}");
                    }
                }
                () = deadline => {}
            }
            if let Some(t) = ticker {
                t.abort();
            }
        });
    })?;
    Ok(ServerHandle {
        addr,
        service,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
