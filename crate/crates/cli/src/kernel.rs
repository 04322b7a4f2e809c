//! The kernel service: one design session behind a lock, with every change
//! pushed to subscribers as a full scene snapshot.
//!
//! HTTP routes, mounted under `/api` by [`router`]:
//!
//! - `GET /scene` current snapshot
//! - `GET /events` server-sent `snapshot` events, starting with the current one
//! - `POST /command` one JSON command, see [`deskcad_core::script::Command`]
//! - `POST /script` design-script text
//! - `GET /document`, `PUT /document` the saved document
//! - `GET /export?ids=1,2&ascii=true&plate=true` STL download
//! - `POST /print` slice the printer plate and start printing it

use std::convert::Infallible;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use deskcad_core::csg::Solidity;
use deskcad_core::fabrication::{
    check_build_volume, export_plate_stl, export_stl, print_ready, PrinterTwin, StlFormat, Violation,
};
use deskcad_core::manipulation::{manipulation_box, ManipulationBox};
use deskcad_core::scene::{
    load_document, save_document, Counters, Limits, ObjectId, RenderHint, SceneDocument, SelectionMode,
    WorkspaceGrid,
};
use deskcad_core::script::{Command, DesignScript, Outcome, ScriptError, Session};
use deskcad_core::Error;
use deskcad_fab::{JobState, SliceProfile};
use futures_util::{stream, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast;

use crate::fabclient::{ClientError, FabBackend, FabClient};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshView {
    pub positions: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectView {
    pub id: ObjectId,
    pub solidity: Solidity,
    pub color: [u8; 3],
    pub render_hint: RenderHint,
    /// A copy resting on the printer plate.
    pub placed: bool,
    pub blocks: usize,
    pub bounds: [[f64; 3]; 2],
    /// World-space triangles, ready to draw.
    pub mesh: MeshView,
}

/// Everything a client needs to draw the scene without doing geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub revision: u64,
    pub grid: Option<WorkspaceGrid>,
    pub selection_mode: SelectionMode,
    pub selection: Vec<ObjectId>,
    pub manipulation: Option<ManipulationBox>,
    pub can_undo: bool,
    pub can_redo: bool,
    pub drag_active: bool,
    pub counters: Counters,
    pub limits: Limits,
    pub printer: Option<PrinterTwin>,
    pub violations: Vec<Violation>,
    pub objects: Vec<ObjectView>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommandReply {
    pub revision: u64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrintStarted {
    pub job_id: String,
    #[serde(flatten)]
    pub state: JobState,
    pub progress: f64,
    pub total_layers: u32,
    pub printer_address: Option<String>,
    pub server: String,
}

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error(transparent)]
    Scene(#[from] Error),
    #[error("{0}")]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Fab(#[from] ClientError),
    #[error("{0}")]
    Request(String),
}

/// HTTP status for a kernel error.
pub fn error_status(e: &Error) -> u16 {
    match e {
        Error::Parameter(_) | Error::Parse { .. } => 400,
        Error::NotFound(_) => 404,
        Error::State(_) | Error::Boundary(_) | Error::Placement(_) => 409,
        Error::Validity(_) | Error::Robustness { .. } | Error::Semantic(_) | Error::EmptyResult | Error::Capacity { .. } => {
            422
        }
    }
}

/// Stable machine-readable name of an error.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Parameter(_) => "parameter",
        Error::Validity(_) => "validity",
        Error::Robustness { .. } => "robustness",
        Error::Semantic(_) => "semantic",
        Error::EmptyResult => "empty-result",
        Error::Capacity { .. } => "capacity",
        Error::NotFound(_) => "not-found",
        Error::State(_) => "state",
        Error::Boundary(_) => "boundary",
        Error::Parse { .. } => "parse",
        Error::Placement(_) => "placement",
    }
}

impl IntoResponse for KernelError {
    fn into_response(self) -> Response {
        let (status, body) = match &self {
            KernelError::Scene(e) => (error_status(e), json!({ "error": e.to_string(), "kind": error_kind(e) })),
            KernelError::Script(e) => (
                error_status(&e.error),
                json!({ "error": e.to_string(), "kind": error_kind(&e.error), "line": e.line }),
            ),
            KernelError::Fab(ClientError::Network(m)) => (502, json!({ "error": m, "kind": "network" })),
            KernelError::Fab(ClientError::Rejected { status, message, body }) => (
                *status,
                json!({ "error": message, "kind": "fabrication", "server": body }),
            ),
            KernelError::Request(m) => (400, json!({ "error": m, "kind": "request" })),
        };
        let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(body)).into_response()
    }
}

struct Inner {
    session: Session,
    revision: u64,
}

type Published = Arc<(u64, String)>;

pub struct Kernel {
    inner: Mutex<Inner>,
    events: broadcast::Sender<Published>,
    local_fab: Option<Arc<dyn FabBackend>>,
}

pub fn snapshot_of(session: &Session, revision: u64) -> Snapshot {
    let scene = &session.scene;
    let objects = scene
        .objects()
        .map(|o| {
            let b = o.bounds();
            ObjectView {
                id: o.id,
                solidity: o.solidity,
                color: o.color,
                render_hint: o.render_hint(),
                placed: scene.is_placed_in_printer(o.id),
                blocks: o.block_count(),
                bounds: [b.min.into(), b.max.into()],
                mesh: MeshView {
                    positions: o.baked.vertices.iter().map(|p| [p.x, p.y, p.z]).collect(),
                    triangles: o.baked.triangles.clone(),
                },
            }
        })
        .collect();
    Snapshot {
        revision,
        grid: scene.grid().cloned(),
        selection_mode: scene.selection_mode(),
        selection: scene.selected_ids(),
        manipulation: manipulation_box(scene).ok(),
        can_undo: scene.history().can_undo(),
        can_redo: scene.history().can_redo(),
        drag_active: session.drag_active(),
        counters: scene.counters(),
        limits: *scene.limits(),
        printer: scene.printer().cloned(),
        violations: check_build_volume(scene).map(|r| r.violations).unwrap_or_default(),
        objects,
    }
}

impl Kernel {
    /// `local_fab` serves prints when the printer twin names no server.
    pub fn new(session: Session, local_fab: Option<Arc<dyn FabBackend>>) -> Kernel {
        let (events, _) = broadcast::channel(64);
        Kernel {
            inner: Mutex::new(Inner { session, revision: 0 }),
            events,
            local_fab,
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn publish(&self, inner: &Inner) {
        if self.events.receiver_count() == 0 {
            return;
        }
        let snap = snapshot_of(&inner.session, inner.revision);
        let text = serde_json::to_string(&snap).unwrap_or_else(|e| unreachable!("snapshot serializes: {e}"));
        let _ = self.events.send(Arc::new((inner.revision, text)));
    }

    pub fn revision(&self) -> u64 {
        self.lock().revision
    }

    pub fn snapshot(&self) -> Snapshot {
        let g = self.lock();
        snapshot_of(&g.session, g.revision)
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Published> {
        self.events.subscribe()
    }

    /// Run one command. Mutations bump the revision and notify subscribers.
    pub fn execute(&self, cmd: &Command) -> Result<CommandReply, Error> {
        let mut g = self.lock();
        let outcome = g.session.execute(cmd)?;
        if cmd.mutates() {
            g.revision += 1;
            self.publish(&g);
        }
        Ok(CommandReply {
            revision: g.revision,
            outcome,
        })
    }

    /// Run a script line by line, stopping at the first failure. Lines
    /// before it stay applied.
    pub fn run_script(&self, text: &str) -> Result<u64, ScriptError> {
        let script = DesignScript::parse(text)?;
        let mut g = self.lock();
        let start = g.revision;
        let mut result = Ok(());
        for line in &script.lines {
            if let Err(error) = g.session.execute(&line.command) {
                result = Err(ScriptError { line: line.line, error });
                break;
            }
            if line.command.mutates() {
                g.revision += 1;
            }
        }
        if g.revision != start {
            self.publish(&g);
        }
        result.map(|()| g.revision)
    }

    pub fn with_scene<T>(&self, f: impl FnOnce(&SceneDocument) -> T) -> T {
        f(&self.lock().session.scene)
    }

    pub fn document(&self) -> Vec<u8> {
        save_document(&self.lock().session.scene)
    }

    /// Replace the whole document; history starts empty.
    pub fn load(&self, bytes: &[u8]) -> Result<u64, Error> {
        let doc = load_document(bytes)?;
        let mut g = self.lock();
        if g.session.drag_active() {
            return Err(Error::State("a drag is in progress".into()));
        }
        let presets = g.session.presets.clone();
        g.session = Session::with_presets(doc, presets);
        g.revision += 1;
        self.publish(&g);
        Ok(g.revision)
    }

    /// STL of `ids` (all objects off the plate when empty), or of the plate.
    pub fn export(&self, ids: &[ObjectId], format: StlFormat, plate: bool) -> Result<Vec<u8>, Error> {
        let g = self.lock();
        let scene = &g.session.scene;
        if plate {
            return export_plate_stl(scene, format);
        }
        let ids: Vec<ObjectId> = if ids.is_empty() {
            scene.object_ids().into_iter().filter(|&id| !scene.is_placed_in_printer(id)).collect()
        } else {
            ids.to_vec()
        };
        export_stl(scene, &ids, format)
    }

    /// Slice the printer plate and, when the twin names a printer, print it.
    /// Nothing is sent while the plate is empty or a part is out of bounds.
    pub fn start_print(&self, profile: SliceProfile) -> Result<PrintStarted, KernelError> {
        let (stl, server, printer) = {
            let g = self.lock();
            let scene = &g.session.scene;
            print_ready(scene)?;
            let twin = scene.printer().ok_or_else(|| Error::State("no printer twin".into()))?;
            (
                export_plate_stl(scene, StlFormat::Binary)?,
                twin.server_address.clone(),
                twin.printer_address.clone(),
            )
        };
        let remote;
        let backend: &dyn FabBackend = match &server {
            Some(addr) => {
                remote = FabClient::new(addr);
                &remote
            }
            None => self
                .local_fab
                .as_deref()
                .ok_or_else(|| Error::State("no fabrication server address set".into()))?,
        };
        let mut job = backend.slice(&stl, profile)?;
        if let Some(p) = &printer {
            job = backend.print(&job.id, p)?;
        }
        Ok(PrintStarted {
            job_id: job.id,
            state: job.state,
            progress: job.progress,
            total_layers: job.total_layers,
            printer_address: job.printer_address,
            server: backend.describe(),
        })
    }

    /// Snapshot events: the current state, then every later change.
    pub fn events(self: &Arc<Kernel>) -> impl Stream<Item = (u64, String)> + Send + 'static {
        let rx = self.subscribe();
        let (first_rev, first) = {
            let g = self.lock();
            let snap = snapshot_of(&g.session, g.revision);
            (g.revision, serde_json::to_string(&snap).unwrap_or_default())
        };
        let later = stream::unfold(rx, |mut rx| async move {
            loop {
                match rx.recv().await {
                    Ok(p) => return Some((p, rx)),
                    // Every event is a full snapshot, so skipping is safe.
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => return None,
                }
            }
        })
        .filter_map(move |p| async move { (p.0 > first_rev).then(|| (p.0, p.1.clone())) });
        stream::once(async move { (first_rev, first) }).chain(later)
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, KernelError> + Send + 'static,
) -> Result<T, KernelError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| KernelError::Request(format!("worker failed: {e}")))?
}

async fn scene(State(k): State<Arc<Kernel>>) -> Json<Snapshot> {
    Json(k.snapshot())
}

async fn command(
    State(k): State<Arc<Kernel>>,
    cmd: Result<Json<Command>, JsonRejection>,
) -> Result<Json<CommandReply>, KernelError> {
    let Json(cmd) = cmd.map_err(|e| KernelError::Request(e.body_text()))?;
    Ok(Json(blocking(move || Ok(k.execute(&cmd)?)).await?))
}

async fn script(State(k): State<Arc<Kernel>>, body: String) -> Result<Json<serde_json::Value>, KernelError> {
    let revision = blocking(move || Ok(k.run_script(&body)?)).await?;
    Ok(Json(json!({ "revision": revision })))
}

async fn get_document(State(k): State<Arc<Kernel>>) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/json")], k.document())
}

async fn put_document(State(k): State<Arc<Kernel>>, body: Bytes) -> Result<Json<serde_json::Value>, KernelError> {
    let revision = blocking(move || Ok(k.load(&body)?)).await?;
    Ok(Json(json!({ "revision": revision })))
}

#[derive(Debug, Default, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    ids: Option<String>,
    #[serde(default)]
    ascii: bool,
    #[serde(default)]
    plate: bool,
}

async fn export(
    State(k): State<Arc<Kernel>>,
    q: Result<Query<ExportQuery>, QueryRejection>,
) -> Result<Response, KernelError> {
    let Query(q) = q.map_err(|e| KernelError::Request(e.body_text()))?;
    let ids = q
        .ids
        .as_deref()
        .unwrap_or("")
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<ObjectId>()
                .map_err(|_| KernelError::Request(format!("bad object id `{s}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let format = if q.ascii { StlFormat::Ascii } else { StlFormat::Binary };
    let bytes = blocking(move || Ok(k.export(&ids, format, q.plate)?)).await?;
    Ok(([(header::CONTENT_TYPE, "model/stl")], bytes).into_response())
}

async fn print(
    State(k): State<Arc<Kernel>>,
    profile: Option<Json<SliceProfile>>,
) -> Result<Json<PrintStarted>, KernelError> {
    let profile = profile.map(|Json(p)| p).unwrap_or_default();
    Ok(Json(blocking(move || k.start_print(profile)).await?))
}

async fn events(State(k): State<Arc<Kernel>>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let stream = k
        .events()
        .map(|(rev, data)| Ok(Event::default().event("snapshot").id(rev.to_string()).data(data)));
    Sse::new(stream).keep_alive(KeepAlive::default())
}

/// Kernel routes, without a prefix.
pub fn router(kernel: Arc<Kernel>) -> Router {
    Router::new()
        .route("/scene", get(scene))
        .route("/events", get(events))
        .route("/command", post(command))
        .route("/script", post(script))
        .route("/document", get(get_document).put(put_document))
        .route("/export", get(export))
        .route("/print", post(print))
        .with_state(kernel)
}
