//! Job registry and the slice/print workflow, independent of HTTP.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use deskcad_core::fabrication::StlDocument;
use deskcad_core::validate_mesh;
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::job::{JobEvent, JobId, JobState, PrintJob, Transition};
use crate::printer::{sha256_hex, DeviceError, DeviceState, PrinterDevice, PrinterNetwork};
use crate::profile::SliceProfile;
use crate::slicer::Slicer;
use crate::storage::Storage;
use crate::token::TokenCache;
use crate::FabError;

/// Client commands for a running job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrintCommand {
    Continue,
    Pause,
    Stop,
}

impl PrintCommand {
    fn event(self) -> JobEvent {
        match self {
            PrintCommand::Continue => JobEvent::Continue,
            PrintCommand::Pause => JobEvent::Pause,
            PrintCommand::Stop => JobEvent::Stop,
        }
    }
}

pub struct FabService {
    storage: Storage,
    slicer: Box<dyn Slicer>,
    network: Arc<dyn PrinterNetwork>,
    clock: Arc<dyn Clock>,
    tokens: Mutex<TokenCache>,
    jobs: RwLock<HashMap<JobId, Arc<Mutex<PrintJob>>>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn device_error(e: DeviceError) -> FabError {
    FabError::Printer(e.to_string())
}

impl FabService {
    pub fn new(
        storage: Storage,
        slicer: Box<dyn Slicer>,
        network: Arc<dyn PrinterNetwork>,
        clock: Arc<dyn Clock>,
        token_ttl: u64,
    ) -> FabService {
        FabService {
            storage,
            slicer,
            network,
            clock,
            tokens: Mutex::new(TokenCache::new(token_ttl)),
            jobs: RwLock::new(HashMap::new()),
        }
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn slicer_name(&self) -> &str {
        self.slicer.name()
    }

    fn job(&self, id: &str) -> Result<Arc<Mutex<PrintJob>>, FabError> {
        self.jobs
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| FabError::NotFound(format!("no job `{id}`")))
    }

    pub fn job_ids(&self) -> Vec<JobId> {
        let mut ids: Vec<_> = self.jobs.read().unwrap_or_else(|p| p.into_inner()).keys().cloned().collect();
        ids.sort();
        ids
    }

    fn step(&self, job: &mut PrintJob, event: &JobEvent) -> Result<(), FabError> {
        match job.apply(event) {
            Transition::Moved(_) => {
                self.storage.save_state(job)?;
                Ok(())
            }
            Transition::Ignored => Ok(()),
            Transition::Illegal => Err(FabError::Conflict(format!(
                "cannot {event:?} a job that is {}",
                job.state.name()
            ))),
        }
    }

    /// Store the STL, slice it and keep both under a new job.
    pub fn slice(&self, stl: &[u8], profile: SliceProfile) -> Result<PrintJob, FabError> {
        profile.check()?;
        let doc = StlDocument::parse(stl).map_err(|e| FabError::BadRequest(format!("malformed STL: {e}")))?;
        if doc.triangles.is_empty() {
            return Err(FabError::BadRequest("the STL has no triangles".into()));
        }
        let report = validate_mesh(&doc.to_mesh());
        if !report.watertight {
            return Err(FabError::Unprocessable(format!("the model is not watertight: {report}")));
        }
        let id = uuid::Uuid::new_v4().simple().to_string();
        let mut job = PrintJob::new(id.clone(), profile, sha256_hex(stl));
        self.storage.save_stl(&id, stl)?;
        self.storage.save_state(&job)?;
        let shared = Arc::new(Mutex::new(job.clone()));
        self.jobs
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id.clone(), shared.clone());

        self.step(&mut job, &JobEvent::BeginSlice)?;
        let result = self
            .slicer
            .slice(&self.storage.stl_path(&id), &self.storage.gcode_path(&id), &profile)
            .and_then(|layers| Ok((layers, self.storage.read_gcode(&id)?)));
        let outcome = match result {
            Ok((layers, gcode)) => {
                job.total_layers = layers;
                job.gcode_sha256 = Some(sha256_hex(gcode.as_bytes()));
                self.step(&mut job, &JobEvent::SliceOk)?;
                Ok(job.clone())
            }
            Err(e) => {
                let reason = e.to_string();
                self.step(&mut job, &JobEvent::SliceFailed(reason.clone()))?;
                Err(FabError::SliceFailed { job_id: id, reason })
            }
        };
        *lock(&shared) = job;
        outcome
    }

    fn token_for(&self, device: &dyn PrinterDevice) -> Result<String, DeviceError> {
        let token = lock(&self.tokens).get_or_handshake(device.address(), self.clock.as_ref(), || device.handshake())?;
        Ok(token.value)
    }

    /// Run `op` with a cached token, renewing it once if the printer no
    /// longer accepts it.
    fn with_token(
        &self,
        device: &dyn PrinterDevice,
        op: impl Fn(&str) -> Result<(), DeviceError>,
    ) -> Result<(), DeviceError> {
        let token = self.token_for(device)?;
        match op(&token) {
            Err(DeviceError::Unauthorized) => {
                lock(&self.tokens).forget(device.address());
                op(&self.token_for(device)?)
            }
            other => other,
        }
    }

    /// Send a sliced job's G-code to the printer at `address`.
    pub fn print(&self, id: &str, address: &str) -> Result<PrintJob, FabError> {
        let shared = self.job(id)?;
        let mut job = lock(&shared);
        if job.state != JobState::Sliced {
            return Err(FabError::Conflict(format!("job {id} is {}, not sliced", job.state.name())));
        }
        if address.trim().is_empty() {
            return Err(FabError::BadRequest("printer address is empty".into()));
        }
        // Start the print, then settle how the printer took it.
        job.printer_address = Some(address.to_string());
        self.step(&mut job, &JobEvent::BeginPrint)?;
        let sent = self.network.connect(address).and_then(|device| {
            if matches!(device.status().state, DeviceState::Printing | DeviceState::Paused) {
                return Err(DeviceError::Busy);
            }
            let gcode = self
                .storage
                .read_gcode(id)
                .map_err(|e| DeviceError::Rejected(format!("G-code unavailable: {e}")))?;
            self.with_token(device.as_ref(), |t| device.start(t, &gcode))
        });
        if let Err(e) = sent {
            let reason = e.to_string();
            self.step(&mut job, &JobEvent::Fault(reason.clone()))?;
            return Err(FabError::Printer(reason));
        }
        Ok(job.clone())
    }

    /// Fold the printer's progress into the job.
    fn refresh(&self, job: &mut PrintJob) -> Result<(), FabError> {
        if !matches!(job.state, JobState::Printing | JobState::Paused) {
            return Ok(());
        }
        let Some(address) = job.printer_address.clone() else {
            return Ok(());
        };
        let status = match self.network.connect(&address) {
            Ok(d) => d.status(),
            Err(e) => return self.step(job, &JobEvent::Fault(e.to_string())),
        };
        if status.gcode_sha256 != job.gcode_sha256 {
            return Ok(());
        }
        let before = (job.current_layer, job.state.clone());
        job.set_layer(status.layer);
        match status.state {
            DeviceState::Done => self.step(job, &JobEvent::Finished)?,
            DeviceState::Disconnected => {
                self.step(job, &JobEvent::Fault(DeviceError::Disconnected.to_string()))?
            }
            _ => {}
        }
        if before != (job.current_layer, job.state.clone()) {
            self.storage.save_state(job)?;
        }
        Ok(())
    }

    pub fn status(&self, id: &str) -> Result<PrintJob, FabError> {
        let shared = self.job(id)?;
        let mut job = lock(&shared);
        self.refresh(&mut job)?;
        Ok(job.clone())
    }

    /// Continue, pause or stop a job.
    pub fn control(&self, id: &str, command: PrintCommand) -> Result<PrintJob, FabError> {
        let shared = self.job(id)?;
        let mut job = lock(&shared);
        self.refresh(&mut job)?;
        let event = command.event();
        if !matches!(crate::job::transition(&job.state, &event), Transition::Moved(_)) {
            return Err(FabError::Conflict(format!(
                "cannot {} a job that is {}",
                serde_json::to_value(command).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                job.state.name()
            )));
        }
        let address = job.printer_address.clone().unwrap_or_default();
        let sent = self.network.connect(&address).and_then(|device| {
            self.with_token(device.as_ref(), |t| match command {
                PrintCommand::Continue => device.resume(t),
                PrintCommand::Pause => device.pause(t),
                PrintCommand::Stop => device.stop(t),
            })
        });
        match sent {
            Ok(()) => self.step(&mut job, &event)?,
            Err(e) => {
                let reason = e.to_string();
                self.step(&mut job, &JobEvent::Fault(reason.clone()))?;
                if job.state == JobState::Paused {
                    // A paused job cannot fail; leave it for the client to stop.
                    return Err(device_error(e));
                }
                return Err(FabError::Printer(reason));
            }
        }
        Ok(job.clone())
    }

    /// Advance simulated printers one tick and pick up their progress.
    pub fn tick(&self) {
        self.network.tick();
        let jobs: Vec<_> = self.jobs.read().unwrap_or_else(|p| p.into_inner()).values().cloned().collect();
        for shared in jobs {
            let mut job = lock(&shared);
            if let Err(e) = self.refresh(&mut job) {
                tracing::warn!(job = %job.id, "refresh failed: {e}");
            }
        }
    }
}
