//! Fabrication server: accepts STL uploads, slices them into G-code and
//! drives networked printers through a small job state machine.
//!
//! The HTTP surface is in [`server`]; [`service::FabService`] holds the
//! workflow so it can be driven directly from tests and other front ends.

pub mod clock;
pub mod job;
pub mod printer;
pub mod profile;
pub mod server;
pub mod service;
pub mod slicer;
pub mod storage;
pub mod token;

use thiserror::Error;

pub use clock::{Clock, ManualClock, SystemClock};
pub use job::{JobEvent, JobId, JobState, PrintJob};
pub use printer::{DeviceError, Faults, MockNetwork, MockPrinter, PrinterDevice, PrinterNetwork};
pub use profile::SliceProfile;
pub use server::{router, spawn, ServerConfig, ServerHandle, SlicerChoice};
pub use service::{FabService, PrintCommand};
pub use slicer::{ExternalSlicer, MockSlicer, Slicer};
pub use storage::Storage;
pub use token::{TokenCache, DEFAULT_TOKEN_TTL_SECS};

#[derive(Debug, Error)]
pub enum FabError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("printer error: {0}")]
    Printer(String),
    #[error("slicer error: {0}")]
    Slicer(String),
    #[error("slicing job {job_id} failed: {reason}")]
    SliceFailed { job_id: JobId, reason: String },
    #[error("storage error: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl FabError {
    pub fn status_code(&self) -> u16 {
        match self {
            FabError::BadRequest(_) => 400,
            FabError::NotFound(_) => 404,
            FabError::Conflict(_) => 409,
            FabError::Unprocessable(_) => 422,
            FabError::Printer(_) => 502,
            FabError::Slicer(_) | FabError::SliceFailed { .. } | FabError::Io(_) | FabError::Internal(_) => 500,
        }
    }
}
