use serde::{Deserialize, Serialize};

use crate::profile::SliceProfile;

pub type JobId = String;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "state", content = "reason")]
pub enum JobState {
    Queued,
    Slicing,
    Sliced,
    Printing,
    Paused,
    Done,
    Aborted,
    Failed(String),
}

impl JobState {
    pub fn name(&self) -> &'static str {
        match self {
            JobState::Queued => "queued",
            JobState::Slicing => "slicing",
            JobState::Sliced => "sliced",
            JobState::Printing => "printing",
            JobState::Paused => "paused",
            JobState::Done => "done",
            JobState::Aborted => "aborted",
            JobState::Failed(_) => "failed",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, JobState::Done | JobState::Aborted | JobState::Failed(_))
    }

    pub fn all() -> Vec<JobState> {
        vec![
            JobState::Queued,
            JobState::Slicing,
            JobState::Sliced,
            JobState::Printing,
            JobState::Paused,
            JobState::Done,
            JobState::Aborted,
            JobState::Failed("x".into()),
        ]
    }
}

/// Things that can happen to a job. Client commands are refused when they
/// do not fit the current state; device reports are ignored instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JobEvent {
    BeginSlice,
    SliceOk,
    SliceFailed(String),
    BeginPrint,
    Pause,
    Continue,
    Stop,
    Finished,
    Fault(String),
}

impl JobEvent {
    pub fn all() -> Vec<JobEvent> {
        vec![
            JobEvent::BeginSlice,
            JobEvent::SliceOk,
            JobEvent::SliceFailed("x".into()),
            JobEvent::BeginPrint,
            JobEvent::Pause,
            JobEvent::Continue,
            JobEvent::Stop,
            JobEvent::Finished,
            JobEvent::Fault("x".into()),
        ]
    }

    /// Reports from the slicer or printer rather than client commands.
    pub fn is_report(&self) -> bool {
        matches!(self, JobEvent::Finished | JobEvent::Fault(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transition {
    Moved(JobState),
    Ignored,
    Illegal,
}

/// The job state machine.
pub fn transition(state: &JobState, event: &JobEvent) -> Transition {
    use JobEvent as E;
    use JobState as S;
    let next = match (state, event) {
        (S::Queued, E::BeginSlice) => S::Slicing,
        (S::Slicing, E::SliceOk) => S::Sliced,
        (S::Slicing, E::SliceFailed(r)) => S::Failed(r.clone()),
        (S::Sliced, E::BeginPrint) => S::Printing,
        (S::Printing, E::Pause) => S::Paused,
        (S::Printing, E::Stop) => S::Aborted,
        (S::Printing, E::Finished) => S::Done,
        (S::Printing, E::Fault(r)) => S::Failed(r.clone()),
        (S::Paused, E::Continue) => S::Printing,
        (S::Paused, E::Stop) => S::Aborted,
        (_, e) if e.is_report() => return Transition::Ignored,
        _ => return Transition::Illegal,
    };
    Transition::Moved(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrintJob {
    pub id: JobId,
    #[serde(flatten)]
    pub state: JobState,
    /// Percent of layers printed.
    pub progress: f64,
    pub current_layer: u32,
    pub total_layers: u32,
    pub profile: SliceProfile,
    pub printer_address: Option<String>,
    pub stl_sha256: String,
    pub gcode_sha256: Option<String>,
}

impl PrintJob {
    pub fn new(id: JobId, profile: SliceProfile, stl_sha256: String) -> PrintJob {
        PrintJob {
            id,
            state: JobState::Queued,
            progress: 0.0,
            current_layer: 0,
            total_layers: 0,
            profile,
            printer_address: None,
            stl_sha256,
            gcode_sha256: None,
        }
    }

    /// Apply `event`; returns the resulting transition.
    pub fn apply(&mut self, event: &JobEvent) -> Transition {
        let t = transition(&self.state, event);
        if let Transition::Moved(next) = &t {
            if *next == JobState::Done {
                self.set_layer(self.total_layers);
            }
            self.state = next.clone();
        }
        t
    }

    /// Record printer progress. Layers only move forward.
    pub fn set_layer(&mut self, layer: u32) {
        let layer = layer.min(self.total_layers);
        if layer <= self.current_layer {
            return;
        }
        self.current_layer = layer;
        self.progress = if self.total_layers == 0 {
            100.0
        } else {
            100.0 * layer as f64 / self.total_layers as f64
        };
    }
}
