use std::path::{Path, PathBuf};

use crate::job::PrintJob;
use crate::FabError;

pub const STL_FILE: &str = "model.stl";
pub const GCODE_FILE: &str = "model.gcode";
pub const STATE_FILE: &str = "job.state";

/// `{root}/{job}/model.stl|model.gcode|job.state`
#[derive(Debug, Clone)]
pub struct Storage {
    root: PathBuf,
}

impl Storage {
    pub fn open(root: impl Into<PathBuf>) -> Result<Storage, FabError> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Storage { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn job_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn stl_path(&self, id: &str) -> PathBuf {
        self.job_dir(id).join(STL_FILE)
    }

    pub fn gcode_path(&self, id: &str) -> PathBuf {
        self.job_dir(id).join(GCODE_FILE)
    }

    pub fn state_path(&self, id: &str) -> PathBuf {
        self.job_dir(id).join(STATE_FILE)
    }

    pub fn save_stl(&self, id: &str, bytes: &[u8]) -> Result<(), FabError> {
        std::fs::create_dir_all(self.job_dir(id))?;
        std::fs::write(self.stl_path(id), bytes)?;
        Ok(())
    }

    pub fn read_gcode(&self, id: &str) -> Result<String, FabError> {
        Ok(std::fs::read_to_string(self.gcode_path(id))?)
    }

    /// Write the job record through a temporary file so readers never see
    /// a half-written state.
    pub fn save_state(&self, job: &PrintJob) -> Result<(), FabError> {
        let path = self.state_path(&job.id);
        let tmp = path.with_extension("state.tmp");
        let text = serde_json::to_string_pretty(job).map_err(|e| FabError::Internal(e.to_string()))?;
        std::fs::write(&tmp, text + "\n")?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load_state(&self, id: &str) -> Result<PrintJob, FabError> {
        let text = std::fs::read_to_string(self.state_path(id))?;
        serde_json::from_str(&text).map_err(|e| FabError::Internal(format!("corrupt job record {id}: {e}")))
    }

    /// Ids of every stored job.
    pub fn job_ids(&self) -> Result<Vec<String>, FabError> {
        let mut ids = Vec::new();
        for entry in std::fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.path().join(STATE_FILE).is_file() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }
}
