use serde::{Deserialize, Serialize};

use crate::FabError;

pub const MIN_LAYER_HEIGHT_MM: f64 = 0.05;
pub const MAX_LAYER_HEIGHT_MM: f64 = 1.0;

/// Slicer settings sent along with a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceProfile {
    pub layer_height: f64,
    /// Recorded in the G-code header; the mock slicer prints perimeters only.
    pub infill_percent: f64,
    pub supports: bool,
}

impl Default for SliceProfile {
    fn default() -> Self {
        SliceProfile {
            layer_height: 0.2,
            infill_percent: 20.0,
            supports: false,
        }
    }
}

impl SliceProfile {
    pub fn check(&self) -> Result<(), FabError> {
        if !(MIN_LAYER_HEIGHT_MM..=MAX_LAYER_HEIGHT_MM).contains(&self.layer_height) {
            return Err(FabError::BadRequest(format!(
                "layer height {} mm is outside [{MIN_LAYER_HEIGHT_MM}, {MAX_LAYER_HEIGHT_MM}]",
                self.layer_height
            )));
        }
        if !(0.0..=100.0).contains(&self.infill_percent) {
            return Err(FabError::BadRequest(format!(
                "infill {}% is outside [0, 100]",
                self.infill_percent
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert!(SliceProfile::default().check().is_ok());
        let thin = SliceProfile {
            layer_height: 0.01,
            ..SliceProfile::default()
        };
        assert!(matches!(thin.check(), Err(FabError::BadRequest(_))));
        let nan = SliceProfile {
            layer_height: f64::NAN,
            ..SliceProfile::default()
        };
        assert!(nan.check().is_err());
        let full = SliceProfile {
            infill_percent: 101.0,
            ..SliceProfile::default()
        };
        assert!(full.check().is_err());
        for h in [0.05, 1.0] {
            assert!(SliceProfile {
                layer_height: h,
                ..SliceProfile::default()
            }
            .check()
            .is_ok());
        }
    }
}
