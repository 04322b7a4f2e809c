//! Printer presets and the printer twin placed on the workspace.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{Axis, Box3};
use crate::scene::{ObjectId, WorkspaceGrid};
use crate::{Error, Result};

const BUILTIN_PRESETS: &str = include_str!("../../config/printers.json");

pub const DEFAULT_PLATE_SPACING_MM: f64 = 10.0;

/// Slack for build-volume checks, in millimeters.
pub const BUILD_VOLUME_TOLERANCE_MM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrinterPreset {
    pub name: String,
    pub width_mm: f64,
    pub depth_mm: f64,
    pub height_mm: f64,
}

/// The printer preset configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrinterPresets {
    pub printers: Vec<PrinterPreset>,
}

impl PrinterPresets {
    pub fn from_json(bytes: &[u8]) -> Result<PrinterPresets> {
        let presets: PrinterPresets = serde_json::from_slice(bytes)
            .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        for p in &presets.printers {
            check_volume([p.width_mm, p.depth_mm, p.height_mm])?;
        }
        Ok(presets)
    }

    /// Presets shipped with the crate.
    pub fn builtin() -> PrinterPresets {
        PrinterPresets::from_json(BUILTIN_PRESETS.as_bytes())
            .unwrap_or_else(|e| unreachable!("bundled printer presets are valid: {e}"))
    }

    pub fn get(&self, name: &str) -> Result<&PrinterPreset> {
        self.printers
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::NotFound(format!("printer preset `{name}`")))
    }
}

fn check_volume(dims: [f64; 3]) -> Result<()> {
    if dims.iter().all(|d| d.is_finite() && *d > 0.0) {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "build volume must be positive on every axis, got {} x {} x {} mm",
            dims[0], dims[1], dims[2]
        )))
    }
}

/// Virtual printer whose box is the build volume. The printer frame has its
/// origin at a plate corner, x and y across the plate and z up from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrinterTwin {
    pub name: String,
    /// Width, depth, height in millimeters.
    pub build_volume_mm: [f64; 3],
    pub plate_spacing_mm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_address: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub printer_address: Option<String>,
    /// Plate corner in world coordinates.
    pub origin: Point3<f64>,
    /// World directions of the printer x, y and z axes.
    pub axes: [Vector3<f64>; 3],
    pub placed: Vec<ObjectId>,
}

impl PrinterTwin {
    /// Twin with its plate on the grid plane at the grid's lattice origin.
    pub fn on_grid(name: &str, dims_mm: [f64; 3], grid: &WorkspaceGrid) -> Result<PrinterTwin> {
        check_volume(dims_mm)?;
        Ok(PrinterTwin {
            name: name.to_string(),
            build_volume_mm: dims_mm,
            plate_spacing_mm: DEFAULT_PLATE_SPACING_MM,
            server_address: None,
            printer_address: None,
            origin: grid.lattice_origin(),
            axes: [grid.u, grid.v, grid.normal],
            placed: Vec::new(),
        })
    }

    /// World point to printer coordinates in millimeters.
    pub fn to_printer_mm(&self, p: &Point3<f64>) -> Vector3<f64> {
        let d = p - self.origin;
        Vector3::new(d.dot(&self.axes[0]), d.dot(&self.axes[1]), d.dot(&self.axes[2])) * 1000.0
    }

    pub fn from_printer_mm(&self, c: &Vector3<f64>) -> Point3<f64> {
        self.origin + (self.axes[0] * c.x + self.axes[1] * c.y + self.axes[2] * c.z) / 1000.0
    }

    /// World box in printer millimeters. Exact because the printer axes are
    /// signed world axes.
    pub fn box_to_printer_mm(&self, b: &Box3) -> Box3 {
        Box3::from_points(&b.corners().map(|c| Point3::from(self.to_printer_mm(&c))))
    }

    /// World-space box of the build volume.
    pub fn build_box(&self) -> Box3 {
        let [w, d, h] = self.build_volume_mm;
        let far = self.from_printer_mm(&Vector3::new(w, d, h));
        Box3::from_points(&[self.origin, far])
    }

    /// Printer axis names used in violation reports.
    pub fn axis_name(k: usize) -> Axis {
        Axis::from_index(k)
    }
}
