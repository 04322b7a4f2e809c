//! Slicer adapters: the built-in planar mock and an external executable.

use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;

use deskcad_core::fabrication::StlDocument;
use deskcad_core::Mesh;

use crate::profile::SliceProfile;
use crate::FabError;

/// Extrusion line width assumed by the mock slicer, in millimeters.
pub const LINE_WIDTH_MM: f64 = 0.4;
pub const FILAMENT_DIAMETER_MM: f64 = 1.75;

/// Result of slicing: G-code text and its layer count.
#[derive(Debug, Clone, PartialEq)]
pub struct Sliced {
    pub gcode: String,
    pub total_layers: u32,
}

pub trait Slicer: Send + Sync {
    /// Slice the STL at `stl` into `gcode`; returns the layer count.
    fn slice(&self, stl: &Path, gcode: &Path, profile: &SliceProfile) -> Result<u32, FabError>;

    fn name(&self) -> &str;
}

/// Axis-aligned box `[xmin, ymin, xmax, ymax]` of the section at height `z`.
pub fn section_box(mesh: &Mesh, z: f64) -> Option<[f64; 4]> {
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    let mut hit = false;
    let mut add = |x: f64, y: f64| {
        b[0] = b[0].min(x);
        b[1] = b[1].min(y);
        b[2] = b[2].max(x);
        b[3] = b[3].max(y);
        hit = true;
    };
    for t in 0..mesh.triangle_count() {
        let p = mesh.triangle(t);
        for (a, c) in [(0, 1), (1, 2), (2, 0)] {
            let (pa, pc) = (p[a], p[c]);
            let (da, dc) = (pa.z - z, pc.z - z);
            if da == 0.0 {
                add(pa.x, pa.y);
            }
            if (da < 0.0 && dc > 0.0) || (da > 0.0 && dc < 0.0) {
                let s = da / (da - dc);
                add(pa.x + s * (pc.x - pa.x), pa.y + s * (pc.y - pa.y));
            }
        }
    }
    hit.then_some(b)
}

/// Layer count for a part `height` mm tall.
pub fn layer_count(height: f64, layer_height: f64) -> u32 {
    // Shave float noise so 10 / 0.2 is 50 and not 51.
    (height / layer_height - 1e-9).ceil().max(0.0) as u32
}

/// Deterministic planar slicing: per layer, one rectangular perimeter
/// around the cross-section's bounding box at the layer's mid-height.
pub fn mock_slice(mesh: &Mesh, profile: &SliceProfile) -> Result<Sliced, FabError> {
    if mesh.is_empty() {
        return Err(FabError::Slicer("the model is empty".into()));
    }
    let (zmin, zmax) = mesh
        .vertices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.z), hi.max(p.z)));
    let lh = profile.layer_height;
    let layers = layer_count(zmax - zmin, lh);
    if layers == 0 {
        return Err(FabError::Slicer("the model has no height".into()));
    }
    let filament_area = std::f64::consts::PI * (FILAMENT_DIAMETER_MM / 2.0).powi(2);
    let e_per_mm = LINE_WIDTH_MM * lh / filament_area;

    let mut g = String::new();
    let _ = writeln!(g, "; generated by deskcad mock slicer");
    let _ = writeln!(g, "; layer_count: {layers}");
    let _ = writeln!(g, "; layer_height: {lh:.3}");
    let _ = writeln!(g, "; infill_percent: {}", profile.infill_percent);
    let _ = writeln!(g, "; supports: {}", profile.supports);
    g.push_str("G21\nG90\nM82\nG28\nG92 E0\n");
    let mut e = 0.0;
    for i in 0..layers {
        let mid = (zmin + (i as f64 + 0.5) * lh).min(zmax);
        let top = ((i + 1) as f64 * lh).min(zmax - zmin);
        let _ = writeln!(g, ";LAYER:{i}");
        let _ = writeln!(g, "G0 Z{top:.3} F3000");
        let Some([x0, y0, x1, y1]) = section_box(mesh, mid) else {
            continue;
        };
        let _ = writeln!(g, "G0 X{x0:.3} Y{y0:.3}");
        for (x, y, len) in [(x1, y0, x1 - x0), (x1, y1, y1 - y0), (x0, y1, x1 - x0), (x0, y0, y1 - y0)] {
            e += len * e_per_mm;
            let _ = writeln!(g, "G1 X{x:.3} Y{y:.3} E{e:.5} F1200");
        }
    }
    g.push_str("; end\nM104 S0\nM140 S0\nM84\n");
    Ok(Sliced {
        gcode: g,
        total_layers: layers,
    })
}

/// Layer count announced or implied by G-code text.
pub fn gcode_layer_count(gcode: &str) -> u32 {
    for line in gcode.lines() {
        let l = line.trim();
        for key in ["; layer_count:", ";LAYER_COUNT:"] {
            if let Some(v) = l.strip_prefix(key) {
                if let Ok(n) = v.trim().parse() {
                    return n;
                }
            }
        }
    }
    gcode.lines().filter(|l| l.starts_with(";LAYER:")).count() as u32
}

pub struct MockSlicer;

impl Slicer for MockSlicer {
    fn slice(&self, stl: &Path, gcode: &Path, profile: &SliceProfile) -> Result<u32, FabError> {
        let bytes = std::fs::read(stl)?;
        let doc = StlDocument::parse(&bytes).map_err(|e| FabError::BadRequest(e.to_string()))?;
        let out = mock_slice(&doc.to_mesh(), profile)?;
        std::fs::write(gcode, &out.gcode)?;
        Ok(out.total_layers)
    }

    fn name(&self) -> &str {
        "mock"
    }
}

/// Runs a slicer executable. `{input}` and `{output}` in the command line
/// are replaced with the file paths; without them the two paths are
/// appended. `{layer_height}` is replaced too.
pub struct ExternalSlicer {
    pub command: String,
}

impl Slicer for ExternalSlicer {
    fn slice(&self, stl: &Path, gcode: &Path, profile: &SliceProfile) -> Result<u32, FabError> {
        let mut words = self.command.split_whitespace();
        let program = words
            .next()
            .ok_or_else(|| FabError::Slicer("no slicer command configured".into()))?;
        let (input, output) = (stl.to_string_lossy(), gcode.to_string_lossy());
        let mut placed = false;
        let mut args: Vec<String> = words
            .map(|w| {
                placed |= w.contains("{input}") || w.contains("{output}");
                w.replace("{input}", &input)
                    .replace("{output}", &output)
                    .replace("{layer_height}", &profile.layer_height.to_string())
            })
            .collect();
        if !placed {
            args.push(input.into_owned());
            args.push(output.into_owned());
        }
        let out = Command::new(program)
            .args(&args)
            .output()
            .map_err(|e| FabError::Slicer(format!("cannot run `{program}`: {e}")))?;
        if !out.status.success() {
            let err = String::from_utf8_lossy(&out.stderr);
            return Err(FabError::Slicer(format!("`{program}` exited with {}: {}", out.status, err.trim())));
        }
        let text = std::fs::read_to_string(gcode)
            .map_err(|e| FabError::Slicer(format!("slicer wrote no G-code: {e}")))?;
        Ok(gcode_layer_count(&text))
    }

    fn name(&self) -> &str {
        "external"
    }
}
