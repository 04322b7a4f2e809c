//! STL export, the printer twin and drag-and-drop placement on its plate.

mod printer;
mod stl;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

pub use printer::{PrinterPreset, PrinterPresets, PrinterTwin, BUILD_VOLUME_TOLERANCE_MM, DEFAULT_PLATE_SPACING_MM};
pub use stl::{StlDocument, StlFormat, StlTriangle, STL_HEADER_LEN, STL_TRIANGLE_LEN};

use crate::geometry::{compute_aabb, validate_mesh, Axis, Box3, Mesh};
use crate::scene::{DesignObject, ObjectId, SceneDocument};
use crate::{Error, Result};

const STL_NAME: &str = "deskcad";

/// World meters (y up) to STL millimeters (z up).
pub fn world_to_stl_mm(p: &Point3<f64>) -> [f64; 3] {
    [p.x * 1000.0, -p.z * 1000.0, p.y * 1000.0]
}

/// One STL from `meshes`, each of which must be watertight. Coordinates are
/// world millimeters with z up, shifted so the bounding box starts at the
/// origin; the shift happens in f64, so the f32 output keeps its precision
/// wherever the model sits in the room.
pub fn export_meshes(meshes: &[&Mesh], format: StlFormat) -> Result<StlDocument> {
    check_exportable(meshes)?;
    let mut lo = [f64::INFINITY; 3];
    for p in meshes.iter().flat_map(|m| &m.vertices) {
        let q = world_to_stl_mm(p);
        for k in 0..3 {
            lo[k] = lo[k].min(q[k]);
        }
    }
    export_meshes_with(meshes, format, |p| {
        let q = world_to_stl_mm(p);
        [q[0] - lo[0], q[1] - lo[1], q[2] - lo[2]]
    })
}

fn check_exportable(meshes: &[&Mesh]) -> Result<()> {
    if meshes.is_empty() {
        return Err(Error::Parameter("nothing to export".into()));
    }
    for (i, m) in meshes.iter().enumerate() {
        let r = validate_mesh(m);
        if !r.watertight {
            return Err(Error::Validity(format!("mesh {i} is not watertight ({r})")));
        }
    }
    Ok(())
}

fn export_meshes_with(meshes: &[&Mesh], format: StlFormat, to_mm: impl Fn(&Point3<f64>) -> [f64; 3]) -> Result<StlDocument> {
    check_exportable(meshes)?;
    let merged = Mesh::merge(meshes.iter().copied());
    Ok(StlDocument::from_mesh(&merged, format, STL_NAME, to_mm))
}

/// STL bytes of the given objects; see [`export_meshes`] for the frame.
pub fn export_stl(scene: &SceneDocument, ids: &[ObjectId], format: StlFormat) -> Result<Vec<u8>> {
    let objects = ids.iter().map(|id| scene.object(*id)).collect::<Result<Vec<_>>>()?;
    let meshes: Vec<&Mesh> = objects.iter().map(|o| o.baked.as_ref()).collect();
    Ok(export_meshes(&meshes, format)?.to_bytes())
}

/// STL bytes of everything on the printer plate, in printer millimeters.
pub fn export_plate_stl(scene: &SceneDocument, format: StlFormat) -> Result<Vec<u8>> {
    let twin = scene
        .printer()
        .ok_or_else(|| Error::State("no printer twin".into()))?;
    let objects = twin
        .placed
        .iter()
        .map(|id| scene.object(*id))
        .collect::<Result<Vec<_>>>()?;
    let meshes: Vec<&Mesh> = objects.iter().map(|o| o.baked.as_ref()).collect();
    let doc = export_meshes_with(&meshes, format, |p| twin.to_printer_mm(p).into())?;
    Ok(doc.to_bytes())
}

/// How to size a new printer twin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwinSpec {
    Preset(String),
    Manual { name: String, dims_mm: [f64; 3] },
}

/// Put a printer twin on the active grid, replacing any previous one.
pub fn make_printer_twin(scene: &mut SceneDocument, spec: &TwinSpec, presets: &PrinterPresets) -> Result<PrinterTwin> {
    let grid = scene
        .grid()
        .ok_or_else(|| Error::State("no workspace selected".into()))?;
    let (name, dims) = match spec {
        TwinSpec::Preset(name) => {
            let p = presets.get(name)?;
            (p.name.clone(), [p.width_mm, p.depth_mm, p.height_mm])
        }
        TwinSpec::Manual { name, dims_mm } => (name.clone(), *dims_mm),
    };
    let mut twin = PrinterTwin::on_grid(&name, dims, grid)?;
    let mut removed = Vec::new();
    if let Some(old) = scene.printer() {
        twin.server_address = old.server_address.clone();
        twin.printer_address = old.printer_address.clone();
        removed = old.placed.iter().map(|id| (*id, None)).collect();
    }
    scene.set_printer(Some(twin.clone()), removed);
    Ok(twin)
}

/// Record server and printer addresses on the twin.
pub fn set_printer_addresses(scene: &mut SceneDocument, server: Option<String>, printer: Option<String>) -> Result<()> {
    let mut twin = scene
        .printer()
        .cloned()
        .ok_or_else(|| Error::State("no printer twin".into()))?;
    twin.server_address = server;
    twin.printer_address = printer;
    scene.set_printer(Some(twin), Vec::new());
    Ok(())
}

/// Copy `ids` onto the plate: centered in x/y, resting at z = 0. The
/// originals are left untouched.
pub fn drop_into_printer(scene: &mut SceneDocument, ids: &[ObjectId]) -> Result<Vec<ObjectId>> {
    let mut twin = scene
        .printer()
        .cloned()
        .ok_or_else(|| Error::State("no printer twin".into()))?;
    if ids.is_empty() {
        return Err(Error::Parameter("nothing to place".into()));
    }
    let mut unique = ids.to_vec();
    unique.sort_unstable();
    unique.dedup();
    let sources = unique
        .iter()
        .map(|id| scene.object(*id))
        .collect::<Result<Vec<&DesignObject>>>()?;
    let meshes: Vec<&Mesh> = sources.iter().map(|o| o.baked.as_ref()).collect();
    let group = twin.box_to_printer_mm(&compute_aabb(&meshes)?);
    let size = group.size();
    let [w, d, h] = twin.build_volume_mm;
    for (k, limit) in [w, d, h].into_iter().enumerate() {
        if size[k] > limit + BUILD_VOLUME_TOLERANCE_MM {
            return Err(Error::Placement(format!(
                "group is {:.2} mm along printer {:?} but the build volume is {limit} mm",
                size[k],
                Axis::from_index(k)
            )));
        }
    }
    let target = Vector3::new((w - size.x) * 0.5, (d - size.y) * 0.5, 0.0);
    let shift_mm = target - group.min.coords;
    let shift = twin.from_printer_mm(&shift_mm) - twin.origin;

    let (blocks, vertices) = sources
        .iter()
        .fold((0, 0), |(b, v), o| (b + o.block_count(), v + o.vertex_count()));
    scene.ensure_capacity(blocks, vertices)?;
    let new_ids = scene.allocate_ids(sources.len());
    let copies: Vec<(ObjectId, Option<DesignObject>)> = sources
        .iter()
        .zip(&new_ids)
        .map(|(o, id)| {
            let mut t = o.transform;
            t.translation += shift;
            let mut c = o.with_transform(t);
            c.id = *id;
            (*id, Some(c))
        })
        .collect();
    twin.placed.extend(&new_ids);
    scene.set_printer(Some(twin), copies);
    Ok(new_ids)
}

/// One object outside the build volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub id: ObjectId,
    pub axes: Vec<Axis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildVolumeReport {
    pub violations: Vec<Violation>,
}

impl BuildVolumeReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Placed objects whose box leaves `[0..W]×[0..D]×[0..H]`, with the
/// printer axes they exceed.
pub fn check_build_volume(scene: &SceneDocument) -> Result<BuildVolumeReport> {
    let twin = scene
        .printer()
        .ok_or_else(|| Error::State("no printer twin".into()))?;
    let mut violations = Vec::new();
    for id in &twin.placed {
        let b = twin.box_to_printer_mm(&scene.object(*id)?.bounds());
        let axes: Vec<Axis> = (0..3)
            .filter(|&k| {
                b.min[k] < -BUILD_VOLUME_TOLERANCE_MM || b.max[k] > twin.build_volume_mm[k] + BUILD_VOLUME_TOLERANCE_MM
            })
            .map(Axis::from_index)
            .collect();
        if !axes.is_empty() {
            violations.push(Violation { id: *id, axes });
        }
    }
    Ok(BuildVolumeReport { violations })
}

/// Whether a print may start: something on the plate and nothing outside.
pub fn print_ready(scene: &SceneDocument) -> Result<()> {
    let report = check_build_volume(scene)?;
    let twin = scene
        .printer()
        .ok_or_else(|| Error::State("no printer twin".into()))?;
    if twin.placed.is_empty() {
        return Err(Error::State("the printer plate is empty".into()));
    }
    if let Some(v) = report.violations.first() {
        return Err(Error::Placement(format!(
            "object {} leaves the build volume along {:?}",
            v.id, v.axes
        )));
    }
    Ok(())
}

/// Printer-frame box of an object, in millimeters.
pub fn plate_box(scene: &SceneDocument, id: ObjectId) -> Result<Box3> {
    let twin = scene
        .printer()
        .ok_or_else(|| Error::State("no printer twin".into()))?;
    Ok(twin.box_to_printer_mm(&scene.object(id)?.bounds()))
}
