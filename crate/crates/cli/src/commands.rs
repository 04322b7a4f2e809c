use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use deskcad_core::fabrication::{check_build_volume, export_plate_stl, export_stl, print_ready, StlDocument, StlFormat};
use deskcad_core::scene::{default_room, load_document, load_room, save_document, Limits, ObjectId, SceneDocument};
use deskcad_core::script::replay;
use deskcad_core::{mesh_volume, validate_mesh, Error};
use deskcad_fab::{JobState, SliceProfile};

use crate::fabclient::{ClientError, FabBackend, FabClient};
use crate::CliError;

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Command(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Command(format!("cannot write {}: {e}", path.display())))
}

fn scene_error(e: Error) -> CliError {
    match e {
        Error::Validity(_) | Error::Placement(_) => CliError::Validation(e.to_string()),
        e => CliError::Command(e.to_string()),
    }
}

fn fab_error(e: ClientError) -> CliError {
    CliError::Network(e.to_string())
}

fn load_doc(path: &Path) -> Result<SceneDocument, CliError> {
    load_document(&read(path)?).map_err(|e| CliError::Command(format!("{}: {e}", path.display())))
}

/// Where `run` saves when no output is named: `pen.dcs` → `pen.scene.json`.
pub fn default_output(script: &Path) -> PathBuf {
    script.with_extension("scene.json")
}

/// Replay a design script and save the resulting document.
pub fn run(script: &Path, room: Option<&Path>, out: Option<&Path>, log: &mut dyn Write) -> Result<PathBuf, CliError> {
    let text = String::from_utf8(read(script)?)
        .map_err(|_| CliError::Command(format!("{} is not UTF-8 text", script.display())))?;
    let room = match room {
        Some(p) => load_room(&read(p)?).map_err(|e| CliError::Command(format!("{}: {e}", p.display())))?,
        None => default_room(),
    };
    let session = replay(SceneDocument::new(room), &text)
        .map_err(|e| CliError::Command(format!("{}: {e}", script.display())))?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| default_output(script));
    write(&out, &save_document(&session.scene))?;
    let c = session.scene.counters();
    let _ = writeln!(
        log,
        "wrote {}: {} objects, {} building blocks, {} vertices",
        out.display(),
        session.scene.len(),
        c.blocks,
        c.vertices
    );
    Ok(out)
}

/// Objects a plain export covers: everything not resting on the printer.
fn design_ids(scene: &SceneDocument) -> Vec<ObjectId> {
    scene.object_ids().into_iter().filter(|&id| !scene.is_placed_in_printer(id)).collect()
}

pub fn export(doc: &Path, stl: &Path, ascii: bool, plate: bool, log: &mut dyn Write) -> Result<(), CliError> {
    let scene = load_doc(doc)?;
    let format = if ascii { StlFormat::Ascii } else { StlFormat::Binary };
    let bytes = if plate {
        export_plate_stl(&scene, format)
    } else {
        export_stl(&scene, &design_ids(&scene), format)
    }
    .map_err(scene_error)?;
    write(stl, &bytes)?;
    let _ = writeln!(log, "wrote {} ({} bytes)", stl.display(), bytes.len());
    Ok(())
}

/// Check every object and the document's consistency. Capacity overruns
/// and out-of-bounds plate parts are reported as warnings.
pub fn validate(doc: &Path, log: &mut dyn Write) -> Result<(), CliError> {
    let scene = load_document(&read(doc)?).map_err(|e| CliError::Validation(format!("{}: {e}", doc.display())))?;
    let mut bad = Vec::new();
    if let Err(e) = scene.check_invariants() {
        bad.push(format!("document: {e}"));
    }
    for o in scene.objects() {
        let report = validate_mesh(&o.baked);
        if report.watertight {
            let _ = writeln!(
                log,
                "object {}: watertight, {} triangles, {:.3} cm³",
                o.id,
                o.baked.triangles.len(),
                mesh_volume(&o.baked).unwrap_or(f64::NAN) * 1e6
            );
        } else {
            let _ = writeln!(log, "object {}: not watertight ({report})", o.id);
            bad.push(format!("object {} is not watertight", o.id));
        }
    }
    let c = scene.counters();
    let supported = Limits::default();
    if c.blocks > supported.max_blocks {
        let _ = writeln!(
            log,
            "warning: {} basic building blocks exceeds the limit of {}",
            c.blocks, supported.max_blocks
        );
    }
    if c.vertices > supported.max_vertices {
        let _ = writeln!(
            log,
            "warning: {} vertices exceeds the limit of {}",
            c.vertices, supported.max_vertices
        );
    }
    if let Ok(report) = check_build_volume(&scene) {
        for v in report.violations {
            let _ = writeln!(log, "warning: object {} leaves the build volume along {:?}", v.id, v.axes);
        }
    }
    if bad.is_empty() {
        let _ = writeln!(log, "ok: {} objects, {} building blocks, {} vertices", scene.len(), c.blocks, c.vertices);
        Ok(())
    } else {
        Err(CliError::Validation(bad.join("; ")))
    }
}

#[derive(Debug, Clone)]
pub struct PrintOptions {
    pub server: Option<String>,
    pub printer: Option<String>,
    pub watch: bool,
    pub interval: Duration,
    /// Local copy for `print` without a server.
    pub save: Option<PathBuf>,
    pub profile: SliceProfile,
}

/// The STL to print from `input`: an STL file as is, or a document's
/// printer plate (its objects when nothing is on the plate).
fn printable(input: &Path) -> Result<(Vec<u8>, Option<SceneDocument>), CliError> {
    let bytes = read(input)?;
    if let Ok(doc) = StlDocument::parse(&bytes) {
        if !validate_mesh(&doc.to_mesh()).watertight {
            return Err(CliError::Validation(format!("{} is not watertight", input.display())));
        }
        return Ok((bytes, None));
    }
    let scene = load_document(&bytes)
        .map_err(|e| CliError::Command(format!("{} is neither an STL nor a document: {e}", input.display())))?;
    let on_plate = scene.printer().is_some_and(|t| !t.placed.is_empty());
    let stl = if on_plate {
        print_ready(&scene).map_err(scene_error)?;
        export_plate_stl(&scene, StlFormat::Binary)
    } else {
        export_stl(&scene, &design_ids(&scene), StlFormat::Binary)
    }
    .map_err(scene_error)?;
    Ok((stl, Some(scene)))
}

pub fn print(input: &Path, opts: &PrintOptions, log: &mut dyn Write) -> Result<Option<JobState>, CliError> {
    let (stl, scene) = printable(input)?;
    let twin = scene.as_ref().and_then(|s| s.printer());
    let server = opts.server.clone().or_else(|| twin.and_then(|t| t.server_address.clone()));
    let printer = opts.printer.clone().or_else(|| twin.and_then(|t| t.printer_address.clone()));
    let Some(server) = server else {
        if printer.is_some() {
            return Err(CliError::Command("a printer address needs a server address".into()));
        }
        let target = opts.save.clone().unwrap_or_else(|| input.with_extension("stl"));
        if target != input {
            write(&target, &stl)?;
        }
        let _ = writeln!(log, "saved locally: {}", target.display());
        return Ok(None);
    };
    opts.profile.check().map_err(|e| CliError::Command(e.to_string()))?;
    let client = FabClient::new(&server);
    let job = client.slice(&stl, opts.profile).map_err(fab_error)?;
    let _ = writeln!(log, "job {}: {}, {} layers", job.id, job.state.name(), job.total_layers);
    let Some(printer) = printer else {
        return Ok(Some(job.state));
    };
    let mut job = client.print(&job.id, &printer).map_err(fab_error)?;
    let _ = writeln!(log, "job {}: {} on {printer}, {:.0}%", job.id, job.state.name(), job.progress);
    if !opts.watch {
        return Ok(Some(job.state));
    }
    let mut shown = (job.state.clone(), job.current_layer);
    while !job.state.is_terminal() {
        std::thread::sleep(opts.interval);
        job = client.status(&job.id).map_err(fab_error)?;
        if (job.state.clone(), job.current_layer) != shown {
            shown = (job.state.clone(), job.current_layer);
            let _ = writeln!(
                log,
                "job {}: {} layer {}/{}, {:.0}%",
                job.id,
                job.state.name(),
                job.current_layer,
                job.total_layers,
                job.progress
            );
        }
    }
    match &job.state {
        JobState::Done => Ok(Some(job.state)),
        JobState::Failed(reason) => Err(CliError::Network(format!("job {} failed: {reason}", job.id))),
        other => Err(CliError::Network(format!("job {} ended {}", job.id, other.name()))),
    }
}
