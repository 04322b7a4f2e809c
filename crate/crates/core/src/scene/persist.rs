//! Versioned JSON scene documents. History is session-local and not saved;
//! baked meshes are regenerated from the construction trees on load.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::grid::WorkspaceGrid;
use super::object::{DesignObject, ObjectId};
use super::room::Room;
use super::{Limits, SceneDocument, SelectionMode};
use crate::csg::{BooleanOptions, Color, CsgTree, Solidity};
use crate::fabrication::PrinterTwin;
use crate::geometry::{TessellationSpec, Transform};
use crate::{Error, Result};

pub const DOCUMENT_FORMAT: &str = "deskcad-scene";
pub const DOCUMENT_VERSION: u32 = 1;

pub(crate) struct Parts {
    pub room: Room,
    pub grid: Option<WorkspaceGrid>,
    pub limits: Limits,
    pub tessellation: TessellationSpec,
    pub boolean: BooleanOptions,
    pub mode: SelectionMode,
    pub selection: BTreeSet<ObjectId>,
    pub printer: Option<PrinterTwin>,
    pub objects: Vec<DesignObject>,
}

pub(crate) struct PartsRef<'a> {
    pub room: &'a Room,
    pub grid: Option<&'a WorkspaceGrid>,
    pub limits: &'a Limits,
    pub tessellation: &'a TessellationSpec,
    pub boolean_seed: u64,
    pub mode: SelectionMode,
    pub selection: &'a BTreeSet<ObjectId>,
    pub printer: Option<&'a PrinterTwin>,
    pub objects: &'a BTreeMap<ObjectId, DesignObject>,
}

#[derive(Serialize)]
struct FileOut<'a> {
    format: &'static str,
    version: u32,
    room: &'a Room,
    grid: Option<&'a WorkspaceGrid>,
    limits: &'a Limits,
    tessellation: &'a TessellationSpec,
    boolean_seed: u64,
    selection_mode: SelectionMode,
    selection: &'a BTreeSet<ObjectId>,
    printer: Option<&'a PrinterTwin>,
    objects: Vec<&'a DesignObject>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectIn {
    id: ObjectId,
    solidity: Solidity,
    color: Color,
    transform: Transform,
    geometry: CsgTree,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileIn {
    format: String,
    version: u32,
    room: Room,
    grid: Option<WorkspaceGrid>,
    limits: Limits,
    tessellation: TessellationSpec,
    boolean_seed: u64,
    selection_mode: SelectionMode,
    selection: BTreeSet<ObjectId>,
    printer: Option<PrinterTwin>,
    objects: Vec<ObjectIn>,
}

/// Serialize to pretty JSON. Stable: saving a loaded document reproduces
/// the bytes it was loaded from.
pub fn save_document(doc: &SceneDocument) -> Vec<u8> {
    let p = doc.parts();
    let file = FileOut {
        format: DOCUMENT_FORMAT,
        version: DOCUMENT_VERSION,
        room: p.room,
        grid: p.grid,
        limits: p.limits,
        tessellation: p.tessellation,
        boolean_seed: p.boolean_seed,
        selection_mode: p.mode,
        selection: p.selection,
        printer: p.printer,
        objects: p.objects.values().collect(),
    };
    let mut out = serde_json::to_vec_pretty(&file).unwrap_or_else(|e| unreachable!("document serializes: {e}"));
    out.push(b'\n');
    out
}

/// Parse a document and rebuild every object's meshes. Fails as a whole:
/// no partial scene is returned.
pub fn load_document(bytes: &[u8]) -> Result<SceneDocument> {
    let file: FileIn = serde_json::from_slice(bytes)
        .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    if file.format != DOCUMENT_FORMAT {
        return Err(Error::parse("format", format!("expected `{DOCUMENT_FORMAT}`, found `{}`", file.format)));
    }
    if file.version != DOCUMENT_VERSION {
        return Err(Error::parse(
            "version",
            format!("unsupported document version {} (expected {DOCUMENT_VERSION})", file.version),
        ));
    }
    file.room.check()?;
    file.tessellation.check()?;
    let boolean = BooleanOptions {
        seed: file.boolean_seed,
        ..BooleanOptions::default()
    };
    let mut objects = Vec::with_capacity(file.objects.len());
    for (i, o) in file.objects.into_iter().enumerate() {
        let at = |e: Error| Error::parse(format!("objects[{i}]"), e.to_string());
        o.geometry.check().map_err(at)?;
        if !o.transform.is_valid() {
            return Err(at(Error::Validity("transform violates its invariants".into())));
        }
        let obj = DesignObject::build(o.id, o.geometry, o.transform, o.solidity, o.color, &file.tessellation, &boolean)
            .map_err(at)?;
        objects.push(obj);
    }
    SceneDocument::from_parts(Parts {
        room: file.room,
        grid: file.grid,
        limits: file.limits,
        tessellation: file.tessellation,
        boolean,
        mode: file.selection_mode,
        selection: file.selection,
        printer: file.printer,
        objects,
    })
}
