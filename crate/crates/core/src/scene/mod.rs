//! The design document: room, workspace grid, objects, selection, undo/redo
//! and persistence.

mod grid;
mod history;
mod object;
mod persist;
mod room;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub use grid::{round_half_away, WorkspaceGrid, DEFAULT_SPACING, LATTICE_TOLERANCE};
pub use history::{Command, CommandKind, History, Patch, DEFAULT_HISTORY_DEPTH};
pub use object::{DesignObject, ObjectId, RenderHint, DEFAULT_COLOR};
pub use persist::{load_document, save_document, DOCUMENT_FORMAT, DOCUMENT_VERSION};
pub use room::{
    default_room, load_room, pick_workspace, Boundaries, Boundary, BoundaryKind, Face, Furniture, Rect, Room,
    RoomFile, WorkspaceCandidate, ROOM_FORMAT_VERSION,
};

use crate::csg::{combine, BooleanOptions, CombineInput, CsgTree, Solidity};
use crate::fabrication::PrinterTwin;
use crate::geometry::{make_primitive, PrimitiveKind, TessellationSpec, Transform};
use crate::{Error, Result};

/// Edge length of a freshly created object, in meters.
pub const DEFAULT_OBJECT_SIZE: f64 = 0.10;
/// Height of the spawn point above the grid, in meters.
pub const SPAWN_HEIGHT: f64 = 0.15;
/// Offset of duplicates along the grid u axis, in meters.
pub const DUPLICATE_OFFSET: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_blocks: usize,
    pub max_vertices: usize,
    pub history_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_blocks: 300,
            max_vertices: 20_000,
            history_depth: DEFAULT_HISTORY_DEPTH,
        }
    }
}

/// Running totals checked against [`Limits`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    /// Primitive leaves over all objects.
    pub blocks: usize,
    /// Vertices of all baked meshes.
    pub vertices: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// Selecting replaces the selection.
    #[default]
    Single,
    /// Selecting toggles membership.
    Multiple,
}

impl std::str::FromStr for SelectionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(SelectionMode::Single),
            "multiple" => Ok(SelectionMode::Multiple),
            _ => Err(Error::Parameter(format!("unknown selection mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SceneDocument {
    room: Room,
    grid: Option<WorkspaceGrid>,
    objects: BTreeMap<ObjectId, DesignObject>,
    selection: BTreeSet<ObjectId>,
    mode: SelectionMode,
    printer: Option<PrinterTwin>,
    limits: Limits,
    tessellation: TessellationSpec,
    boolean: BooleanOptions,
    next_id: ObjectId,
    counters: Counters,
    history: History,
}

impl Default for SceneDocument {
    fn default() -> Self {
        SceneDocument::new(default_room())
    }
}

impl SceneDocument {
    pub fn new(room: Room) -> SceneDocument {
        SceneDocument::with_settings(room, Limits::default(), TessellationSpec::default(), BooleanOptions::default())
    }

    pub fn with_settings(
        room: Room,
        limits: Limits,
        tessellation: TessellationSpec,
        boolean: BooleanOptions,
    ) -> SceneDocument {
        SceneDocument {
            room,
            grid: None,
            objects: BTreeMap::new(),
            selection: BTreeSet::new(),
            mode: SelectionMode::Single,
            printer: None,
            limits,
            tessellation,
            boolean,
            next_id: 1,
            counters: Counters::default(),
            history: History::new(limits.history_depth),
        }
    }

    pub fn room(&self) -> &Room {
        &self.room
    }

    pub fn grid(&self) -> Option<&WorkspaceGrid> {
        self.grid.as_ref()
    }

    pub fn objects(&self) -> impl Iterator<Item = &DesignObject> {
        self.objects.values()
    }

    pub fn object_ids(&self) -> Vec<ObjectId> {
        self.objects.keys().copied().collect()
    }

    pub fn object(&self, id: ObjectId) -> Result<&DesignObject> {
        self.objects
            .get(&id)
            .ok_or_else(|| Error::NotFound(format!("object {id}")))
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn selection(&self) -> &BTreeSet<ObjectId> {
        &self.selection
    }

    pub fn selected_ids(&self) -> Vec<ObjectId> {
        self.selection.iter().copied().collect()
    }

    pub fn selection_mode(&self) -> SelectionMode {
        self.mode
    }

    pub fn printer(&self) -> Option<&PrinterTwin> {
        self.printer.as_ref()
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn tessellation(&self) -> &TessellationSpec {
        &self.tessellation
    }

    pub fn boolean_options(&self) -> &BooleanOptions {
        &self.boolean
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    /// Id the next created object will get.
    pub fn next_id(&self) -> ObjectId {
        self.next_id
    }

    pub fn is_placed_in_printer(&self, id: ObjectId) -> bool {
        self.printer.as_ref().is_some_and(|p| p.placed.contains(&id))
    }

    fn active_grid(&self) -> Result<&WorkspaceGrid> {
        self.grid
            .as_ref()
            .ok_or_else(|| Error::State("no workspace selected".into()))
    }

    fn require_ids(&self, ids: &[ObjectId]) -> Result<()> {
        for id in ids {
            self.object(*id)?;
        }
        Ok(())
    }

    /// Counters recomputed from the objects.
    pub fn recount(&self) -> Counters {
        self.objects.values().fold(Counters::default(), |c, o| Counters {
            blocks: c.blocks + o.block_count(),
            vertices: c.vertices + o.vertex_count(),
        })
    }

    fn check_capacity(&self, blocks: usize, vertices: usize) -> Result<()> {
        if self.counters.blocks + blocks > self.limits.max_blocks {
            return Err(Error::Capacity {
                what: "basic building blocks",
                limit: self.limits.max_blocks,
            });
        }
        if self.counters.vertices + vertices > self.limits.max_vertices {
            return Err(Error::Capacity {
                what: "vertices",
                limit: self.limits.max_vertices,
            });
        }
        Ok(())
    }

    /// Full consistency check, used by tests and after loading.
    pub fn check_invariants(&self) -> Result<()> {
        if let Some(id) = self.selection.iter().find(|id| !self.objects.contains_key(id)) {
            return Err(Error::Semantic(format!("selection holds missing object {id}")));
        }
        if self.recount() != self.counters {
            return Err(Error::Semantic(format!(
                "counters {:?} disagree with recount {:?}",
                self.counters,
                self.recount()
            )));
        }
        if let Some(p) = &self.printer {
            if let Some(id) = p.placed.iter().find(|id| !self.objects.contains_key(id)) {
                return Err(Error::Semantic(format!("printer holds missing object {id}")));
            }
        }
        if let Some(max) = self.objects.keys().next_back() {
            if *max >= self.next_id {
                return Err(Error::Semantic("next id would reuse an existing id".into()));
            }
        }
        if self.history.cursor() > self.history.len() {
            return Err(Error::Semantic("history cursor past the log".into()));
        }
        Ok(())
    }

    // ---- raw state changes -------------------------------------------------

    fn put_object(&mut self, id: ObjectId, obj: Option<DesignObject>) {
        if let Some(old) = self.objects.remove(&id) {
            self.counters.blocks -= old.block_count();
            self.counters.vertices -= old.vertex_count();
        }
        if let Some(new) = obj {
            self.counters.blocks += new.block_count();
            self.counters.vertices += new.vertex_count();
            self.next_id = self.next_id.max(id + 1);
            self.objects.insert(id, new);
        }
    }

    fn apply_patch(&mut self, patch: &Patch) {
        for (id, obj) in &patch.objects {
            self.put_object(*id, obj.clone());
        }
        if let Some(sel) = &patch.selection {
            self.selection = sel.clone();
        }
        // Selection changes are not history, so an undo can remove an
        // object picked after the command it reverts.
        let objects = &self.objects;
        self.selection.retain(|id| objects.contains_key(id));
        if let Some(grid) = &patch.grid {
            self.grid = grid.clone();
        }
        if let Some(printer) = &patch.printer {
            self.printer = printer.clone();
        }
    }

    /// Current values of everything `patch` would overwrite.
    fn snapshot_of(&self, patch: &Patch) -> Patch {
        Patch {
            objects: patch
                .objects
                .iter()
                .map(|(id, _)| (*id, self.objects.get(id).cloned()))
                .collect(),
            selection: patch.selection.as_ref().map(|_| self.selection.clone()),
            grid: patch.grid.as_ref().map(|_| self.grid.clone()),
            printer: patch.printer.as_ref().map(|_| self.printer.clone()),
        }
    }

    /// Removed objects also leave the selection and the printer.
    fn close_patch(&self, mut patch: Patch) -> Patch {
        let removed: BTreeSet<ObjectId> = patch
            .objects
            .iter()
            .filter(|(_, o)| o.is_none())
            .map(|(id, _)| *id)
            .collect();
        if removed.is_empty() {
            return patch;
        }
        let sel = patch.selection.clone().unwrap_or_else(|| self.selection.clone());
        if sel.iter().any(|id| removed.contains(id)) {
            patch.selection = Some(sel.into_iter().filter(|id| !removed.contains(id)).collect());
        }
        let printer = patch.printer.clone().unwrap_or_else(|| self.printer.clone());
        if let Some(mut p) = printer {
            if p.placed.iter().any(|id| removed.contains(id)) {
                p.placed.retain(|id| !removed.contains(id));
                patch.printer = Some(Some(p));
            }
        }
        patch
    }

    /// Apply `patch` as one undoable command.
    pub(crate) fn commit(&mut self, kind: CommandKind, patch: Patch) {
        let after = self.close_patch(patch);
        let before = self.snapshot_of(&after);
        self.apply_patch(&after);
        self.history.push(Command { kind, before, after });
    }

    /// Record a command whose effect is already in place (drag sessions).
    pub(crate) fn record(&mut self, kind: CommandKind, before: Patch, after: Patch) {
        self.history.push(Command { kind, before, after });
    }

    /// Swap objects in place without touching history (live drag preview).
    pub(crate) fn preview_objects(&mut self, objects: Vec<DesignObject>) {
        for o in objects {
            self.put_object(o.id, Some(o));
        }
    }

    pub fn undo(&mut self) -> Result<()> {
        let cmd = self.history.step_back().cloned().ok_or(Error::Boundary("undo"))?;
        self.apply_patch(&cmd.before);
        Ok(())
    }

    pub fn redo(&mut self) -> Result<()> {
        let cmd = self.history.step_forward().cloned().ok_or(Error::Boundary("redo"))?;
        self.apply_patch(&cmd.after);
        Ok(())
    }

    // ---- operations --------------------------------------------------------

    /// Overlay a grid on the candidate face.
    pub fn select_workspace(&mut self, candidate: &WorkspaceCandidate, spacing: f64, offset: f64) -> Result<&WorkspaceGrid> {
        let mut grid = WorkspaceGrid::on_face(candidate, spacing, offset)?;
        if let Some(old) = &self.grid {
            grid.occlusion_hint = old.occlusion_hint;
            grid.color = old.color;
        }
        self.commit(
            CommandKind::Grid,
            Patch {
                grid: Some(Some(grid)),
                ..Patch::default()
            },
        );
        self.active_grid()
    }

    /// Toggle the depth-occlusion display hint of the active grid.
    pub fn set_occlusion_hint(&mut self, on: bool) -> Result<()> {
        let mut grid = self.active_grid()?.clone();
        if grid.occlusion_hint == on {
            return Ok(());
        }
        grid.occlusion_hint = on;
        self.commit(
            CommandKind::Grid,
            Patch {
                grid: Some(Some(grid)),
                ..Patch::default()
            },
        );
        Ok(())
    }

    /// Seed the boolean jitter. Only an empty document may be reseeded, so
    /// every stored object was combined under the seed that gets saved.
    pub fn set_boolean_seed(&mut self, seed: u64) -> Result<()> {
        if !self.objects.is_empty() || !self.history.is_empty() {
            return Err(Error::State("the boolean seed can only be set on a fresh document".into()));
        }
        self.boolean.seed = seed;
        Ok(())
    }

    /// Spawn point for new objects: above the middle of the grid face.
    pub fn spawn_point(&self) -> Result<nalgebra::Point3<f64>> {
        let g = self.active_grid()?;
        Ok(g.center() + g.normal * SPAWN_HEIGHT)
    }

    /// New solid primitive of the default size at the spawn point; it
    /// becomes the selection in single mode and joins it in multiple mode.
    pub fn create_object(&mut self, kind: PrimitiveKind) -> Result<ObjectId> {
        let at = self.spawn_point()?;
        let local = make_primitive(kind, &self.tessellation)?;
        self.check_capacity(1, local.vertex_count())?;
        let id = self.next_id;
        let transform = Transform::new(at.coords, Default::default(), Vector3::repeat(DEFAULT_OBJECT_SIZE));
        let obj = DesignObject::with_local(
            id,
            CsgTree::leaf(kind),
            transform,
            Solidity::Solid,
            DEFAULT_COLOR,
            Arc::new(local),
        );
        self.commit(
            CommandKind::Create,
            Patch {
                objects: vec![(id, Some(obj))],
                selection: Some(self.selection_after_adding(&[id])),
                ..Patch::default()
            },
        );
        Ok(id)
    }

    fn selection_after_adding(&self, ids: &[ObjectId]) -> BTreeSet<ObjectId> {
        match self.mode {
            SelectionMode::Single => ids.iter().copied().collect(),
            SelectionMode::Multiple => self.selection.iter().chain(ids).copied().collect(),
        }
    }

    pub fn set_selection_mode(&mut self, mode: SelectionMode) {
        self.mode = mode;
    }

    /// Single mode replaces the selection; multiple mode toggles `id`.
    /// Objects resting in the printer join only through single selection.
    pub fn select(&mut self, id: ObjectId) -> Result<()> {
        self.object(id)?;
        match self.mode {
            SelectionMode::Single => {
                self.selection = BTreeSet::from([id]);
            }
            SelectionMode::Multiple => {
                if !self.selection.remove(&id) {
                    if self.is_placed_in_printer(id) {
                        return Err(Error::State(format!(
                            "object {id} sits in the printer and cannot join a multiple selection"
                        )));
                    }
                    self.selection.insert(id);
                }
            }
        }
        Ok(())
    }

    pub fn deselect_all(&mut self) {
        self.selection.clear();
    }

    /// Every object except those resting in the printer twin.
    pub fn select_all(&mut self) {
        self.selection = self
            .objects
            .keys()
            .copied()
            .filter(|id| !self.is_placed_in_printer(*id))
            .collect();
    }

    pub fn set_selection(&mut self, ids: &[ObjectId]) -> Result<()> {
        self.require_ids(ids)?;
        self.selection = ids.iter().copied().collect();
        Ok(())
    }

    pub fn set_solidity(&mut self, ids: &[ObjectId], solidity: Solidity) -> Result<()> {
        self.require_ids(ids)?;
        let objects = ids
            .iter()
            .filter_map(|id| self.objects.get(id))
            .filter(|o| o.solidity != solidity)
            .map(|o| {
                let mut n = o.clone();
                n.solidity = solidity;
                (o.id, Some(n))
            })
            .collect::<Vec<_>>();
        if objects.is_empty() {
            return Ok(());
        }
        self.commit(
            CommandKind::Solidity,
            Patch {
                objects,
                ..Patch::default()
            },
        );
        Ok(())
    }

    pub fn set_color(&mut self, ids: &[ObjectId], color: [u8; 3]) -> Result<()> {
        self.require_ids(ids)?;
        let objects = ids
            .iter()
            .filter_map(|id| self.objects.get(id))
            .map(|o| {
                let mut n = o.clone();
                n.color = color;
                (o.id, Some(n))
            })
            .collect();
        self.commit(
            CommandKind::Solidity,
            Patch {
                objects,
                ..Patch::default()
            },
        );
        Ok(())
    }

    /// Copies shifted along the grid u axis (world x without a grid). The
    /// copies become the selection.
    pub fn duplicate(&mut self, ids: &[ObjectId]) -> Result<Vec<ObjectId>> {
        if ids.is_empty() {
            return Err(Error::Parameter("nothing to duplicate".into()));
        }
        self.require_ids(ids)?;
        let unique: BTreeSet<ObjectId> = ids.iter().copied().collect();
        let (blocks, vertices) = unique.iter().fold((0, 0), |(b, v), id| {
            let o = &self.objects[id];
            (b + o.block_count(), v + o.vertex_count())
        });
        self.check_capacity(blocks, vertices)?;
        let shift = self.grid.as_ref().map_or(Vector3::x(), |g| g.u) * DUPLICATE_OFFSET;
        let mut objects = Vec::new();
        let mut new_ids = Vec::new();
        for (k, id) in unique.iter().enumerate() {
            let src = &self.objects[id];
            let new_id = self.next_id + k as ObjectId;
            let mut t = src.transform;
            t.translation += shift;
            let mut copy = src.with_transform(t);
            copy.id = new_id;
            objects.push((new_id, Some(copy)));
            new_ids.push(new_id);
        }
        self.commit(
            CommandKind::Duplicate,
            Patch {
                objects,
                selection: Some(new_ids.iter().copied().collect()),
                ..Patch::default()
            },
        );
        Ok(new_ids)
    }

    pub fn delete(&mut self, ids: &[ObjectId]) -> Result<()> {
        self.require_ids(ids)?;
        let unique: BTreeSet<ObjectId> = ids.iter().copied().collect();
        if unique.is_empty() {
            return Ok(());
        }
        self.commit(
            CommandKind::Delete,
            Patch {
                objects: unique.into_iter().map(|id| (id, None)).collect(),
                ..Patch::default()
            },
        );
        Ok(())
    }

    /// Union the solids among `ids`, subtract the holes, and replace them
    /// with one solid object. Nothing changes on error.
    pub fn combine(&mut self, ids: &[ObjectId]) -> Result<ObjectId> {
        let unique: BTreeSet<ObjectId> = ids.iter().copied().collect();
        if unique.is_empty() {
            return Err(Error::Parameter("nothing selected to combine".into()));
        }
        self.require_ids(ids)?;
        let inputs: Vec<CombineInput<'_>> = unique
            .iter()
            .map(|id| {
                let o = &self.objects[id];
                CombineInput {
                    mesh: &o.baked,
                    geometry: &o.geometry,
                    transform: &o.transform,
                    solidity: o.solidity,
                    color: o.color,
                    sequence: o.id,
                }
            })
            .collect();
        let out = combine(&inputs, &self.boolean)?;
        let id = self.next_id;
        let obj = DesignObject::with_local(
            id,
            out.tree,
            Transform::identity(),
            Solidity::Solid,
            out.color,
            Arc::new(out.mesh),
        );
        let mut objects: Vec<(ObjectId, Option<DesignObject>)> = unique.iter().map(|i| (*i, None)).collect();
        objects.push((id, Some(obj)));
        let mut patch = Patch {
            objects,
            selection: Some(BTreeSet::from([id])),
            ..Patch::default()
        };
        if let Some(p) = &self.printer {
            if p.placed.iter().any(|i| unique.contains(i)) {
                let mut p = p.clone();
                p.placed.retain(|i| !unique.contains(i));
                p.placed.push(id);
                patch.printer = Some(Some(p));
            }
        }
        self.commit(CommandKind::Combine, patch);
        Ok(id)
    }

    /// Replace whole objects as one undoable command.
    pub(crate) fn replace_objects(&mut self, kind: CommandKind, objects: Vec<DesignObject>) {
        if objects.is_empty() {
            return;
        }
        self.commit(
            kind,
            Patch {
                objects: objects.into_iter().map(|o| (o.id, Some(o))).collect(),
                ..Patch::default()
            },
        );
    }

    pub(crate) fn set_printer(&mut self, printer: Option<PrinterTwin>, extra: Vec<(ObjectId, Option<DesignObject>)>) {
        self.commit(
            CommandKind::Printer,
            Patch {
                objects: extra,
                printer: Some(printer),
                ..Patch::default()
            },
        );
    }

    /// Capacity check for adding meshes outside the create path.
    pub(crate) fn ensure_capacity(&self, blocks: usize, vertices: usize) -> Result<()> {
        self.check_capacity(blocks, vertices)
    }

    pub(crate) fn allocate_ids(&self, n: usize) -> Vec<ObjectId> {
        (0..n as ObjectId).map(|k| self.next_id + k).collect()
    }

    pub(crate) fn from_parts(parts: persist::Parts) -> Result<SceneDocument> {
        let mut doc = SceneDocument::with_settings(parts.room, parts.limits, parts.tessellation, parts.boolean);
        doc.grid = parts.grid;
        doc.mode = parts.mode;
        for o in parts.objects {
            if doc.objects.contains_key(&o.id) {
                return Err(Error::parse("objects", format!("duplicate object id {}", o.id)));
            }
            doc.put_object(o.id, Some(o));
        }
        doc.selection = parts.selection;
        doc.printer = parts.printer;
        doc.check_invariants()
            .map_err(|e| Error::parse("document", e.to_string()))?;
        Ok(doc)
    }

    pub(crate) fn parts(&self) -> persist::PartsRef<'_> {
        persist::PartsRef {
            room: &self.room,
            grid: self.grid.as_ref(),
            limits: &self.limits,
            tessellation: &self.tessellation,
            boolean_seed: self.boolean.seed,
            mode: self.mode,
            selection: &self.selection,
            printer: self.printer.as_ref(),
            objects: &self.objects,
        }
    }
}

#[cfg(test)]
mod tests;
