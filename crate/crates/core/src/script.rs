//! Design commands shared by the line-oriented script format and the JSON
//! service API, plus the session that executes them against a scene.
//!
//! Script grammar: one command per line, `#` starts a comment, tokens are
//! separated by whitespace. Lengths are meters unless suffixed with `mm`,
//! `cm` or `m`; angles are degrees. Object ids are integers or `last`, the
//! most recently created, duplicated or combined object. See
//! `docs/script.md` for the full list.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::csg::Solidity;
use crate::fabrication::{
    drop_into_printer, make_printer_twin, set_printer_addresses, PrinterPresets, PrinterTwin, TwinSpec,
};
use crate::geometry::{Axis, PrimitiveKind};
use crate::manipulation::{
    manipulation_box, parametric_resize, ruler_measure, DragSession, Handle, ManipulationBox, SnapMode,
};
use crate::scene::{pick_workspace, ObjectId, SceneDocument, SelectionMode, DEFAULT_SPACING};
use crate::{Error, Result};

/// An object id, or the most recently produced object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IdRef {
    Id(ObjectId),
    Last(LastId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LastId {
    Last,
}

impl FromStr for IdRef {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "last" {
            return Ok(IdRef::Last(LastId::Last));
        }
        s.parse()
            .map(IdRef::Id)
            .map_err(|_| Error::Parameter(format!("`{s}` is not an object id")))
    }
}

/// One scene, manipulation or fabrication operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    /// Use a labelled room face as the workspace.
    Workspace {
        label: String,
        #[serde(default)]
        spacing: Option<f64>,
        #[serde(default)]
        offset: Option<f64>,
    },
    /// Use the face hit by a ray as the workspace.
    Pick {
        origin: [f64; 3],
        direction: [f64; 3],
        #[serde(default)]
        spacing: Option<f64>,
        #[serde(default)]
        offset: Option<f64>,
    },
    Occlusion { on: bool },
    Seed { seed: u64 },
    Create { kind: PrimitiveKind },
    Mode { mode: SelectionMode },
    Select { ids: Vec<IdRef> },
    SelectAll,
    DeselectAll,
    Solid {
        #[serde(default)]
        ids: Option<Vec<IdRef>>,
    },
    Hole {
        #[serde(default)]
        ids: Option<Vec<IdRef>>,
    },
    Color { rgb: [u8; 3] },
    /// Drag the move handle by `delta`.
    Move {
        delta: [f64; 3],
        #[serde(default)]
        snap: bool,
    },
    Rotate {
        axis: Axis,
        degrees: f64,
        #[serde(default)]
        snap: bool,
    },
    /// Drag corner `index` by `delta`.
    Corner {
        index: u8,
        delta: [f64; 3],
        #[serde(default)]
        uniform: bool,
        #[serde(default)]
        snap: bool,
    },
    Resize { axis: Axis, length: f64 },
    Duplicate,
    Delete,
    Combine,
    Undo,
    Redo,
    Printer { spec: TwinSpec },
    PrinterAddress {
        #[serde(default)]
        server: Option<String>,
        #[serde(default)]
        printer: Option<String>,
    },
    Drop,
    Ruler { from: [f64; 3], to: [f64; 3] },
    /// Current manipulation box of the selection.
    Box,
    DragBegin {
        handle: Handle,
        #[serde(default)]
        grab: Option<[f64; 3]>,
    },
    DragMove {
        target: [f64; 3],
        #[serde(default)]
        snap: bool,
    },
    DragRotate {
        degrees: f64,
        #[serde(default)]
        snap: bool,
    },
    DragCorner {
        target: [f64; 3],
        #[serde(default)]
        uniform: bool,
        #[serde(default)]
        snap: bool,
    },
    DragCommit,
    DragCancel,
}

impl Command {
    /// Whether the command can change the document.
    pub fn mutates(&self) -> bool {
        !matches!(self, Command::Ruler { .. } | Command::Box)
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    Done,
    Ids { ids: Vec<ObjectId> },
    Delta { delta: [f64; 3] },
    Angle { degrees: f64 },
    Factors { factors: [f64; 3] },
    Measurement { meters: f64, label: String },
    Box { manipulation: ManipulationBox },
    Twin { twin: PrinterTwin },
    Committed { changed: bool },
}

/// A scene plus the state that lives between commands.
pub struct Session {
    pub scene: SceneDocument,
    pub presets: PrinterPresets,
    drag: Option<DragSession>,
    last: Option<ObjectId>,
}

fn point(a: [f64; 3]) -> Point3<f64> {
    Point3::new(a[0], a[1], a[2])
}

fn active_drag(drag: &Option<DragSession>) -> Result<&DragSession> {
    drag.as_ref().ok_or_else(|| Error::State("no drag in progress".into()))
}

fn vector(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

impl Session {
    pub fn new(scene: SceneDocument) -> Session {
        Session::with_presets(scene, PrinterPresets::builtin())
    }

    pub fn with_presets(scene: SceneDocument, presets: PrinterPresets) -> Session {
        Session {
            scene,
            presets,
            drag: None,
            last: None,
        }
    }

    pub fn drag_active(&self) -> bool {
        self.drag.is_some()
    }

    fn resolve(&self, ids: &[IdRef]) -> Result<Vec<ObjectId>> {
        ids.iter()
            .map(|r| match r {
                IdRef::Id(id) => Ok(*id),
                IdRef::Last(_) => self
                    .last
                    .ok_or_else(|| Error::State("`last` used before any object was produced".into())),
            })
            .collect()
    }

    fn targets(&self, ids: &Option<Vec<IdRef>>) -> Result<Vec<ObjectId>> {
        match ids {
            Some(ids) => self.resolve(ids),
            None => Ok(self.scene.selected_ids()),
        }
    }

    fn selection(&self) -> Result<Vec<ObjectId>> {
        let ids = self.scene.selected_ids();
        if ids.is_empty() {
            return Err(Error::State("nothing is selected".into()));
        }
        Ok(ids)
    }

    /// One-shot drag: begin, apply, commit.
    fn drag_once<T>(
        &mut self,
        handle: Handle,
        apply: impl FnOnce(&DragSession, &mut SceneDocument) -> Result<T>,
    ) -> Result<T> {
        let d = DragSession::begin(&self.scene, handle, None)?;
        match apply(&d, &mut self.scene) {
            Ok(v) => {
                d.commit(&mut self.scene)?;
                Ok(v)
            }
            Err(e) => {
                d.cancel(&mut self.scene);
                Err(e)
            }
        }
    }

    pub fn execute(&mut self, cmd: &Command) -> Result<Outcome> {
        let drag_op = matches!(
            cmd,
            Command::DragMove { .. }
                | Command::DragRotate { .. }
                | Command::DragCorner { .. }
                | Command::DragCommit
                | Command::DragCancel
        );
        if self.drag.is_some() && !drag_op && cmd.mutates() {
            return Err(Error::State("a drag is in progress; commit or cancel it first".into()));
        }
        let scene = &mut self.scene;
        match cmd {
            Command::Workspace { label, spacing, offset } => {
                let face = scene.room().face_by_label(label)?;
                scene.select_workspace(&face, spacing.unwrap_or(DEFAULT_SPACING), offset.unwrap_or(0.0))?;
            }
            Command::Pick {
                origin,
                direction,
                spacing,
                offset,
            } => {
                let face = pick_workspace(scene.room(), point(*origin), vector(*direction))?
                    .ok_or_else(|| Error::NotFound("no workspace face along the ray".into()))?;
                scene.select_workspace(&face, spacing.unwrap_or(DEFAULT_SPACING), offset.unwrap_or(0.0))?;
            }
            Command::Occlusion { on } => scene.set_occlusion_hint(*on)?,
            Command::Seed { seed } => scene.set_boolean_seed(*seed)?,
            Command::Create { kind } => {
                let id = scene.create_object(*kind)?;
                self.last = Some(id);
                return Ok(Outcome::Ids { ids: vec![id] });
            }
            Command::Mode { mode } => scene.set_selection_mode(*mode),
            Command::Select { ids } => {
                for id in self.resolve(ids)? {
                    self.scene.select(id)?;
                }
            }
            Command::SelectAll => scene.select_all(),
            Command::DeselectAll => scene.deselect_all(),
            Command::Solid { ids } => {
                let ids = self.targets(ids)?;
                self.scene.set_solidity(&ids, Solidity::Solid)?;
            }
            Command::Hole { ids } => {
                let ids = self.targets(ids)?;
                self.scene.set_solidity(&ids, Solidity::Hole)?;
            }
            Command::Color { rgb } => {
                let ids = self.selection()?;
                self.scene.set_color(&ids, *rgb)?;
            }
            Command::Move { delta, snap } => {
                let (delta, snap) = (vector(*delta), SnapMode::from_flag(*snap));
                let moved = self.drag_once(Handle::Move, |d, s| d.apply_move(s, d.grab_start + delta, snap))?;
                return Ok(Outcome::Delta { delta: moved.into() });
            }
            Command::Rotate { axis, degrees, snap } => {
                let (raw, snap) = (degrees.to_radians(), SnapMode::from_flag(*snap));
                let angle = self.drag_once(Handle::Rotate { axis: *axis }, |d, s| d.apply_rotation(s, raw, snap))?;
                return Ok(Outcome::Angle {
                    degrees: angle.to_degrees(),
                });
            }
            Command::Corner {
                index,
                delta,
                uniform,
                snap,
            } => {
                let (delta, snap, uniform) = (vector(*delta), SnapMode::from_flag(*snap), *uniform);
                let f = self.drag_once(Handle::Corner { index: *index }, |d, s| {
                    d.apply_scale_corner(s, d.grab_start + delta, uniform, snap)
                })?;
                return Ok(Outcome::Factors { factors: f.into() });
            }
            Command::Resize { axis, length } => {
                let f = parametric_resize(scene, *axis, *length)?;
                let mut factors = [1.0; 3];
                factors[axis.index()] = f;
                return Ok(Outcome::Factors { factors });
            }
            Command::Duplicate => {
                let ids = self.selection()?;
                let copies = self.scene.duplicate(&ids)?;
                self.last = copies.last().copied();
                return Ok(Outcome::Ids { ids: copies });
            }
            Command::Delete => {
                let ids = self.selection()?;
                self.scene.delete(&ids)?;
            }
            Command::Combine => {
                let ids = self.selection()?;
                let id = self.scene.combine(&ids)?;
                self.last = Some(id);
                return Ok(Outcome::Ids { ids: vec![id] });
            }
            Command::Undo => scene.undo()?,
            Command::Redo => scene.redo()?,
            Command::Printer { spec } => {
                let twin = make_printer_twin(scene, spec, &self.presets)?;
                return Ok(Outcome::Twin { twin });
            }
            Command::PrinterAddress { server, printer } => {
                set_printer_addresses(scene, server.clone(), printer.clone())?;
            }
            Command::Drop => {
                let ids = self.selection()?;
                let copies = drop_into_printer(&mut self.scene, &ids)?;
                return Ok(Outcome::Ids { ids: copies });
            }
            Command::Ruler { from, to } => {
                let m = ruler_measure(&point(*from), &point(*to));
                return Ok(Outcome::Measurement {
                    meters: m.meters,
                    label: m.label(),
                });
            }
            Command::Box => {
                return Ok(Outcome::Box {
                    manipulation: manipulation_box(scene)?,
                })
            }
            Command::DragBegin { handle, grab } => {
                if self.drag.is_some() {
                    return Err(Error::State("a drag is already in progress".into()));
                }
                self.drag = Some(DragSession::begin(scene, *handle, grab.map(point))?);
            }
            Command::DragMove { target, snap } => {
                let d = active_drag(&self.drag)?;
                let delta = d.apply_move(&mut self.scene, point(*target), SnapMode::from_flag(*snap))?;
                return Ok(Outcome::Delta { delta: delta.into() });
            }
            Command::DragRotate { degrees, snap } => {
                let d = active_drag(&self.drag)?;
                let a = d.apply_rotation(&mut self.scene, degrees.to_radians(), SnapMode::from_flag(*snap))?;
                return Ok(Outcome::Angle { degrees: a.to_degrees() });
            }
            Command::DragCorner { target, uniform, snap } => {
                let d = active_drag(&self.drag)?;
                let f = d.apply_scale_corner(&mut self.scene, point(*target), *uniform, SnapMode::from_flag(*snap))?;
                return Ok(Outcome::Factors { factors: f.into() });
            }
            Command::DragCommit => {
                let d = self.drag.take().ok_or_else(|| Error::State("no drag in progress".into()))?;
                let changed = d.commit(&mut self.scene)?;
                return Ok(Outcome::Committed { changed });
            }
            Command::DragCancel => {
                let d = self.drag.take().ok_or_else(|| Error::State("no drag in progress".into()))?;
                d.cancel(&mut self.scene);
            }
        }
        Ok(Outcome::Done)
    }
}

/// A command and the script line it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptLine {
    pub line: usize,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignScript {
    pub lines: Vec<ScriptLine>,
}

/// A failure tied to the script line that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptError {
    pub line: usize,
    pub error: Error,
}

impl fmt::Display for ScriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.error)
    }
}

impl std::error::Error for ScriptError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Length in meters; `mm`, `cm` and `m` suffixes are honored.
pub fn parse_length(tok: &str) -> Result<f64> {
    let (num, scale) = if let Some(n) = tok.strip_suffix("mm") {
        (n, 1e-3)
    } else if let Some(n) = tok.strip_suffix("cm") {
        (n, 1e-2)
    } else if let Some(n) = tok.strip_suffix('m') {
        (n, 1.0)
    } else {
        (tok, 1.0)
    };
    let v: f64 = num
        .parse()
        .map_err(|_| Error::Parameter(format!("`{tok}` is not a length")))?;
    if !v.is_finite() {
        return Err(Error::Parameter(format!("`{tok}` is not finite")));
    }
    Ok(v * scale)
}

fn parse_number<T: FromStr>(tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Parameter(format!("`{tok}` is not a valid {what}")))
}

fn parse_angle(tok: &str) -> Result<f64> {
    let v: f64 = parse_number(tok.strip_suffix("deg").unwrap_or(tok), "angle")?;
    if !v.is_finite() {
        return Err(Error::Parameter(format!("`{tok}` is not finite")));
    }
    Ok(v)
}

/// Cursor over one line's tokens.
struct Tokens<'a> {
    words: Vec<&'a str>,
    at: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        let w = self
            .words
            .get(self.at)
            .ok_or_else(|| Error::Parameter(format!("missing {what}")))?;
        self.at += 1;
        Ok(w)
    }

    fn lengths3(&mut self) -> Result<[f64; 3]> {
        Ok([
            parse_length(self.next("x")?)?,
            parse_length(self.next("y")?)?,
            parse_length(self.next("z")?)?,
        ])
    }

    fn numbers3(&mut self) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for (k, c) in out.iter_mut().enumerate() {
            *c = parse_number(self.next(["x", "y", "z"][k])?, "number")?;
        }
        Ok(out)
    }

    fn rest(&mut self) -> Vec<&'a str> {
        let r = self.words[self.at..].to_vec();
        self.at = self.words.len();
        r
    }

    /// Trailing flags, each allowed once and only from `allowed`.
    fn flags(&mut self, allowed: &[&str]) -> Result<Vec<&'a str>> {
        let rest = self.rest();
        for (i, f) in rest.iter().enumerate() {
            if !allowed.contains(f) {
                return Err(Error::Parameter(format!("unexpected `{f}`")));
            }
            if rest[..i].contains(f) {
                return Err(Error::Parameter(format!("`{f}` given twice")));
            }
        }
        Ok(rest)
    }

    /// Optional `spacing <len>` and `offset <len>` pairs.
    fn grid_options(&mut self) -> Result<(Option<f64>, Option<f64>)> {
        let (mut spacing, mut offset) = (None, None);
        while self.at < self.words.len() {
            match self.next("option")? {
                "spacing" if spacing.is_none() => spacing = Some(parse_length(self.next("spacing")?)?),
                "offset" if offset.is_none() => offset = Some(parse_length(self.next("offset")?)?),
                w => return Err(Error::Parameter(format!("unexpected `{w}`"))),
            }
        }
        Ok((spacing, offset))
    }

    fn done(&self) -> Result<()> {
        match self.words.get(self.at) {
            Some(w) => Err(Error::Parameter(format!("unexpected `{w}`"))),
            None => Ok(()),
        }
    }
}

fn parse_ids(words: Vec<&str>) -> Result<Vec<IdRef>> {
    words.into_iter().map(IdRef::from_str).collect()
}

/// Parse one non-empty, comment-free line.
pub fn parse_command(text: &str) -> Result<Command> {
    let mut t = Tokens {
        words: text.split_whitespace().collect(),
        at: 0,
    };
    let op = t.next("command")?;
    let cmd = match op {
        "workspace" => {
            let label = t.next("face label")?.to_string();
            let (spacing, offset) = t.grid_options()?;
            Command::Workspace { label, spacing, offset }
        }
        "pick" => {
            let origin = t.lengths3()?;
            let direction = t.numbers3()?;
            let (spacing, offset) = t.grid_options()?;
            Command::Pick {
                origin,
                direction,
                spacing,
                offset,
            }
        }
        "occlusion" => Command::Occlusion {
            on: match t.next("on|off")? {
                "on" => true,
                "off" => false,
                w => return Err(Error::Parameter(format!("expected on or off, got `{w}`"))),
            },
        },
        "seed" => Command::Seed {
            seed: parse_number(t.next("seed")?, "seed")?,
        },
        "create" => Command::Create {
            kind: t.next("primitive")?.parse()?,
        },
        "mode" => Command::Mode {
            mode: t.next("single|multiple")?.parse()?,
        },
        "select" => {
            let ids = parse_ids(t.rest())?;
            if ids.is_empty() {
                return Err(Error::Parameter("missing object id".into()));
            }
            Command::Select { ids }
        }
        "select-all" => Command::SelectAll,
        "deselect-all" => Command::DeselectAll,
        "solid" | "hole" => {
            let ids = parse_ids(t.rest())?;
            let ids = (!ids.is_empty()).then_some(ids);
            if op == "solid" {
                Command::Solid { ids }
            } else {
                Command::Hole { ids }
            }
        }
        "color" => {
            let mut rgb = [0u8; 3];
            for c in &mut rgb {
                *c = parse_number(t.next("color channel")?, "color channel (0-255)")?;
            }
            Command::Color { rgb }
        }
        "move" => {
            let delta = t.lengths3()?;
            let snap = !t.flags(&["snap"])?.is_empty();
            Command::Move { delta, snap }
        }
        "rotate" => {
            let axis = t.next("axis")?.parse()?;
            let degrees = parse_angle(t.next("angle")?)?;
            let snap = !t.flags(&["snap"])?.is_empty();
            Command::Rotate { axis, degrees, snap }
        }
        "corner" => {
            let index: u8 = parse_number(t.next("corner index")?, "corner index (0-7)")?;
            let delta = t.lengths3()?;
            let flags = t.flags(&["uniform", "snap"])?;
            Command::Corner {
                index,
                delta,
                uniform: flags.contains(&"uniform"),
                snap: flags.contains(&"snap"),
            }
        }
        "resize" => Command::Resize {
            axis: t.next("axis")?.parse()?,
            length: parse_length(t.next("length")?)?,
        },
        "duplicate" => Command::Duplicate,
        "delete" => Command::Delete,
        "combine" => Command::Combine,
        "undo" => Command::Undo,
        "redo" => Command::Redo,
        "printer" => {
            let first = t.next("preset or `manual`")?;
            let spec = if first == "manual" {
                let name = t.next("printer name")?.to_string();
                let mut dims_mm = [0.0; 3];
                for d in &mut dims_mm {
                    *d = parse_length(t.next("dimension")?)? * 1000.0;
                }
                TwinSpec::Manual { name, dims_mm }
            } else {
                TwinSpec::Preset(first.to_string())
            };
            Command::Printer { spec }
        }
        "printer-address" => {
            let mut server = None;
            let mut printer = None;
            while t.at < t.words.len() {
                match t.next("option")? {
                    "server" if server.is_none() => server = Some(t.next("server address")?.to_string()),
                    "printer" if printer.is_none() => printer = Some(t.next("printer address")?.to_string()),
                    w => return Err(Error::Parameter(format!("unexpected `{w}`"))),
                }
            }
            Command::PrinterAddress { server, printer }
        }
        "drop" => Command::Drop,
        "ruler" => Command::Ruler {
            from: t.lengths3()?,
            to: t.lengths3()?,
        },
        _ => return Err(Error::Parameter(format!("unknown command `{op}`"))),
    };
    t.done()?;
    Ok(cmd)
}

impl DesignScript {
    pub fn parse(text: &str) -> Result<DesignScript, ScriptError> {
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let command = parse_command(body).map_err(|error| ScriptError { line: i + 1, error })?;
            lines.push(ScriptLine { line: i + 1, command });
        }
        Ok(DesignScript { lines })
    }

    /// Execute every line, stopping at the first failure.
    pub fn run(&self, session: &mut Session) -> Result<(), ScriptError> {
        for l in &self.lines {
            session
                .execute(&l.command)
                .map_err(|error| ScriptError { line: l.line, error })?;
        }
        Ok(())
    }
}

/// Parse and replay `text` on a fresh session over `scene`.
pub fn replay(scene: SceneDocument, text: &str) -> Result<Session, ScriptError> {
    let script = DesignScript::parse(text)?;
    let mut session = Session::new(scene);
    script.run(&mut session)?;
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::save_document;

    #[test]
    fn lengths() {
        assert_eq!(parse_length("20cm").unwrap(), 0.2);
        assert_eq!(parse_length("5mm").unwrap(), 0.005);
        assert_eq!(parse_length("0.3").unwrap(), 0.3);
        assert_eq!(parse_length("2m").unwrap(), 2.0);
        assert!(parse_length("abc").is_err());
        assert!(parse_length("inf").is_err());
    }

    #[test]
    fn parses_every_command() {
        let text = "\
seed 3
workspace table spacing 2cm
pick 2 1.5 0.5 0 -1 0 offset 1mm
occlusion on
create cube   # trailing comment
mode multiple
select 1 last
select-all
deselect-all
hole
solid 1
color 255 0 0
move 0.01 0 0 snap
rotate y 37 snap
corner 7 1cm 1cm 1cm uniform snap
resize x 20cm
duplicate
delete
combine
undo
redo
printer ender3-v3-ke
printer manual box 200mm 200mm 180mm
printer-address server http://localhost:8080 printer mock://a
drop
ruler 0 0 0 0.2 0 0
";
        let s = DesignScript::parse(text).unwrap();
        assert_eq!(s.lines.len(), 26);
        assert_eq!(s.lines[4].line, 5);
        assert_eq!(
            s.lines[14].command,
            Command::Corner {
                index: 7,
                delta: [0.01, 0.01, 0.01],
                uniform: true,
                snap: true
            }
        );
        assert_eq!(
            s.lines[22].command,
            Command::Printer {
                spec: TwinSpec::Manual {
                    name: "box".into(),
                    dims_mm: [200.0, 200.0, 180.0]
                }
            }
        );
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = DesignScript::parse("workspace table\n\ncreate blob\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.to_string().starts_with("line 3:"));
        assert_eq!(DesignScript::parse("move 1 2").unwrap_err().line, 1);
        assert_eq!(DesignScript::parse("combine now").unwrap_err().line, 1);
        assert_eq!(DesignScript::parse("move 1 2 3 snap snap").unwrap_err().line, 1);
    }

    #[test]
    fn json_matches_script() {
        let cmd = parse_command("corner 3 0.01 0 0 snap").unwrap();
        let json = serde_json::to_string(&cmd).unwrap();
        assert_eq!(json, r#"{"op":"corner","index":3,"delta":[0.01,0.0,0.0],"uniform":false,"snap":true}"#);
        let back: Command = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cmd);
        let sel: Command = serde_json::from_str(r#"{"op":"select","ids":[1,"last"]}"#).unwrap();
        assert_eq!(sel, parse_command("select 1 last").unwrap());
        let c: Command = serde_json::from_str(r#"{"op":"create","kind":"triangular-prism"}"#).unwrap();
        assert_eq!(c, Command::Create { kind: PrimitiveKind::TriangularPrism });
    }

    #[test]
    fn create_then_combine() {
        let s = replay(SceneDocument::default(), "workspace table\ncreate cube\ncombine\n").unwrap();
        assert_eq!(s.scene.len(), 1);
    }

    #[test]
    fn unknown_select_fails_at_its_line() {
        let err = replay(SceneDocument::default(), "workspace table\ncreate cube\nselect 42\n")
            .err()
            .unwrap();
        assert_eq!(err.line, 3);
        assert!(matches!(err.error, Error::NotFound(_)));
    }

    #[test]
    fn replay_is_deterministic() {
        let text = "seed 9\nworkspace table\ncreate cube\ncreate sphere\nhole\nmove 0.03 0 0\nmode multiple\nselect 1\ncombine\n";
        let a = save_document(&replay(SceneDocument::default(), text).unwrap().scene);
        let b = save_document(&replay(SceneDocument::default(), text).unwrap().scene);
        assert_eq!(a, b);
    }

    #[test]
    fn drag_blocks_other_edits() {
        let mut s = replay(SceneDocument::default(), "workspace table\ncreate cube\n").unwrap();
        s.execute(&Command::DragBegin {
            handle: Handle::Move,
            grab: None,
        })
        .unwrap();
        assert!(matches!(s.execute(&Command::Create { kind: PrimitiveKind::Cube }), Err(Error::State(_))));
        assert!(s.execute(&Command::Box).is_ok());
        s.execute(&Command::DragMove {
            target: [2.0, 1.0, 0.5],
            snap: false,
        })
        .unwrap();
        assert_eq!(
            s.execute(&Command::DragCommit).unwrap(),
            Outcome::Committed { changed: true }
        );
        assert!(!s.drag_active());
    }
}
