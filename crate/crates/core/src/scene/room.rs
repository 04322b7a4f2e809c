//! Room description: boundary rectangles and furniture boxes, plus ray picking
//! of candidate workspaces.

use std::collections::BTreeSet;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{Axis, Box3};
use crate::{Error, Result};

pub const ROOM_FORMAT_VERSION: u32 = 1;

/// Tolerance for containment and flatness checks, in meters.
const ROOM_TOLERANCE: f64 = 1e-9;

/// A flat, axis-aligned rectangle: exactly one axis has zero extent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundaries {
    pub floor: Rect,
    pub ceiling: Rect,
    #[serde(default)]
    pub walls: Vec<Rect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Furniture {
    pub label: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Furniture {
    pub fn bounds(&self) -> Box3 {
        Box3::new(Point3::from(self.min), Point3::from(self.max))
    }
}

/// The on-disk room file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomFile {
    pub version: u32,
    pub units: String,
    pub boundaries: Boundaries,
    #[serde(default)]
    pub furniture: Vec<Furniture>,
}

/// Which kind of surface a boundary is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Floor,
    Ceiling,
    Wall,
}

/// A room boundary plane with its normal pointing into the room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub label: String,
    pub kind: BoundaryKind,
    pub axis: Axis,
    /// +1 or -1: sign of the inward normal along `axis`.
    pub sign: f64,
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

/// Validated room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub boundaries: Vec<Boundary>,
    pub furniture: Vec<Furniture>,
}

/// One face of a box or a boundary, as seen from the side a workspace grid
/// would sit on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub axis: Axis,
    /// +1 or -1: sign of the outward (grid-side) normal along `axis`.
    pub sign: f64,
    /// Face rectangle; `min[axis] == max[axis]`.
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Face {
    pub fn normal(&self) -> Vector3<f64> {
        self.axis.unit() * self.sign
    }

    /// Short name such as `+y` for a table top.
    pub fn name(&self) -> String {
        let s = if self.sign > 0.0 { '+' } else { '-' };
        format!("{s}{}", ["x", "y", "z"][self.axis.index()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceCandidate {
    pub label: String,
    pub face: Face,
    pub point: Point3<f64>,
    /// Ray parameter of the hit.
    pub distance: f64,
}

fn flat_axis(r: &Rect, what: &str) -> Result<Axis> {
    let flat: Vec<usize> = (0..3)
        .filter(|&i| (r.max[i] - r.min[i]).abs() <= ROOM_TOLERANCE)
        .collect();
    let positive = (0..3).all(|i| r.max[i] >= r.min[i] - ROOM_TOLERANCE);
    if flat.len() != 1 || !positive {
        return Err(Error::parse(
            format!("boundaries.{what}"),
            "a boundary must be a rectangle that is flat along exactly one axis",
        ));
    }
    Ok(Axis::from_index(flat[0]))
}

impl Room {
    /// All boundary extents together.
    pub fn extent(&self) -> Box3 {
        self.boundaries
            .iter()
            .fold(Box3::empty(), |b, r| b.union(&Box3::new(r.min, r.max)))
    }

    pub fn from_file(file: RoomFile) -> Result<Room> {
        if file.version != ROOM_FORMAT_VERSION {
            return Err(Error::parse(
                "version",
                format!("unsupported room file version {} (expected {ROOM_FORMAT_VERSION})", file.version),
            ));
        }
        if file.units != "m" {
            return Err(Error::parse("units", format!("unsupported units `{}` (expected \"m\")", file.units)));
        }
        let mut raw: Vec<(String, BoundaryKind, &Rect, String)> = vec![
            (
                file.boundaries.floor.label.clone().unwrap_or_else(|| "floor".into()),
                BoundaryKind::Floor,
                &file.boundaries.floor,
                "floor".into(),
            ),
            (
                file.boundaries.ceiling.label.clone().unwrap_or_else(|| "ceiling".into()),
                BoundaryKind::Ceiling,
                &file.boundaries.ceiling,
                "ceiling".into(),
            ),
        ];
        for (i, w) in file.boundaries.walls.iter().enumerate() {
            let label = w.label.clone().unwrap_or_else(|| format!("wall-{}", i + 1));
            raw.push((label, BoundaryKind::Wall, w, format!("walls[{i}]")));
        }
        let mut extent = Box3::empty();
        for (_, _, r, _) in &raw {
            extent = extent.union(&Box3::new(Point3::from(r.min), Point3::from(r.max)));
        }
        let center = extent.center();
        let mut boundaries = Vec::with_capacity(raw.len());
        for (label, kind, r, field) in raw {
            let axis = flat_axis(r, field.trim_start_matches("boundaries."))?;
            let i = axis.index();
            let sign = if center[i] >= r.min[i] { 1.0 } else { -1.0 };
            boundaries.push(Boundary {
                label,
                kind,
                axis,
                sign,
                min: Point3::from(r.min),
                max: Point3::from(r.max),
            });
        }
        for (i, f) in file.furniture.iter().enumerate() {
            if (0..3).any(|k| f.max[k] <= f.min[k]) {
                return Err(Error::parse(format!("furniture[{i}]"), "box must have positive size on every axis"));
            }
        }
        let room = Room {
            boundaries,
            furniture: file.furniture,
        };
        room.check()?;
        Ok(room)
    }

    /// Unique labels; furniture inside the boundary extents.
    pub fn check(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for label in self.boundaries.iter().map(|b| &b.label).chain(self.furniture.iter().map(|f| &f.label)) {
            if !seen.insert(label.as_str()) {
                return Err(Error::Semantic(format!("duplicate room label `{label}`")));
            }
        }
        let extent = self.extent();
        for f in &self.furniture {
            if !extent.contains_box(&f.bounds(), ROOM_TOLERANCE) {
                return Err(Error::Semantic(format!(
                    "furniture `{}` extends past the room boundaries",
                    f.label
                )));
            }
        }
        Ok(())
    }

    /// Every face a grid could be placed on, labeled.
    pub fn faces(&self) -> Vec<(String, Face)> {
        let mut out = Vec::new();
        for f in &self.furniture {
            for axis in Axis::ALL {
                for sign in [1.0, -1.0] {
                    let mut min = Point3::from(f.min);
                    let mut max = Point3::from(f.max);
                    let i = axis.index();
                    let at = if sign > 0.0 { f.max[i] } else { f.min[i] };
                    min[i] = at;
                    max[i] = at;
                    out.push((f.label.clone(), Face { axis, sign, min, max }));
                }
            }
        }
        for b in &self.boundaries {
            out.push((
                b.label.clone(),
                Face {
                    axis: b.axis,
                    sign: b.sign,
                    min: b.min,
                    max: b.max,
                },
            ));
        }
        out
    }

    /// The grid-side face of a labeled surface: the top of furniture, the
    /// inward side of a boundary.
    pub fn face_by_label(&self, label: &str) -> Result<WorkspaceCandidate> {
        let faces = self.faces();
        let face = faces
            .iter()
            .find(|(l, f)| {
                l == label
                    && (self.furniture.iter().all(|fu| fu.label != label) || (f.axis == Axis::Y && f.sign > 0.0))
            })
            .ok_or_else(|| Error::NotFound(format!("room surface `{label}`")))?;
        let point = Point3::from((face.1.min.coords + face.1.max.coords) * 0.5);
        Ok(WorkspaceCandidate {
            label: face.0.clone(),
            face: face.1.clone(),
            point,
            distance: 0.0,
        })
    }
}

/// Parse and validate a room file.
pub fn load_room(bytes: &[u8]) -> Result<Room> {
    let file: RoomFile = serde_json::from_slice(bytes)
        .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    Room::from_file(file)
}

/// Nearest surface hit by the ray. Only faces seen from their grid side
/// count, so a ray from inside a box never selects its inner walls.
pub fn pick_workspace(room: &Room, origin: Point3<f64>, direction: Vector3<f64>) -> Result<Option<WorkspaceCandidate>> {
    let len = direction.norm();
    if !(len.is_finite() && (len - 1.0).abs() <= 1e-6) {
        return Err(Error::Parameter("pick ray direction must be normalized".into()));
    }
    let mut best: Option<WorkspaceCandidate> = None;
    for (label, face) in room.faces() {
        let i = face.axis.index();
        let d = direction[i];
        if d * face.sign >= 0.0 {
            continue;
        }
        let t = (face.min[i] - origin[i]) / d;
        if t <= 0.0 || !t.is_finite() {
            continue;
        }
        let p = origin + direction * t;
        let inside = (0..3)
            .filter(|&k| k != i)
            .all(|k| p[k] >= face.min[k] - ROOM_TOLERANCE && p[k] <= face.max[k] + ROOM_TOLERANCE);
        if !inside {
            continue;
        }
        if best.as_ref().map_or(true, |b| t < b.distance) {
            let mut point = p;
            point[i] = face.min[i];
            best = Some(WorkspaceCandidate {
                label,
                face,
                point,
                distance: t,
            });
        }
    }
    Ok(best)
}

/// A 4 × 3 × 2.5 m room with a 1.2 × 0.6 m table, 0.75 m high.
pub fn default_room() -> Room {
    let file = RoomFile {
        version: ROOM_FORMAT_VERSION,
        units: "m".into(),
        boundaries: Boundaries {
            floor: Rect {
                label: None,
                min: [0.0, 0.0, 0.0],
                max: [4.0, 0.0, 3.0],
            },
            ceiling: Rect {
                label: None,
                min: [0.0, 2.5, 0.0],
                max: [4.0, 2.5, 3.0],
            },
            walls: vec![
                Rect {
                    label: Some("north-wall".into()),
                    min: [0.0, 0.0, 0.0],
                    max: [4.0, 2.5, 0.0],
                },
                Rect {
                    label: Some("south-wall".into()),
                    min: [0.0, 0.0, 3.0],
                    max: [4.0, 2.5, 3.0],
                },
                Rect {
                    label: Some("west-wall".into()),
                    min: [0.0, 0.0, 0.0],
                    max: [0.0, 2.5, 3.0],
                },
                Rect {
                    label: Some("east-wall".into()),
                    min: [4.0, 0.0, 0.0],
                    max: [4.0, 2.5, 3.0],
                },
            ],
        },
        furniture: vec![Furniture {
            label: "table".into(),
            min: [1.4, 0.0, 0.2],
            max: [2.6, 0.75, 0.8],
        }],
    };
    Room::from_file(file).unwrap_or_else(|e| unreachable!("built-in room is valid: {e}"))
}
