//! Manipulation box and drag sessions: free and snapped moves, knob
//! rotation, anchored corner scaling, numeric edge resize and the ruler.

use nalgebra::{Point3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{compute_aabb, Axis, Box3, Mesh, Transform, MIN_DIMENSION};
use crate::scene::{round_half_away, CommandKind, DesignObject, ObjectId, Patch, SceneDocument};
use crate::{Error, Result};

/// Rotation snap increment.
pub const ROTATION_STEP_DEG: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapMode {
    #[default]
    Free,
    Snapped,
}

impl SnapMode {
    pub fn from_flag(snapped: bool) -> SnapMode {
        if snapped {
            SnapMode::Snapped
        } else {
            SnapMode::Free
        }
    }
}

/// Handles on the manipulation box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "handle")]
pub enum Handle {
    Move,
    Rotate { axis: Axis },
    /// Corner by sign bits: bit 0 → +x, bit 1 → +y, bit 2 → +z.
    Corner { index: u8 },
    /// Edge parallel to `axis`; `index` picks one of its four positions.
    Edge { axis: Axis, index: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationHandle {
    pub axis: Axis,
    /// Where the knob sits: on the axis through the center, just past the box.
    pub position: Point3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeHandle {
    pub axis: Axis,
    pub index: u8,
    pub midpoint: Point3<f64>,
    pub length: f64,
}

/// World-axis-aligned box around the selection and its handle positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulationBox {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
    pub move_handle: Point3<f64>,
    pub rotation_handles: Vec<RotationHandle>,
    pub corners: Vec<Point3<f64>>,
    pub edges: Vec<EdgeHandle>,
}

impl ManipulationBox {
    pub fn from_box(b: &Box3) -> ManipulationBox {
        let c = b.center();
        let size = b.size();
        let rotation_handles = Axis::ALL
            .iter()
            .map(|&axis| {
                let mut position = c;
                position[axis.index()] = b.max[axis.index()] + 0.25 * size.max();
                RotationHandle { axis, position }
            })
            .collect();
        let mut edges = Vec::with_capacity(12);
        for axis in Axis::ALL {
            let i = axis.index();
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            for index in 0..4u8 {
                let mut midpoint = c;
                midpoint[j] = if index & 1 != 0 { b.max[j] } else { b.min[j] };
                midpoint[k] = if index & 2 != 0 { b.max[k] } else { b.min[k] };
                edges.push(EdgeHandle {
                    axis,
                    index,
                    midpoint,
                    length: size[i],
                });
            }
        }
        ManipulationBox {
            min: b.min,
            max: b.max,
            move_handle: Point3::new(c.x, b.max.y, c.z),
            rotation_handles,
            corners: b.corners().to_vec(),
            edges,
        }
    }

    pub fn bounds(&self) -> Box3 {
        Box3::new(self.min, self.max)
    }

    /// Where a handle sits; drags start here unless told otherwise.
    pub fn handle_position(&self, handle: Handle) -> Result<Point3<f64>> {
        match handle {
            Handle::Move => Ok(self.move_handle),
            Handle::Rotate { axis } => Ok(self.rotation_handles[axis.index()].position),
            Handle::Corner { index } if index < 8 => Ok(self.corners[index as usize]),
            Handle::Edge { axis, index } if index < 4 => Ok(self.edges[axis.index() * 4 + index as usize].midpoint),
            _ => Err(Error::Parameter(format!("no such handle {handle:?}"))),
        }
    }
}

fn selection_box(scene: &SceneDocument, ids: &[ObjectId]) -> Result<Box3> {
    if ids.is_empty() {
        return Err(Error::State("nothing selected".into()));
    }
    let objects = ids.iter().map(|id| scene.object(*id)).collect::<Result<Vec<_>>>()?;
    let meshes: Vec<&Mesh> = objects.iter().map(|o| o.baked.as_ref()).collect();
    compute_aabb(&meshes)
}

/// Box around the current selection.
pub fn manipulation_box(scene: &SceneDocument) -> Result<ManipulationBox> {
    Ok(ManipulationBox::from_box(&selection_box(scene, &scene.selected_ids())?))
}

/// `obj` moved by a rigid motion `p ↦ rotation·(p − pivot) + pivot + shift`.
fn rigid(obj: &DesignObject, rotation: &UnitQuaternion<f64>, pivot: &Point3<f64>, shift: &Vector3<f64>) -> DesignObject {
    let t = obj.transform;
    let translation = rotation * (t.translation - pivot.coords) + pivot.coords + shift;
    obj.with_transform(Transform {
        translation,
        rotation: rotation * t.rotation,
        scale: t.scale,
    })
}

/// `obj` scaled by world-axis `factors` about `anchor`. Poses that cannot
/// absorb the scale (rotated, non-uniform) are nested into the geometry.
fn scaled(obj: &DesignObject, factors: &Vector3<f64>, anchor: &Point3<f64>) -> DesignObject {
    let t = obj.transform;
    let uniform = (factors.x - factors.y).abs() <= f64::EPSILON * factors.x.abs()
        && (factors.x - factors.z).abs() <= f64::EPSILON * factors.x.abs();
    if uniform || t.has_identity_rotation(0.0) {
        let translation = anchor.coords + factors.component_mul(&(t.translation - anchor.coords));
        let scale = if t.has_identity_rotation(0.0) {
            factors.component_mul(&t.scale)
        } else {
            t.scale * factors.x
        };
        return obj.with_transform(Transform {
            translation,
            rotation: t.rotation,
            scale,
        });
    }
    let outer = Transform {
        translation: anchor.coords - factors.component_mul(&anchor.coords),
        rotation: UnitQuaternion::identity(),
        scale: *factors,
    };
    obj.nested(outer)
}

/// An in-progress handle drag. Every update recomputes the pose from the
/// snapshot taken at grab time, so the result depends only on the latest
/// target.
#[derive(Debug, Clone)]
pub struct DragSession {
    pub handle: Handle,
    pub grab_start: Point3<f64>,
    pub box_at_grab: Box3,
    snapshot: Vec<DesignObject>,
}

impl DragSession {
    /// Grab `handle` of the current selection; `grab` defaults to the
    /// handle position.
    pub fn begin(scene: &SceneDocument, handle: Handle, grab: Option<Point3<f64>>) -> Result<DragSession> {
        let ids = scene.selected_ids();
        let b = selection_box(scene, &ids)?;
        let mbox = ManipulationBox::from_box(&b);
        let at = mbox.handle_position(handle)?;
        let snapshot = ids
            .iter()
            .map(|id| scene.object(*id).cloned())
            .collect::<Result<Vec<_>>>()?;
        Ok(DragSession {
            handle,
            grab_start: grab.unwrap_or(at),
            box_at_grab: b,
            snapshot,
        })
    }

    pub fn ids(&self) -> Vec<ObjectId> {
        self.snapshot.iter().map(|o| o.id).collect()
    }

    fn expect(&self, ok: bool, what: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::State(format!("{what} needs a different handle than {:?}", self.handle)))
        }
    }

    /// Move the selection toward `target`. Returns the applied translation.
    pub fn apply_move(&self, scene: &mut SceneDocument, target: Point3<f64>, snap: SnapMode) -> Result<Vector3<f64>> {
        self.expect(self.handle == Handle::Move, "a move")?;
        let raw = target - self.grab_start;
        let delta = match snap {
            SnapMode::Free => raw,
            SnapMode::Snapped => {
                let grid = scene
                    .grid()
                    .ok_or_else(|| Error::State("snapped moves need a workspace grid".into()))?;
                let moved = Box3::new(self.box_at_grab.min + raw, self.box_at_grab.max + raw);
                let corners = moved.corners().map(|c| grid.to_grid(&c));
                let mut delta = raw;
                for k in 0..3 {
                    let lo = corners.iter().map(|c| c[k]).fold(f64::INFINITY, f64::min);
                    let hi = corners.iter().map(|c| c[k]).fold(f64::NEG_INFINITY, f64::max);
                    let face = if k == 2 {
                        // Rule 1: the face nearer the grid plane.
                        if lo.abs() <= hi.abs() {
                            lo
                        } else {
                            hi
                        }
                    } else {
                        // Rule 2: the leading face along the net displacement.
                        if raw.dot(&grid.axis(k)) > 0.0 {
                            hi
                        } else {
                            lo
                        }
                    };
                    delta += grid.axis(k) * (grid.snap_scalar(face) - face);
                }
                delta
            }
        };
        let identity = UnitQuaternion::identity();
        let moved = self
            .snapshot
            .iter()
            .map(|o| rigid(o, &identity, &Point3::origin(), &delta))
            .collect();
        scene.preview_objects(moved);
        Ok(delta)
    }

    /// Turn the selection about the handle's world axis through the box
    /// center. Returns the applied angle in radians.
    pub fn apply_rotation(&self, scene: &mut SceneDocument, raw_angle: f64, snap: SnapMode) -> Result<f64> {
        let Handle::Rotate { axis } = self.handle else {
            return Err(Error::State(format!("a rotation needs a rotation handle, not {:?}", self.handle)));
        };
        if !raw_angle.is_finite() {
            return Err(Error::Parameter("rotation angle must be finite".into()));
        }
        let angle = match snap {
            SnapMode::Free => raw_angle,
            SnapMode::Snapped => {
                let step = ROTATION_STEP_DEG.to_radians();
                round_half_away(raw_angle / step) * step
            }
        };
        let q = UnitQuaternion::from_axis_angle(&Unit::new_unchecked(axis.unit()), angle);
        let pivot = self.box_at_grab.center();
        let turned = self
            .snapshot
            .iter()
            .map(|o| rigid(o, &q, &pivot, &Vector3::zeros()))
            .collect();
        scene.preview_objects(turned);
        Ok(angle)
    }

    /// Drag the grabbed corner toward `target` with the opposite corner
    /// fixed. Returns the per-axis factors.
    pub fn apply_scale_corner(
        &self,
        scene: &mut SceneDocument,
        target: Point3<f64>,
        uniform: bool,
        snap: SnapMode,
    ) -> Result<Vector3<f64>> {
        let Handle::Corner { index } = self.handle else {
            return Err(Error::State(format!("corner scaling needs a corner handle, not {:?}", self.handle)));
        };
        let b = &self.box_at_grab;
        let anchor = b.corner(7 - index as usize);
        let start = self.grab_start;
        let target = match snap {
            SnapMode::Free => target,
            SnapMode::Snapped => scene
                .grid()
                .ok_or_else(|| Error::State("snapped scaling needs a workspace grid".into()))?
                .snap_point(&target),
        };
        let size = b.size();
        let floor = size.map(|s| if s > 0.0 { MIN_DIMENSION / s } else { 1.0 });
        let factors = if uniform {
            let diag = start - anchor;
            let len2 = diag.norm_squared();
            if len2 <= f64::EPSILON * f64::EPSILON {
                return Err(Error::State("corner and anchor coincide".into()));
            }
            let f = ((target - anchor).dot(&diag) / len2).max(floor.max());
            Vector3::repeat(f)
        } else {
            Vector3::from_fn(|k, _| {
                let span = start[k] - anchor[k];
                if span == 0.0 {
                    1.0
                } else {
                    ((target[k] - anchor[k]) / span).max(floor[k])
                }
            })
        };
        let out = self.snapshot.iter().map(|o| scaled(o, &factors, &anchor)).collect();
        scene.preview_objects(out);
        Ok(factors)
    }

    /// Keep the current poses as one undoable command. Returns false when
    /// nothing moved.
    pub fn commit(self, scene: &mut SceneDocument) -> Result<bool> {
        let after = self
            .snapshot
            .iter()
            .map(|o| scene.object(o.id).cloned())
            .collect::<Result<Vec<_>>>()?;
        if after == self.snapshot {
            return Ok(false);
        }
        let before = Patch {
            objects: self.snapshot.into_iter().map(|o| (o.id, Some(o))).collect(),
            ..Patch::default()
        };
        let after = Patch {
            objects: after.into_iter().map(|o| (o.id, Some(o))).collect(),
            ..Patch::default()
        };
        scene.record(CommandKind::Transform, before, after);
        Ok(true)
    }

    /// Put every object back exactly as it was at grab time.
    pub fn cancel(self, scene: &mut SceneDocument) {
        scene.preview_objects(self.snapshot);
    }
}

/// Set the selection's extent along `axis` to `length`, anchored at the
/// box face with the smaller coordinate. Returns the factor applied.
pub fn parametric_resize(scene: &mut SceneDocument, axis: Axis, length: f64) -> Result<f64> {
    if !(length >= MIN_DIMENSION && length.is_finite()) {
        return Err(Error::Parameter(format!(
            "length {length} m is below the {MIN_DIMENSION} m minimum"
        )));
    }
    let ids = scene.selected_ids();
    let b = selection_box(scene, &ids)?;
    let i = axis.index();
    let extent = b.size()[i];
    if extent <= 0.0 {
        return Err(Error::State("selection has no extent along that axis".into()));
    }
    let f = length / extent;
    if f == 1.0 {
        return Ok(1.0);
    }
    let mut factors = Vector3::repeat(1.0);
    factors[i] = f;
    let anchor = b.min;
    let objects = ids
        .iter()
        .map(|id| scene.object(*id).map(|o| scaled(o, &factors, &anchor)))
        .collect::<Result<Vec<_>>>()?;
    scene.replace_objects(CommandKind::Transform, objects);
    Ok(f)
}

/// Distance between the ruler's endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub meters: f64,
}

impl Measurement {
    /// Centimeters with two decimals, e.g. `20.00 cm`.
    pub fn label(&self) -> String {
        format!("{:.2} cm", self.meters * 100.0)
    }
}

impl std::fmt::Display for Measurement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

pub fn ruler_measure(a: &Point3<f64>, b: &Point3<f64>) -> Measurement {
    Measurement { meters: (a - b).norm() }
}
