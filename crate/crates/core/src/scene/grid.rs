//! Workspace grid: a right-handed frame on a selected face and its snap lattice.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::room::WorkspaceCandidate;
use crate::geometry::Axis;
use crate::{Error, Result};

pub const DEFAULT_SPACING: f64 = 0.02;

/// Lattice coordinates within this distance of an integer count as on it.
pub const LATTICE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceGrid {
    pub label: String,
    /// Face corner the grid extent starts from.
    pub origin: Point3<f64>,
    pub u: Vector3<f64>,
    pub v: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub spacing: f64,
    pub normal_offset: f64,
    /// Face size along `u` and `v`.
    pub extent: [f64; 2],
    pub occlusion_hint: bool,
    /// Display color, passed through untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<[u8; 3]>,
}

/// Relative slack that lets `1.4999999999999998` count as a tie.
const TIE_TOLERANCE: f64 = 1e-9;

/// Nearest integer, ties away from zero.
pub fn round_half_away(x: f64) -> f64 {
    let whole = x.trunc();
    let frac = x - whole;
    if frac.abs() >= 0.5 - TIE_TOLERANCE {
        whole + frac.signum()
    } else {
        whole
    }
}

impl WorkspaceGrid {
    /// Grid on the candidate face. `u` follows the first world axis other
    /// than the normal's, `v = n × u`, and the origin is the face corner
    /// from which both span the face.
    pub fn on_face(candidate: &WorkspaceCandidate, spacing: f64, normal_offset: f64) -> Result<WorkspaceGrid> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Parameter(format!("grid spacing must be positive, got {spacing}")));
        }
        if !normal_offset.is_finite() {
            return Err(Error::Parameter("grid offset must be finite".into()));
        }
        let face = &candidate.face;
        let n_axis = face.axis;
        let u_axis = Axis::ALL
            .into_iter()
            .find(|a| *a != n_axis)
            .unwrap_or(Axis::X);
        let normal = face.normal();
        let u = u_axis.unit();
        let v = normal.cross(&u);
        let mut origin = face.min;
        for k in 0..3 {
            if v[k] < 0.0 {
                origin[k] = face.max[k];
            }
        }
        let size = face.max - face.min;
        let extent = [size.dot(&u).abs(), size.dot(&v).abs()];
        Ok(WorkspaceGrid {
            label: candidate.label.clone(),
            origin,
            u,
            v,
            normal,
            spacing,
            normal_offset,
            extent,
            occlusion_hint: false,
            color: None,
        })
    }

    /// Origin of the snap lattice, shifted along the normal by the offset.
    pub fn lattice_origin(&self) -> Point3<f64> {
        self.origin + self.normal * self.normal_offset
    }

    /// Whole cells covering the face along `u` and `v`.
    pub fn cells(&self) -> (usize, usize) {
        let c = |e: f64| (e / self.spacing + LATTICE_TOLERANCE).floor().max(0.0) as usize;
        (c(self.extent[0]), c(self.extent[1]))
    }

    /// Center of the face rectangle, on the lattice plane.
    pub fn center(&self) -> Point3<f64> {
        self.lattice_origin() + self.u * (self.extent[0] * 0.5) + self.v * (self.extent[1] * 0.5)
    }

    /// Point in grid coordinates (along u, v, n), relative to the lattice origin.
    pub fn to_grid(&self, p: &Point3<f64>) -> Vector3<f64> {
        let d = p - self.lattice_origin();
        Vector3::new(d.dot(&self.u), d.dot(&self.v), d.dot(&self.normal))
    }

    pub fn from_grid(&self, c: &Vector3<f64>) -> Point3<f64> {
        self.lattice_origin() + self.u * c.x + self.v * c.y + self.normal * c.z
    }

    /// Frame axis `k` (0 = u, 1 = v, 2 = n).
    pub fn axis(&self, k: usize) -> Vector3<f64> {
        match k {
            0 => self.u,
            1 => self.v,
            _ => self.normal,
        }
    }

    /// The world axis and sign of frame axis `k`; grid frames are always
    /// aligned with world axes.
    pub fn world_axis(&self, k: usize) -> (Axis, f64) {
        let a = self.axis(k);
        let i = a.iamax();
        (Axis::from_index(i), a[i].signum())
    }

    /// Nearest lattice coordinate to a grid-frame scalar.
    pub fn snap_scalar(&self, x: f64) -> f64 {
        round_half_away(x / self.spacing) * self.spacing
    }

    /// Nearest lattice point, componentwise in the grid frame.
    pub fn snap_point(&self, p: &Point3<f64>) -> Point3<f64> {
        let g = self.to_grid(p);
        self.from_grid(&g.map(|x| self.snap_scalar(x)))
    }

    /// Lattice point `origin + (i·s)u + (j·s)v + (k·s)n`.
    pub fn lattice_point(&self, i: i64, j: i64, k: i64) -> Point3<f64> {
        let s = self.spacing;
        self.from_grid(&Vector3::new(i as f64 * s, j as f64 * s, k as f64 * s))
    }

    /// Whether `p` sits on the lattice within [`LATTICE_TOLERANCE`] on every axis.
    pub fn on_lattice(&self, p: &Point3<f64>) -> bool {
        let g = self.to_grid(p);
        (0..3).all(|k| {
            let t = g[k] / self.spacing;
            (t - t.round()).abs() * self.spacing <= LATTICE_TOLERANCE
        })
    }
}
