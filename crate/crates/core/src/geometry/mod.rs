//! Meshes, transforms and the seven primitive solids.

mod aabb;
mod mesh;
mod primitives;
mod transform;

pub use aabb::{compute_aabb, Box3};
pub use mesh::{mesh_volume, transform_mesh, validate_mesh, Mesh, ValidationReport, DEGENERATE_AREA};
pub use primitives::{make_primitive, PrimitiveKind, TessellationSpec};
pub use transform::{Transform, MIN_DIMENSION};

pub use nalgebra::{Point3, UnitQuaternion, Vector3};

/// World axis index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        match i {
            0 => Axis::X,
            1 => Axis::Y,
            2 => Axis::Z,
            _ => panic!("axis index {i} out of range"),
        }
    }

    pub fn unit(self) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        v[self.index()] = 1.0;
        v
    }
}

impl std::str::FromStr for Axis {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            _ => Err(crate::Error::Parameter(format!("unknown axis `{s}`"))),
        }
    }
}
