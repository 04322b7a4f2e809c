//! Solid-modeling kernel for a desk-scale design-and-print workflow.
//!
//! Primitives are generated in a unit box and sized through [`Transform`]s,
//! combined through mesh booleans, arranged on a snapping workspace grid
//! and exported as STL for the fabrication service.

pub mod csg;
pub mod error;
pub mod exec;
pub mod fabrication;
pub mod geometry;
pub mod manipulation;
pub mod scene;
pub mod script;

pub use error::{Error, Result};
pub use exec::Parallelism;
pub use geometry::{
    compute_aabb, make_primitive, mesh_volume, transform_mesh, validate_mesh, Axis, Box3, Mesh, PrimitiveKind,
    TessellationSpec, Transform, ValidationReport,
};
