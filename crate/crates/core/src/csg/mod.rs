//! Mesh booleans (BSP based), the solid/hole combine and a voxel oracle.

mod boolean;
mod bsp;
mod combine;
mod oracle;
mod polygon;
mod repair;
mod tree;

pub use boolean::{boolean_mesh, csg_subtract, csg_subtract_with, csg_union, csg_union_with, BooleanOptions};
pub use combine::{combine, with_leaf_solidity, Color, CombineInput, CombineOutput};
pub use oracle::{
    leaf, primitive_contains, tree_contains, voxel_oracle_volume, voxel_oracle_volume_with, voxelize, ShapeModel,
    VoxelGrid, MIN_RESOLUTION,
};
pub use polygon::PLANE_EPSILON;
pub use repair::WELD_EPSILON;
pub use tree::{CsgTree, Solidity};
