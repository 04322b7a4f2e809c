//! Voxel brute-force volume of CSG trees from point membership of the
//! primitive shapes themselves. Shares no code with the mesh booleans.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Point3, Vector3};

use super::tree::CsgTree;
use crate::exec::{self, Parallelism};
use crate::geometry::{Box3, PrimitiveKind, TessellationSpec, Transform};
use crate::{Error, Result};

/// Shape model used for point membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeModel {
    /// Exact curved solids (true sphere, circular cylinder, ...).
    Analytic,
    /// The faceted solids a tessellation of that density bounds, described
    /// by closed-form half-spaces.
    Faceted(TessellationSpec),
}

/// Minimum voxel resolution per axis.
pub const MIN_RESOLUTION: usize = 8;

/// Occupancy grid over a box.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub resolution: usize,
    pub bounds: Box3,
    /// One bit per cell, x fastest, then y, then z.
    pub occupancy: Vec<u64>,
}

impl VoxelGrid {
    pub fn cell_volume(&self) -> f64 {
        self.bounds.volume() / (self.resolution as f64).powi(3)
    }

    pub fn occupied(&self) -> usize {
        self.occupancy.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn volume(&self) -> f64 {
        self.occupied() as f64 * self.cell_volume()
    }

    pub fn is_set(&self, x: usize, y: usize, z: usize) -> bool {
        let i = (z * self.resolution + y) * self.resolution + x;
        self.occupancy[i / 64] >> (i % 64) & 1 == 1
    }
}

enum Node {
    Leaf {
        shape: Shape,
        local_from_world: Matrix4<f64>,
        bounds: Box3,
    },
    Union(Vec<Node>),
    Difference(Box<Node>, Box<Node>),
}

fn compile(tree: &CsgTree, world_from_parent: &Matrix4<f64>, model: &ShapeModel) -> Node {
    match tree {
        CsgTree::Leaf { kind, transform, .. } => {
            let m = world_from_parent * transform.to_matrix();
            let corners = Box3::new(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5)).corners();
            let world: Vec<Point3<f64>> = corners.iter().map(|c| m.transform_point(c)).collect();
            Node::Leaf {
                shape: Shape::new(*kind, model),
                local_from_world: m.try_inverse().unwrap_or_else(Matrix4::zeros),
                bounds: Box3::from_points(&world),
            }
        }
        CsgTree::Placed { transform, child } => compile(child, &(world_from_parent * transform.to_matrix()), model),
        CsgTree::Union { children } => Node::Union(children.iter().map(|c| compile(c, world_from_parent, model)).collect()),
        CsgTree::Difference { solid, hole } => Node::Difference(
            Box::new(compile(solid, world_from_parent, model)),
            Box::new(compile(hole, world_from_parent, model)),
        ),
    }
}

fn bounds_of(node: &Node) -> Box3 {
    match node {
        Node::Leaf { bounds, .. } => *bounds,
        Node::Union(c) => c.iter().fold(Box3::empty(), |b, n| b.union(&bounds_of(n))),
        // A difference never leaves its solid side.
        Node::Difference(s, _) => bounds_of(s),
    }
}

fn contains(node: &Node, p: &Point3<f64>) -> bool {
    match node {
        Node::Leaf {
            shape,
            local_from_world,
            bounds,
        } => bounds.contains_point(p, 0.0) && shape.contains(&local_from_world.transform_point(p)),
        Node::Union(c) => c.iter().any(|n| contains(n, p)),
        Node::Difference(s, h) => contains(s, p) && !contains(h, p),
    }
}

/// Point membership of a tree in world coordinates.
pub fn tree_contains(tree: &CsgTree, p: &Point3<f64>, model: &ShapeModel) -> bool {
    contains(&compile(tree, &Matrix4::identity(), model), p)
}

/// Point membership of a unit-box primitive in its local frame.
pub fn primitive_contains(kind: PrimitiveKind, p: &Point3<f64>, model: &ShapeModel) -> bool {
    Shape::new(kind, model).contains(p)
}

/// A primitive with its membership data precomputed.
struct Shape {
    kind: PrimitiveKind,
    /// Profile and segment count when testing against facets.
    facets: Option<(Vec<(f64, f64)>, u32)>,
}

impl Shape {
    fn new(kind: PrimitiveKind, model: &ShapeModel) -> Shape {
        let revolved = matches!(
            kind,
            PrimitiveKind::Sphere | PrimitiveKind::Cylinder | PrimitiveKind::Capsule | PrimitiveKind::Cone
        );
        let facets = match model {
            ShapeModel::Faceted(tess) if revolved => Some((profile(kind, tess), tess.radial_segments)),
            _ => None,
        };
        Shape { kind, facets }
    }

    fn contains(&self, p: &Point3<f64>) -> bool {
        let (x, y, z) = (p.x, p.y, p.z);
        if x.abs() > 0.5 || y.abs() > 0.5 || z.abs() > 0.5 {
            return false;
        }
        if let Some((prof, n)) = &self.facets {
            return faceted_revolution_contains(prof, *n, x, y, z);
        }
        let taper = (0.5 - y) / 2.0;
        let rho2 = x * x + z * z;
        match self.kind {
            PrimitiveKind::Cube => true,
            PrimitiveKind::TriangularPrism => x.abs() <= taper,
            PrimitiveKind::Pyramid => x.abs() <= taper && z.abs() <= taper,
            PrimitiveKind::Sphere => rho2 + y * y <= 0.25,
            PrimitiveKind::Cylinder => rho2 <= 0.25,
            PrimitiveKind::Cone => rho2.sqrt() <= taper,
            PrimitiveKind::Capsule => {
                let cap = (y.abs() - 0.25).max(0.0);
                rho2 / 0.25 + cap * cap / 0.0625 <= 1.0
            }
        }
    }
}

/// `(radius, height)` profile from top to bottom.
fn profile(kind: PrimitiveKind, tess: &TessellationSpec) -> Vec<(f64, f64)> {
    match kind {
        PrimitiveKind::Sphere => (0..=tess.rings)
            .map(|k| {
                let phi = PI * k as f64 / tess.rings as f64;
                (0.5 * phi.sin(), 0.5 * phi.cos())
            })
            .collect(),
        PrimitiveKind::Cylinder => vec![(0.0, 0.5), (0.5, 0.5), (0.5, -0.5), (0.0, -0.5)],
        PrimitiveKind::Cone => vec![(0.0, 0.5), (0.5, -0.5), (0.0, -0.5)],
        _ => {
            let bands = (tess.rings / 2).max(1);
            let quarter = |k: u32| 0.5 * PI * k as f64 / bands as f64;
            let top = (0..=bands).map(|k| (0.5 * quarter(k).sin(), 0.25 + 0.25 * quarter(k).cos()));
            let bottom = (0..=bands).map(|k| (0.5 * quarter(k).cos(), -0.25 - 0.25 * quarter(k).sin()));
            top.chain(bottom).collect()
        }
    }
}

/// Inside the azimuth sector holding the point, every facet contains the
/// sector's chord direction, so membership reduces to a 2D test of
/// (distance along the sector's mid-direction, height) against the profile
/// with radii shrunk to the chord distance.
fn faceted_revolution_contains(prof: &[(f64, f64)], segments: u32, x: f64, y: f64, z: f64) -> bool {
    let n = segments as f64;
    let step = 2.0 * PI / n;
    let theta = z.atan2(x).rem_euclid(2.0 * PI);
    let sector = (theta / step).floor().min(n - 1.0);
    let mid = (sector + 0.5) * step;
    let s = x * mid.cos() + z * mid.sin();
    let chord = (PI / n).cos();
    for w in prof.windows(2) {
        let ((r0, y0), (r1, y1)) = (w[0], w[1]);
        if y0 > y1 && y <= y0 && y >= y1 {
            let t = (y0 - y) / (y0 - y1);
            let radius = (r0 + (r1 - r0) * t) * chord;
            return s <= radius;
        }
    }
    false
}

/// Rasterize the union of `trees` at `resolution`³ over bounds padded
/// around every leaf.
pub fn voxelize(trees: &[CsgTree], resolution: usize, model: &ShapeModel, par: Parallelism) -> Result<VoxelGrid> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Parameter(format!(
            "voxel resolution must be at least {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    let root = Node::Union(trees.iter().map(|t| compile(t, &Matrix4::identity(), model)).collect());
    let tight = bounds_of(&root);
    if tight.is_empty() {
        return Ok(VoxelGrid {
            resolution,
            bounds: Box3::new(Point3::origin(), Point3::origin()),
            occupancy: vec![0; (resolution.pow(3)).div_ceil(64)],
        });
    }
    // One empty cell layer on every side; the tight box faces fall on cell
    // boundaries.
    let floor = 1e-3 * tight.size().max().max(1e-9);
    let inner: Vector3<f64> = tight.size().map(|s| s.max(floor)) / (resolution - 2) as f64;
    let bounds = Box3::new(tight.min - inner, tight.min + inner * (resolution - 1) as f64);
    let cell: Vector3<f64> = bounds.size() / resolution as f64;
    let res = resolution;
    let slices: Vec<Vec<bool>> = exec::map_range(par, res, |k| {
        let mut out = vec![false; res * res];
        let pz = bounds.min.z + (k as f64 + 0.5) * cell.z;
        for j in 0..res {
            let py = bounds.min.y + (j as f64 + 0.5) * cell.y;
            for i in 0..res {
                let p = Point3::new(bounds.min.x + (i as f64 + 0.5) * cell.x, py, pz);
                out[j * res + i] = contains(&root, &p);
            }
        }
        out
    });
    let mut occupancy = vec![0u64; (res * res * res).div_ceil(64)];
    for (k, slice) in slices.iter().enumerate() {
        for (local, &set) in slice.iter().enumerate() {
            if set {
                let idx = k * res * res + local;
                occupancy[idx / 64] |= 1 << (idx % 64);
            }
        }
    }
    Ok(VoxelGrid {
        resolution,
        bounds,
        occupancy,
    })
}

/// Occupied-cell volume of the union of `trees` under `model`.
pub fn voxel_oracle_volume_with(trees: &[CsgTree], resolution: usize, model: &ShapeModel, par: Parallelism) -> Result<f64> {
    Ok(voxelize(trees, resolution, model, par)?.volume())
}

/// Occupied-cell volume with the analytic shapes.
pub fn voxel_oracle_volume(trees: &[CsgTree], resolution: usize) -> Result<f64> {
    voxel_oracle_volume_with(trees, resolution, &ShapeModel::Analytic, Parallelism::Parallel)
}

/// Identity transform helper for building oracle trees by hand.
pub fn leaf(kind: PrimitiveKind, transform: Transform) -> CsgTree {
    CsgTree::Leaf {
        kind,
        transform,
        solidity: super::Solidity::Solid,
    }
}
