use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::Transform;
use crate::{Error, Result};

/// Triangles with area at or below this (m²) count as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Indexed triangle mesh in meters, counter-clockwise outward winding.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Self {
        Mesh { vertices, triangles }
    }

    pub fn empty() -> Self {
        Mesh::default()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle(&self, i: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[i];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized normal (twice the area vector) of triangle `i`.
    pub fn triangle_normal(&self, i: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(i);
        (b - a).cross(&(c - a))
    }

    /// Concatenate meshes into one, re-basing indices.
    pub fn merge<'a>(meshes: impl IntoIterator<Item = &'a Mesh>) -> Mesh {
        let mut out = Mesh::empty();
        for m in meshes {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&m.vertices);
            out.triangles
                .extend(m.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        }
        out
    }

    /// Divergence-theorem volume without the watertightness check.
    pub fn signed_volume(&self) -> f64 {
        let Some(origin) = self.vertices.first() else {
            return 0.0;
        };
        let sum: f64 = (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                (a - origin).dot(&(b - origin).cross(&(c - origin)))
            })
            .sum();
        sum / 6.0
    }

    /// Drop vertices no triangle references and renumber.
    pub fn compacted(&self) -> Mesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let triangles = self
            .triangles
            .iter()
            .map(|t| {
                t.map(|i| {
                    let slot = &mut remap[i as usize];
                    if *slot == u32::MAX {
                        *slot = vertices.len() as u32;
                        vertices.push(self.vertices[i as usize]);
                    }
                    *slot
                })
            })
            .collect();
        Mesh { vertices, triangles }
    }
}

/// Map every vertex through `t` (scale, rotate, translate).
pub fn transform_mesh(mesh: &Mesh, t: &Transform) -> Mesh {
    Mesh {
        vertices: mesh.vertices.iter().map(|p| t.apply_point(p)).collect(),
        triangles: mesh.triangles.clone(),
    }
}

/// Signed volume of a watertight mesh; positive for outward winding.
pub fn mesh_volume(mesh: &Mesh) -> Result<f64> {
    let report = validate_mesh(mesh);
    if !report.watertight {
        return Err(Error::Validity(format!("volume of a non-watertight mesh ({report})")));
    }
    Ok(mesh.signed_volume())
}

/// Topology and geometry defects found by [`validate_mesh`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub vertex_count: usize,
    pub triangle_count: usize,
    /// Edges used by exactly one triangle.
    pub boundary_edges: usize,
    /// Edges used by more than two triangles.
    pub non_manifold_edges: usize,
    /// Edges shared by two triangles traversing it in the same direction.
    pub inconsistent_edges: usize,
    pub degenerate_triangles: usize,
    pub invalid_indices: usize,
    pub watertight: bool,
}

impl ValidationReport {
    pub fn defect_count(&self) -> usize {
        self.boundary_edges
            + self.non_manifold_edges
            + self.inconsistent_edges
            + self.degenerate_triangles
            + self.invalid_indices
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} vertices, {} triangles, watertight={}, boundary={}, non-manifold={}, inconsistent={}, degenerate={}, bad-index={}",
            self.vertex_count,
            self.triangle_count,
            self.watertight,
            self.boundary_edges,
            self.non_manifold_edges,
            self.inconsistent_edges,
            self.degenerate_triangles,
            self.invalid_indices
        )
    }
}

/// Report watertightness, manifoldness and degenerate triangles.
pub fn validate_mesh(mesh: &Mesh) -> ValidationReport {
    let n = mesh.vertices.len() as u32;
    let mut invalid_indices = 0;
    let mut degenerate_triangles = 0;
    // undirected edge -> (uses low->high, uses high->low)
    let mut edges: HashMap<(u32, u32), (u32, u32)> = HashMap::with_capacity(mesh.triangles.len() * 3 / 2);
    for (ti, tri) in mesh.triangles.iter().enumerate() {
        if tri.iter().any(|&i| i >= n) {
            invalid_indices += 1;
            continue;
        }
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] || mesh.triangle_normal(ti).norm() * 0.5 <= DEGENERATE_AREA {
            degenerate_triangles += 1;
        }
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if a == b {
                continue;
            }
            let e = edges.entry((a.min(b), a.max(b))).or_default();
            if a < b {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    let (mut boundary_edges, mut non_manifold_edges, mut inconsistent_edges) = (0, 0, 0);
    for &(fwd, bwd) in edges.values() {
        match fwd + bwd {
            1 => boundary_edges += 1,
            2 if fwd != 1 => inconsistent_edges += 1,
            2 => {}
            _ => non_manifold_edges += 1,
        }
    }
    ValidationReport {
        vertex_count: mesh.vertices.len(),
        triangle_count: mesh.triangles.len(),
        boundary_edges,
        non_manifold_edges,
        inconsistent_edges,
        degenerate_triangles,
        invalid_indices,
        watertight: boundary_edges == 0 && non_manifold_edges == 0 && inconsistent_edges == 0 && invalid_indices == 0,
    }
}
