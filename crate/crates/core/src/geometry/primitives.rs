use std::f64::consts::PI;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::Mesh;
use crate::{Error, Result};

/// The seven primitive solids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrimitiveKind {
    Cube,
    Sphere,
    Cylinder,
    Capsule,
    TriangularPrism,
    Pyramid,
    Cone,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 7] = [
        PrimitiveKind::Cube,
        PrimitiveKind::Sphere,
        PrimitiveKind::Cylinder,
        PrimitiveKind::Capsule,
        PrimitiveKind::TriangularPrism,
        PrimitiveKind::Pyramid,
        PrimitiveKind::Cone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::Cube => "cube",
            PrimitiveKind::Sphere => "sphere",
            PrimitiveKind::Cylinder => "cylinder",
            PrimitiveKind::Capsule => "capsule",
            PrimitiveKind::TriangularPrism => "triangular-prism",
            PrimitiveKind::Pyramid => "pyramid",
            PrimitiveKind::Cone => "cone",
        }
    }

    /// Vertex count of [`make_primitive`] for this kind at `tess`.
    pub fn vertex_count(self, tess: &TessellationSpec) -> usize {
        let n = tess.radial_segments as usize;
        match self {
            PrimitiveKind::Cube => 8,
            PrimitiveKind::TriangularPrism => 6,
            PrimitiveKind::Pyramid => 5,
            PrimitiveKind::Sphere => n * (tess.rings as usize - 1) + 2,
            PrimitiveKind::Cylinder => 2 * n + 2,
            PrimitiveKind::Cone => n + 2,
            PrimitiveKind::Capsule => n * 2 * tess.cap_bands() as usize + 2,
        }
    }
}

impl std::str::FromStr for PrimitiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        PrimitiveKind::ALL
            .into_iter()
            .find(|k| k.name() == norm || (norm == "prism" && *k == PrimitiveKind::TriangularPrism))
            .ok_or_else(|| Error::Parameter(format!("unknown primitive `{s}`")))
    }
}

impl std::fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Tessellation density for the curved primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TessellationSpec {
    pub radial_segments: u32,
    pub rings: u32,
}

impl Default for TessellationSpec {
    fn default() -> Self {
        TessellationSpec {
            radial_segments: 24,
            rings: 12,
        }
    }
}

impl TessellationSpec {
    pub const MAX_RADIAL: u32 = 512;
    pub const MAX_RINGS: u32 = 256;

    pub fn new(radial_segments: u32, rings: u32) -> Result<Self> {
        let t = TessellationSpec { radial_segments, rings };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<()> {
        if !(3..=Self::MAX_RADIAL).contains(&self.radial_segments) {
            return Err(Error::Parameter(format!(
                "radial segments must be in 3..={}, got {}",
                Self::MAX_RADIAL,
                self.radial_segments
            )));
        }
        if !(2..=Self::MAX_RINGS).contains(&self.rings) {
            return Err(Error::Parameter(format!(
                "rings must be in 2..={}, got {}",
                Self::MAX_RINGS,
                self.rings
            )));
        }
        Ok(())
    }

    /// Latitude bands in each capsule cap.
    pub fn cap_bands(&self) -> u32 {
        (self.rings / 2).max(1)
    }
}

/// Unit-bounding-box primitive centered at the origin, y up.
pub fn make_primitive(kind: PrimitiveKind, tess: &TessellationSpec) -> Result<Mesh> {
    tess.check()?;
    let n = tess.radial_segments;
    let mesh = match kind {
        PrimitiveKind::Cube => cube(),
        PrimitiveKind::TriangularPrism => prism(),
        PrimitiveKind::Pyramid => pyramid(),
        PrimitiveKind::Sphere => {
            let profile = (0..=tess.rings)
                .map(|k| {
                    let phi = PI * k as f64 / tess.rings as f64;
                    (0.5 * phi.sin(), 0.5 * phi.cos())
                })
                .collect::<Vec<_>>();
            revolve(&profile, n)
        }
        PrimitiveKind::Cylinder => revolve(&[(0.0, 0.5), (0.5, 0.5), (0.5, -0.5), (0.0, -0.5)], n),
        PrimitiveKind::Cone => revolve(&[(0.0, 0.5), (0.5, -0.5), (0.0, -0.5)], n),
        PrimitiveKind::Capsule => revolve(&capsule_profile(tess.cap_bands()), n),
    };
    debug_assert_eq!(mesh.vertex_count(), kind.vertex_count(tess));
    Ok(mesh)
}

/// Capsule profile: cylinder of half-height 0.25 and radius 0.5, capped by
/// half-ellipsoids of height 0.25 so the solid fills the unit box.
pub(crate) fn capsule_profile(bands: u32) -> Vec<(f64, f64)> {
    let mut profile = Vec::with_capacity(2 * bands as usize + 2);
    for k in 0..=bands {
        let phi = 0.5 * PI * k as f64 / bands as f64;
        profile.push((0.5 * phi.sin(), 0.25 + 0.25 * phi.cos()));
    }
    for k in 0..=bands {
        let phi = 0.5 * PI * k as f64 / bands as f64;
        profile.push((0.5 * phi.cos(), -0.25 - 0.25 * phi.sin()));
    }
    profile
}

/// Surface of revolution around +y from a top-to-bottom `(radius, y)` profile.
/// Zero-radius entries become a single pole vertex.
fn revolve(profile: &[(f64, f64)], segments: u32) -> Mesh {
    let n = segments as usize;
    let mut vertices = Vec::new();
    // first vertex index of each profile ring; poles have one vertex
    let profile: Vec<(f64, f64)> = profile
        .iter()
        .map(|&(r, y)| (if r.abs() < 1e-12 { 0.0 } else { r }, y))
        .collect();
    let mut rings = Vec::with_capacity(profile.len());
    for &(r, y) in &profile {
        rings.push(vertices.len());
        if r == 0.0 {
            vertices.push(Point3::new(0.0, y, 0.0));
        } else {
            for i in 0..n {
                let theta = 2.0 * PI * i as f64 / n as f64;
                vertices.push(Point3::new(r * theta.cos(), y, r * theta.sin()));
            }
        }
    }
    let idx = |ring: usize, i: usize| -> u32 {
        if profile[ring].0 == 0.0 {
            rings[ring] as u32
        } else {
            (rings[ring] + i % n) as u32
        }
    };
    let mut triangles = Vec::new();
    for k in 0..profile.len() - 1 {
        let (top_pole, bottom_pole) = (profile[k].0 == 0.0, profile[k + 1].0 == 0.0);
        for i in 0..n {
            let (a, b) = (idx(k, i), idx(k, i + 1));
            let (c, d) = (idx(k + 1, i), idx(k + 1, i + 1));
            match (top_pole, bottom_pole) {
                (true, true) => {}
                (true, false) => triangles.push([a, c, d]),
                (false, true) => triangles.push([a, b, c]),
                (false, false) => {
                    triangles.push([a, b, d]);
                    triangles.push([a, d, c]);
                }
            }
        }
    }
    orient_outward(Mesh::new(vertices, triangles))
}

fn cube() -> Mesh {
    let vertices = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 != 0 { 0.5 } else { -0.5 },
                if i & 2 != 0 { 0.5 } else { -0.5 },
                if i & 4 != 0 { 0.5 } else { -0.5 },
            )
        })
        .collect();
    let quads = [
        [0, 2, 6, 4], // -x
        [1, 5, 7, 3], // +x
        [0, 4, 5, 1], // -y
        [2, 3, 7, 6], // +y
        [0, 1, 3, 2], // -z
        [4, 6, 7, 5], // +z
    ];
    orient_outward(Mesh::new(vertices, quads_to_triangles(&quads)))
}

fn prism() -> Mesh {
    let profile = [(-0.5, -0.5), (0.5, -0.5), (0.0, 0.5)];
    let mut vertices = Vec::new();
    for z in [-0.5, 0.5] {
        vertices.extend(profile.iter().map(|&(x, y)| Point3::new(x, y, z)));
    }
    let mut triangles = vec![[0, 1, 2], [3, 4, 5]];
    triangles.extend(quads_to_triangles(&[[0, 1, 4, 3], [1, 2, 5, 4], [2, 0, 3, 5]]));
    orient_outward(Mesh::new(vertices, triangles))
}

fn pyramid() -> Mesh {
    let vertices = vec![
        Point3::new(-0.5, -0.5, -0.5),
        Point3::new(0.5, -0.5, -0.5),
        Point3::new(0.5, -0.5, 0.5),
        Point3::new(-0.5, -0.5, 0.5),
        Point3::new(0.0, 0.5, 0.0),
    ];
    let mut triangles = quads_to_triangles(&[[0, 1, 2, 3]]);
    triangles.extend([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]]);
    orient_outward(Mesh::new(vertices, triangles))
}

fn quads_to_triangles(quads: &[[u32; 4]]) -> Vec<[u32; 3]> {
    quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect()
}

/// Every primitive is convex and contains the origin, so a triangle faces
/// outward exactly when its normal points away from the origin.
fn orient_outward(mut mesh: Mesh) -> Mesh {
    for ti in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle(ti);
        let n = (b - a).cross(&(c - a));
        let centroid = (a.coords + b.coords + c.coords) / 3.0;
        if n.dot(&centroid) < 0.0 {
            mesh.triangles[ti].swap(1, 2);
        }
    }
    mesh
}
