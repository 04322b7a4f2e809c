use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::Mesh;
use crate::{Error, Result};

/// World-axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3 {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Default for Box3 {
    fn default() -> Self {
        Box3::empty()
    }
}

impl Box3 {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Self {
        Box3 { min, max }
    }

    /// The inverted box, identity for [`Box3::union`].
    pub fn empty() -> Self {
        Box3 {
            min: Point3::from(Vector3::repeat(f64::INFINITY)),
            max: Point3::from(Vector3::repeat(f64::NEG_INFINITY)),
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Self {
        let mut b = Box3::empty();
        for p in points {
            b.include(p);
        }
        b
    }

    pub fn include(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Box3) -> Box3 {
        Box3 {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn size(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn volume(&self) -> f64 {
        let s = self.size();
        s.x * s.y * s.z
    }

    /// Grow by `margin` on every side.
    pub fn expanded(&self, margin: f64) -> Box3 {
        let m = Vector3::repeat(margin);
        Box3 {
            min: self.min - m,
            max: self.max + m,
        }
    }

    /// Closed-interval overlap test with tolerance `tol`.
    pub fn intersects(&self, other: &Box3, tol: f64) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] + tol && other.min[i] <= self.max[i] + tol)
    }

    pub fn contains_point(&self, p: &Point3<f64>, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }

    pub fn contains_box(&self, other: &Box3, tol: f64) -> bool {
        self.contains_point(&other.min, tol) && self.contains_point(&other.max, tol)
    }

    /// Corner selected by sign bits: bit 0 → +x, bit 1 → +y, bit 2 → +z.
    pub fn corner(&self, index: usize) -> Point3<f64> {
        Point3::new(
            if index & 1 != 0 { self.max.x } else { self.min.x },
            if index & 2 != 0 { self.max.y } else { self.min.y },
            if index & 4 != 0 { self.max.z } else { self.min.z },
        )
    }

    pub fn corners(&self) -> [Point3<f64>; 8] {
        std::array::from_fn(|i| self.corner(i))
    }
}

/// Minimal world-axis-aligned box around every vertex of `meshes`.
pub fn compute_aabb(meshes: &[&Mesh]) -> Result<Box3> {
    if meshes.is_empty() {
        return Err(Error::Parameter("compute_aabb needs at least one mesh".into()));
    }
    let b = meshes
        .iter()
        .fold(Box3::empty(), |acc, m| acc.union(&Box3::from_points(&m.vertices)));
    if b.is_empty() {
        return Err(Error::Parameter("compute_aabb over meshes with no vertices".into()));
    }
    Ok(b)
}
