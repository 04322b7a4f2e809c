use nalgebra::{Matrix4, Point3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Smallest allowed extent of a transformed unit primitive, in meters.
pub const MIN_DIMENSION: f64 = 1e-3;

/// Scale, then rotate, then translate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
    pub scale: Vector3<f64>,
}

impl Default for Transform {
    fn default() -> Self {
        Transform::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Transform {
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
            scale: Vector3::repeat(1.0),
        }
    }

    /// Builds a transform, clamping every scale component to [`MIN_DIMENSION`].
    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>, scale: Vector3<f64>) -> Self {
        Transform {
            translation,
            rotation,
            scale: scale.map(|s| s.max(MIN_DIMENSION)),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Transform {
            translation: t,
            ..Transform::identity()
        }
    }

    pub fn from_scale(s: Vector3<f64>) -> Self {
        Transform::new(Vector3::zeros(), UnitQuaternion::identity(), s)
    }

    pub fn with_translation(mut self, t: Vector3<f64>) -> Self {
        self.translation = t;
        self
    }

    pub fn with_rotation(mut self, r: UnitQuaternion<f64>) -> Self {
        self.rotation = r;
        self
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        let scaled = p.coords.component_mul(&self.scale);
        Point3::from(self.rotation.transform_vector(&scaled) + self.translation)
    }

    pub fn inverse_apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        let local = self.rotation.inverse_transform_vector(&(p.coords - self.translation));
        Point3::from(local.component_div(&self.scale))
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        Matrix4::new_translation(&self.translation)
            * self.rotation.to_homogeneous()
            * Matrix4::new_nonuniform_scaling(&self.scale)
    }

    /// True when the rotation is the identity up to `tol` in quaternion components.
    pub fn has_identity_rotation(&self, tol: f64) -> bool {
        let q = self.rotation.quaternion();
        (q.w.abs() - 1.0).abs() <= tol && q.imag().norm() <= tol
    }

    /// Checks the quaternion-norm and scale invariants.
    pub fn is_valid(&self) -> bool {
        let norm = self.rotation.quaternion().norm();
        (norm - 1.0).abs() <= 1e-9
            && self.scale.iter().all(|s| s.is_finite() && *s > 0.0)
            && self.translation.iter().all(|t| t.is_finite())
    }
}
