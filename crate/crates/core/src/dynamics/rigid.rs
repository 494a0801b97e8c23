use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use super::DynamicsError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RigidShape {
    Sphere { radius: f64 },
    Cuboid { half_extents: Vector3<f64> },
}

impl RigidShape {
    /// Body-frame inertia tensor of a solid of uniform density.
    pub fn inertia(&self, mass: f64) -> Matrix3<f64> {
        match *self {
            RigidShape::Sphere { radius } => Matrix3::identity() * (0.4 * mass * radius * radius),
            RigidShape::Cuboid { half_extents: e } => {
                let (x2, y2, z2) = (4.0 * e.x * e.x, 4.0 * e.y * e.y, 4.0 * e.z * e.z);
                Matrix3::from_diagonal(&Vector3::new(y2 + z2, x2 + z2, x2 + y2)) * (mass / 12.0)
            }
        }
    }

    /// Body-frame corner points of a cuboid; empty for spheres.
    pub fn corners(&self) -> Vec<Vector3<f64>> {
        match *self {
            RigidShape::Sphere { .. } => Vec::new(),
            RigidShape::Cuboid { half_extents: e } => {
                let mut out = Vec::with_capacity(8);
                for sx in [-1.0, 1.0] {
                    for sy in [-1.0, 1.0] {
                        for sz in [-1.0, 1.0] {
                            out.push(Vector3::new(sx * e.x, sy * e.y, sz * e.z));
                        }
                    }
                }
                out
            }
        }
    }

    /// Radius of the bounding sphere around the centre of mass.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            RigidShape::Sphere { radius } => radius,
            RigidShape::Cuboid { half_extents } => half_extents.norm(),
        }
    }
}

/// Rigid body with 6 velocity DOFs: linear velocity then world angular velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidBody {
    /// kg
    pub mass: f64,
    /// Body-frame inertia, kg·m².
    pub inertia: Matrix3<f64>,
    pub shape: RigidShape,
}

impl RigidBody {
    pub fn new(mass: f64, shape: RigidShape) -> Result<Self, DynamicsError> {
        Self::with_inertia(mass, shape.inertia(mass), shape)
    }

    pub fn with_inertia(mass: f64, inertia: Matrix3<f64>, shape: RigidShape) -> Result<Self, DynamicsError> {
        if !(mass > 0.0) {
            return Err(DynamicsError::InvalidRigid(format!("mass must be positive, got {mass}")));
        }
        let symmetric = (inertia - inertia.transpose()).abs().max() <= 1e-12 * inertia.abs().max();
        if !symmetric || inertia.cholesky().is_none() {
            return Err(DynamicsError::InvalidRigid("inertia must be symmetric positive definite".into()));
        }
        Ok(Self { mass, inertia, shape })
    }

    /// World-frame inertia for orientation `rotation`.
    pub fn world_inertia(&self, rotation: &UnitQuaternion<f64>) -> Matrix3<f64> {
        let r = rotation.to_rotation_matrix();
        r.matrix() * self.inertia * r.matrix().transpose()
    }
}

/// Skew-symmetric cross-product matrix: `skew(a) b = a × b`.
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_mass_properties() {
        assert!(RigidBody::new(0.0, RigidShape::Sphere { radius: 1.0 }).is_err());
        let bad = Matrix3::new(1.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidBody::with_inertia(1.0, bad, RigidShape::Sphere { radius: 1.0 }).is_err());
    }

    #[test]
    fn skew_is_cross_product() {
        let a = Vector3::new(0.3, -1.2, 2.0);
        let b = Vector3::new(-0.7, 0.1, 0.4);
        assert!((skew(&a) * b - a.cross(&b)).norm() < 1e-15);
    }
}
