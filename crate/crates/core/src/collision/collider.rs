use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};

use super::frames::ContactFrame;
use super::geometry::{barycentric_point, closest_point_on_triangle, triangle_normal};

/// Geometry of an immovable or kinematically driven obstacle, in its local frame.
#[derive(Clone, Debug, PartialEq)]
pub enum ColliderShape {
    /// Plane through the local origin. With `half_extents` it is a finite
    /// plate spanned by the tangents of [`ContactFrame::from_normal`];
    /// points deeper than `thickness` behind it are not considered touching.
    Plane { normal: Vector3<f64>, half_extents: Option<[f64; 2]>, thickness: f64 },
    Mesh { vertices: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]> },
}

/// Prescribed rigid motion: constant linear velocity plus constant angular
/// velocity about a fixed world pivot.
#[derive(Clone, Debug, PartialEq)]
pub struct ColliderMotion {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    /// m/s
    pub linear_velocity: Vector3<f64>,
    /// rad/s, world frame
    pub angular_velocity: Vector3<f64>,
    pub pivot: Vector3<f64>,
}

impl Default for ColliderMotion {
    fn default() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            pivot: Vector3::zeros(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Collider {
    pub shape: ColliderShape,
    pub motion: ColliderMotion,
}

impl Collider {
    pub fn fixed_plane(point: Vector3<f64>, normal: Vector3<f64>) -> Self {
        let n = normal.normalize();
        Self {
            shape: ColliderShape::Plane { normal: n, half_extents: None, thickness: f64::INFINITY },
            motion: ColliderMotion { position: point, ..Default::default() },
        }
    }

    /// Local-to-world transform at time `t`.
    pub fn pose(&self, t: f64) -> Isometry3<f64> {
        let m = &self.motion;
        let spin = UnitQuaternion::from_scaled_axis(m.angular_velocity * t);
        let position = m.pivot + spin * (m.position - m.pivot) + m.linear_velocity * t;
        Isometry3::from_parts(Translation3::from(position), spin * m.orientation)
    }

    pub fn is_moving(&self) -> bool {
        self.motion.linear_velocity != Vector3::zeros() || self.motion.angular_velocity != Vector3::zeros()
    }

    pub fn feature_count(&self) -> usize {
        match &self.shape {
            ColliderShape::Plane { .. } => 1,
            ColliderShape::Mesh { triangles, .. } => triangles.len(),
        }
    }

    /// Closest point of `feature` to `p` and the feature's outward normal,
    /// both in world space at time `t`.
    pub fn closest_on_feature(&self, feature: usize, p: &Vector3<f64>, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        let pose = self.pose(t);
        match &self.shape {
            ColliderShape::Plane { normal, .. } => {
                let n = pose.rotation * normal;
                let o = pose.translation.vector;
                (p - n * n.dot(&(p - o)), n)
            }
            ColliderShape::Mesh { vertices, triangles } => {
                let tri = triangles[feature];
                let [a, b, c] = tri.map(|i| pose * nalgebra::Point3::from(vertices[i])).map(|q| q.coords);
                let w = closest_point_on_triangle(p, &a, &b, &c);
                let n = triangle_normal(&a, &b, &c).unwrap_or_else(Vector3::y);
                (barycentric_point(&w, &a, &b, &c), n)
            }
        }
    }

    /// Signed distance of `p` to the plane and whether `p` lies over the
    /// plate footprint within the depth window `[-thickness, threshold]`.
    pub(crate) fn plane_query(&self, p: &Vector3<f64>, t: f64, threshold: f64) -> Option<f64> {
        let ColliderShape::Plane { normal, half_extents, thickness } = &self.shape else {
            return None;
        };
        let pose = self.pose(t);
        let local = pose.inverse_transform_vector(&(p - pose.translation.vector));
        let d = normal.dot(&local);
        if d > threshold || d < -thickness {
            return None;
        }
        if let Some([hu, hv]) = half_extents {
            let frame = ContactFrame::from_normal(*normal);
            if local.dot(&frame.tangent1).abs() > *hu || local.dot(&frame.tangent2).abs() > *hv {
                return None;
            }
        }
        Some(d)
    }

    /// World-space vertices at time `t` (meshes only).
    pub(crate) fn world_vertices(&self, t: f64) -> Vec<Vector3<f64>> {
        match &self.shape {
            ColliderShape::Plane { .. } => Vec::new(),
            ColliderShape::Mesh { vertices, .. } => {
                let pose = self.pose(t);
                vertices.iter().map(|v| (pose * nalgebra::Point3::from(*v)).coords).collect()
            }
        }
    }

    pub fn to_world(&self, local: &Vector3<f64>, t: f64) -> Vector3<f64> {
        (self.pose(t) * nalgebra::Point3::from(*local)).coords
    }

    pub fn to_local(&self, world: &Vector3<f64>, t: f64) -> Vector3<f64> {
        self.pose(t).inverse_transform_point(&nalgebra::Point3::from(*world)).coords
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn pivot_rotation_moves_origin_on_circle() {
        let c = Collider {
            shape: ColliderShape::Plane { normal: Vector3::x(), half_extents: None, thickness: 1.0 },
            motion: ColliderMotion {
                position: Vector3::new(1.0, 0.0, 0.0),
                angular_velocity: Vector3::new(0.0, 0.0, FRAC_PI_2),
                ..Default::default()
            },
        };
        let pose = c.pose(1.0);
        assert!((pose.translation.vector - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        assert!((pose.rotation * Vector3::x() - Vector3::y()).norm() < 1e-12);
        let p = Vector3::new(0.3, -0.2, 0.7);
        assert!((c.to_local(&c.to_world(&p, 0.4), 0.4) - p).norm() < 1e-12);
    }

    #[test]
    fn finite_plate_footprint() {
        let c = Collider {
            shape: ColliderShape::Plane { normal: Vector3::y(), half_extents: Some([0.5, 0.5]), thickness: 0.1 },
            motion: ColliderMotion::default(),
        };
        assert_eq!(c.plane_query(&Vector3::new(0.1, 0.01, 0.1), 0.0, 0.02), Some(0.01));
        assert_eq!(c.plane_query(&Vector3::new(0.9, 0.01, 0.1), 0.0, 0.02), None);
        assert_eq!(c.plane_query(&Vector3::new(0.1, -0.2, 0.1), 0.0, 0.02), None);
    }
}
