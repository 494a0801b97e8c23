use nalgebra::{Matrix3, Vector3};

use super::{CollisionError, Owner, PointPair, ProximityPair, SceneView};

/// Separations at or below this length (m) are treated as coincident.
pub const COINCIDENCE_TOLERANCE: f64 = 1e-9;

/// Between two soft bodies, a direction `pA - pB` that deviates from the
/// reference normal by more than 45° is noise from near-coincident points
/// and is not used.
const MIN_ALIGNMENT: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Orthonormal contact basis; rows of [`ContactFrame::matrix`] are `(n, t1, t2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactFrame {
    /// Points from B toward A.
    pub normal: Vector3<f64>,
    pub tangent1: Vector3<f64>,
    pub tangent2: Vector3<f64>,
}

impl ContactFrame {
    /// Completes a unit normal: `t1` is the global x-axis projected onto the
    /// tangent plane (the z-axis when x is parallel to `n`), `t2 = n × t1`.
    pub fn from_normal(normal: Vector3<f64>) -> Self {
        let n = normal.normalize();
        let project = |axis: Vector3<f64>| axis - n * n.dot(&axis);
        let mut t1 = project(Vector3::x());
        if t1.norm() <= 1e-6 {
            t1 = project(Vector3::z());
        }
        let t1 = t1.normalize();
        Self { normal: n, tangent1: t1, tangent2: n.cross(&t1) }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_rows(&[self.normal.transpose(), self.tangent1.transpose(), self.tangent2.transpose()])
    }

    /// Gap components `(δ_n, δ_t1, δ_t2)` of a relative displacement.
    pub fn project(&self, relative: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(self.normal.dot(relative), self.tangent1.dot(relative), self.tangent2.dot(relative))
    }

    /// Angle between the normals of two frames, in radians.
    pub fn angle_to(&self, other: &ContactFrame) -> f64 {
        self.normal.cross(&other.normal).norm().atan2(self.normal.dot(&other.normal))
    }
}

/// Frames at detection time from the pairs' stored proximity positions.
pub fn build_frames(pairs: &[ProximityPair], view: &SceneView) -> Result<Vec<ContactFrame>, CollisionError> {
    let points: Vec<PointPair> = pairs.iter().map(|p| PointPair { a: p.pa, b: p.pb }).collect();
    frames_from_points(pairs, &points, None, view)
}

/// Frames re-evaluated on updated proximity positions. Attachments are not
/// touched; only directions change. Collider features are taken at
/// `view.time`.
pub fn relinearize(
    pairs: &[ProximityPair],
    points: &[PointPair],
    previous: &[ContactFrame],
    view: &SceneView,
) -> Result<Vec<ContactFrame>, CollisionError> {
    if points.len() != pairs.len() || previous.len() != pairs.len() {
        return Err(CollisionError::LengthMismatch { expected: pairs.len(), found: points.len().min(previous.len()) });
    }
    frames_from_points(pairs, points, Some(previous), view)
}

fn frames_from_points(
    pairs: &[ProximityPair],
    points: &[PointPair],
    previous: Option<&[ContactFrame]>,
    view: &SceneView,
) -> Result<Vec<ContactFrame>, CollisionError> {
    pairs
        .iter()
        .zip(points)
        .enumerate()
        .map(|(i, (pair, pts))| {
            let prev = previous.map(|p| &p[i]);
            let (direction, reference, strict) = match pair.object_b {
                // Against a collider the direction runs from the closest point
                // of the feature at its current pose, so a moving or sliding
                // contact still gets the surface's true normal.
                Owner::Collider(c) => {
                    let collider = view.colliders.get(c).ok_or(CollisionError::UnknownCollider { collider: c })?;
                    let feature = pair.attach_b.feature_id();
                    let (anchor, surface) = collider.closest_on_feature(feature, &pts.a, view.time);
                    (pts.a - anchor, surface, false)
                }
                Owner::Body(_) => (pts.relative(), prev.map_or(pair.normal, |f| f.normal), true),
            };
            choose_normal(&direction, &reference, strict)
                .map(ContactFrame::from_normal)
                .or_else(|| prev.copied())
                .or_else(|| reference.try_normalize(1e-12).map(ContactFrame::from_normal))
                .ok_or(CollisionError::DegenerateFrame { pair: i })
        })
        .collect()
}

fn choose_normal(direction: &Vector3<f64>, reference: &Vector3<f64>, strict: bool) -> Option<Vector3<f64>> {
    let len = direction.norm();
    if !(len > COINCIDENCE_TOLERANCE) {
        return None;
    }
    let mut n = direction / len;
    let r = reference.try_normalize(1e-12);
    if let Some(r) = r {
        if n.dot(&r) < 0.0 {
            n = -n;
        }
        if strict && n.dot(&r) < MIN_ALIGNMENT {
            return None;
        }
    }
    Some(n)
}
