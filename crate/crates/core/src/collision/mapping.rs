use nalgebra::{UnitQuaternion, Vector3};

use super::{Collider, CollisionError};
use crate::dynamics::{skew, Body, MechanicalState};
use crate::linalg::SparseRows;

/// Owner of the B side of a pair. The A side is always a simulated body.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Owner {
    Body(usize),
    Collider(usize),
}

/// Where a proximity point lives on its owner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Attachment {
    Vertex { node: usize },
    /// Point on a surface triangle of a soft body.
    Triangle { triangle: usize, nodes: [usize; 3], weights: [f64; 3] },
    /// Body-frame offset from a rigid body's centre of mass.
    RigidPoint { local: Vector3<f64>, feature: usize },
    /// Point fixed in a collider's local frame, on collider feature `feature`.
    ColliderPoint { local: Vector3<f64>, feature: usize },
}

impl Attachment {
    /// Vertex, triangle, corner or collider-feature id used for ordering.
    pub fn feature_id(&self) -> usize {
        match *self {
            Attachment::Vertex { node } => node,
            Attachment::Triangle { triangle, .. } => triangle,
            Attachment::RigidPoint { feature, .. } | Attachment::ColliderPoint { feature, .. } => feature,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProximityPair {
    pub object_a: usize,
    pub object_b: Owner,
    pub attach_a: Attachment,
    pub attach_b: Attachment,
    /// Proximity positions at detection time.
    pub pa: Vector3<f64>,
    pub pb: Vector3<f64>,
    /// Surface normal of the B side at detection, pointing toward A.
    pub normal: Vector3<f64>,
}

impl ProximityPair {
    pub fn signed_distance(&self) -> f64 {
        self.normal.dot(&(self.pa - self.pb))
    }

    pub fn involves_body(&self, body: usize) -> bool {
        self.object_a == body || self.object_b == Owner::Body(body)
    }
}

/// Positions of the two proximity points of one pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointPair {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
}

impl PointPair {
    pub fn relative(&self) -> Vector3<f64> {
        self.a - self.b
    }
}

/// Geometry of all objects at one instant: body DOF positions plus the
/// time at which collider poses are evaluated.
#[derive(Clone, Debug)]
pub struct SceneView<'a> {
    pub bodies: &'a [Body],
    pub positions: Vec<&'a [f64]>,
    /// Base orientation of each rigid body; `q[3..6]` rotates on top of it.
    pub orientations: Vec<Option<UnitQuaternion<f64>>>,
    pub colliders: &'a [Collider],
    pub time: f64,
}

impl<'a> SceneView<'a> {
    pub fn new(bodies: &'a [Body], states: &'a [MechanicalState], colliders: &'a [Collider], time: f64) -> Self {
        Self {
            bodies,
            positions: states.iter().map(|s| s.q.as_slice()).collect(),
            orientations: states.iter().map(|s| s.orientation).collect(),
            colliders,
            time,
        }
    }

    /// Same orientations as `states`, but DOF positions taken from `q`.
    pub fn with_positions(bodies: &'a [Body], states: &[MechanicalState], q: &'a [Vec<f64>], colliders: &'a [Collider], time: f64) -> Self {
        Self {
            bodies,
            positions: q.iter().map(Vec::as_slice).collect(),
            orientations: states.iter().map(|s| s.orientation).collect(),
            colliders,
            time,
        }
    }

    pub fn node(&self, body: usize, i: usize) -> Vector3<f64> {
        let q = self.positions[body];
        Vector3::new(q[3 * i], q[3 * i + 1], q[3 * i + 2])
    }

    pub fn rigid_pose(&self, body: usize) -> (Vector3<f64>, UnitQuaternion<f64>) {
        let q = self.positions[body];
        let base = self.orientations[body].unwrap_or_else(UnitQuaternion::identity);
        let spin = UnitQuaternion::from_scaled_axis(Vector3::new(q[3], q[4], q[5]));
        (Vector3::new(q[0], q[1], q[2]), spin * base)
    }

    /// World position of an attachment on `owner`.
    pub fn point(&self, owner: Owner, attachment: &Attachment) -> Vector3<f64> {
        match (owner, attachment) {
            (Owner::Body(b), Attachment::Vertex { node }) => self.node(b, *node),
            (Owner::Body(b), Attachment::Triangle { nodes, weights, .. }) => {
                nodes.iter().zip(weights).map(|(n, w)| self.node(b, *n) * *w).sum()
            }
            (Owner::Body(b), Attachment::RigidPoint { local, .. }) => {
                let (x, r) = self.rigid_pose(b);
                x + r * local
            }
            (Owner::Collider(c), Attachment::ColliderPoint { local, .. }) => self.colliders[c].to_world(local, self.time),
            _ => Vector3::from_element(f64::NAN),
        }
    }

    pub fn points(&self, pairs: &[ProximityPair]) -> Vec<PointPair> {
        pairs
            .iter()
            .map(|p| PointPair { a: self.point(Owner::Body(p.object_a), &p.attach_a), b: self.point(p.object_b, &p.attach_b) })
            .collect()
    }
}

/// Signed mapping Jacobian of `body`: `3·pairs.len()` rows, one 3-row block
/// per pair. Blocks where `body` owns side A map DOF velocities to the
/// velocity of `pA`; blocks where it owns side B carry the negated map, so
/// that `G v` is the body's contribution to `d(pA - pB)/dt`. Columns of fixed
/// DOFs are zero.
pub fn build_mapping_jacobian(pairs: &[ProximityPair], body: usize, view: &SceneView) -> Result<SparseRows, CollisionError> {
    let model = view.bodies.get(body).ok_or(CollisionError::UnknownBody { body })?;
    let dofs = model.dofs();
    let fixed = model.fixed_dofs();
    let mut g = SparseRows::new(3 * pairs.len(), dofs);
    for (i, pair) in pairs.iter().enumerate() {
        let sides = [(pair.object_a == body, 1.0, &pair.attach_a), (pair.object_b == Owner::Body(body), -1.0, &pair.attach_b)];
        for (owns, sign, attachment) in sides {
            if !owns {
                continue;
            }
            let mut put = |r: usize, c: usize, v: f64| {
                if !fixed[c] {
                    g.add(3 * i + r, c, sign * v);
                }
            };
            match (model, attachment) {
                (Body::Soft(s), Attachment::Vertex { node }) => {
                    check_node(i, *node, s.node_count())?;
                    for r in 0..3 {
                        put(r, 3 * node + r, 1.0);
                    }
                }
                (Body::Soft(s), Attachment::Triangle { nodes, weights, .. }) => {
                    let sum: f64 = weights.iter().sum();
                    if weights.iter().any(|w| *w < -1e-12) || (sum - 1.0).abs() > 1e-9 {
                        return Err(CollisionError::InvalidAttachment { pair: i, reason: format!("barycentric weights {weights:?}") });
                    }
                    for (n, w) in nodes.iter().zip(weights) {
                        check_node(i, *n, s.node_count())?;
                        for r in 0..3 {
                            put(r, 3 * n + r, *w);
                        }
                    }
                }
                (Body::Rigid(_), Attachment::RigidPoint { local, .. }) => {
                    let (_, rot) = view.rigid_pose(body);
                    let arm = skew(&(rot * local));
                    for r in 0..3 {
                        put(r, r, 1.0);
                        for c in 0..3 {
                            put(r, 3 + c, -arm[(r, c)]);
                        }
                    }
                }
                _ => {
                    return Err(CollisionError::InvalidAttachment { pair: i, reason: "attachment kind does not match body".into() });
                }
            }
        }
    }
    Ok(g)
}

fn check_node(pair: usize, node: usize, count: usize) -> Result<(), CollisionError> {
    if node >= count {
        return Err(CollisionError::InvalidAttachment { pair, reason: format!("node {node} out of {count}") });
    }
    Ok(())
}
