use nalgebra::Vector3;

use super::geometry::{barycentric_point, closest_point_on_triangle, triangle_normal, Aabb};
use super::{Attachment, Collider, ColliderShape, CollisionError, Owner, ProximityPair, SceneView};
use crate::dynamics::{Body, RigidShape, SoftBody};

/// Discrete proximity query at the instant described by `view`.
///
/// Produces vertex–plane, vertex–triangle (collider meshes and, for each
/// pair of soft bodies `i < j`, vertices of `i` against surface triangles of
/// `j`), sphere–plane and box-corner–plane pairs whose signed distance is at
/// most `threshold`. Each A-side point keeps only its closest feature per
/// opposing object. Pairs between two immovable points are skipped.
pub fn detect(view: &SceneView, threshold: f64) -> Result<Vec<ProximityPair>, CollisionError> {
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(CollisionError::InvalidThreshold(threshold));
    }
    let mut pairs = Vec::new();
    for (a, body) in view.bodies.iter().enumerate() {
        match body {
            Body::Soft(soft) => {
                let bounds = Aabb::from_points(&soft_points(view, a, soft)).inflate(threshold);
                for (c, collider) in view.colliders.iter().enumerate() {
                    soft_vs_collider(view, a, soft, c, collider, &bounds, threshold, &mut pairs);
                }
                for (b, other) in view.bodies.iter().enumerate().skip(a + 1) {
                    if let Body::Soft(other) = other {
                        soft_vs_soft(view, a, soft, b, other, &bounds, threshold, &mut pairs);
                    }
                }
            }
            Body::Rigid(rigid) => {
                for (c, collider) in view.colliders.iter().enumerate() {
                    rigid_vs_plane(view, a, &rigid.shape, c, collider, threshold, &mut pairs);
                }
            }
        }
    }
    pairs.sort_by(|p, q| {
        (p.object_a, p.object_b, p.attach_a.feature_id(), p.attach_b.feature_id()).cmp(&(
            q.object_a,
            q.object_b,
            q.attach_a.feature_id(),
            q.attach_b.feature_id(),
        ))
    });
    Ok(pairs)
}

fn soft_points(view: &SceneView, body: usize, soft: &SoftBody) -> Vec<Vector3<f64>> {
    soft.surface_vertices.iter().map(|&v| view.node(body, v)).collect()
}

#[allow(clippy::too_many_arguments)]
fn soft_vs_collider(
    view: &SceneView,
    a: usize,
    soft: &SoftBody,
    c: usize,
    collider: &Collider,
    bounds: &Aabb,
    threshold: f64,
    out: &mut Vec<ProximityPair>,
) {
    match &collider.shape {
        ColliderShape::Plane { normal, .. } => {
            let n = collider.pose(view.time).rotation * normal;
            for &v in &soft.surface_vertices {
                if soft.fixed[v] {
                    continue;
                }
                let p = view.node(a, v);
                if let Some(d) = collider.plane_query(&p, view.time, threshold) {
                    let pb = p - n * d;
                    out.push(ProximityPair {
                        object_a: a,
                        object_b: Owner::Collider(c),
                        attach_a: Attachment::Vertex { node: v },
                        attach_b: Attachment::ColliderPoint { local: collider.to_local(&pb, view.time), feature: 0 },
                        pa: p,
                        pb,
                        normal: n,
                    });
                }
            }
        }
        ColliderShape::Mesh { triangles, .. } => {
            let verts = collider.world_vertices(view.time);
            if !Aabb::from_points(&verts).inflate(threshold).overlaps(bounds) {
                return;
            }
            let boxes: Vec<Aabb> = triangles.iter().map(|t| Aabb::from_points(t.iter().map(|&i| &verts[i])).inflate(threshold)).collect();
            for &v in &soft.surface_vertices {
                if soft.fixed[v] {
                    continue;
                }
                let p = view.node(a, v);
                let hit = closest_triangle(&p, triangles, &verts, &boxes, threshold, |_| true);
                if let Some((t, _, pb, n)) = hit {
                    out.push(ProximityPair {
                        object_a: a,
                        object_b: Owner::Collider(c),
                        attach_a: Attachment::Vertex { node: v },
                        attach_b: Attachment::ColliderPoint { local: collider.to_local(&pb, view.time), feature: t },
                        pa: p,
                        pb,
                        normal: n,
                    });
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn soft_vs_soft(
    view: &SceneView,
    a: usize,
    soft: &SoftBody,
    b: usize,
    other: &SoftBody,
    bounds: &Aabb,
    threshold: f64,
    out: &mut Vec<ProximityPair>,
) {
    let verts: Vec<Vector3<f64>> = (0..other.node_count()).map(|i| view.node(b, i)).collect();
    let other_bounds = Aabb::from_points(other.surface_vertices.iter().map(|&i| &verts[i])).inflate(threshold);
    if !other_bounds.overlaps(bounds) {
        return;
    }
    let boxes: Vec<Aabb> = other.surface.iter().map(|t| Aabb::from_points(t.iter().map(|&i| &verts[i])).inflate(threshold)).collect();
    for &v in &soft.surface_vertices {
        let p = view.node(a, v);
        if !other_bounds.contains(&p) {
            continue;
        }
        let movable = |t: usize| !soft.fixed[v] || other.surface[t].iter().any(|&n| !other.fixed[n]);
        if let Some((t, weights, pb, n)) = closest_triangle(&p, &other.surface, &verts, &boxes, threshold, movable) {
            out.push(ProximityPair {
                object_a: a,
                object_b: Owner::Body(b),
                attach_a: Attachment::Vertex { node: v },
                attach_b: Attachment::Triangle { triangle: t, nodes: other.surface[t], weights },
                pa: p,
                pb,
                normal: n,
            });
        }
    }
}

type TriangleHit = (usize, [f64; 3], Vector3<f64>, Vector3<f64>);

/// Closest admissible triangle within `threshold` of `p`; ties go to the lower index.
fn closest_triangle(
    p: &Vector3<f64>,
    triangles: &[[usize; 3]],
    verts: &[Vector3<f64>],
    boxes: &[Aabb],
    threshold: f64,
    admissible: impl Fn(usize) -> bool,
) -> Option<TriangleHit> {
    let mut best: Option<(f64, TriangleHit)> = None;
    for (t, tri) in triangles.iter().enumerate() {
        if !boxes[t].contains(p) || !admissible(t) {
            continue;
        }
        let [x, y, z] = tri.map(|i| verts[i]);
        let Some(n) = triangle_normal(&x, &y, &z) else { continue };
        let w = closest_point_on_triangle(p, &x, &y, &z);
        let q = barycentric_point(&w, &x, &y, &z);
        let dist = (p - q).norm();
        if dist <= threshold && best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, (t, w, q, n)));
        }
    }
    best.map(|(_, hit)| hit)
}

fn rigid_vs_plane(
    view: &SceneView,
    a: usize,
    shape: &RigidShape,
    c: usize,
    collider: &Collider,
    threshold: f64,
    out: &mut Vec<ProximityPair>,
) {
    let ColliderShape::Plane { normal, .. } = &collider.shape else { return };
    let (centre, rot) = view.rigid_pose(a);
    let n = collider.pose(view.time).rotation * normal;
    let candidates: Vec<Vector3<f64>> = match *shape {
        RigidShape::Sphere { radius } => vec![rot.inverse() * (-n * radius)],
        RigidShape::Cuboid { .. } => shape.corners(),
    };
    for (k, local) in candidates.into_iter().enumerate() {
        let p = centre + rot * local;
        if let Some(d) = collider.plane_query(&p, view.time, threshold) {
            let pb = p - n * d;
            out.push(ProximityPair {
                object_a: a,
                object_b: Owner::Collider(c),
                attach_a: Attachment::RigidPoint { local, feature: k },
                attach_b: Attachment::ColliderPoint { local: collider.to_local(&pb, view.time), feature: 0 },
                pa: p,
                pb,
                normal: n,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Material, MechanicalState, RigidBody, TetMesh};
    use nalgebra::UnitQuaternion;

    fn cube(min: Vector3<f64>) -> Body {
        let mesh = TetMesh::box_grid(min, Vector3::repeat(0.1), [1, 1, 1]);
        Body::Soft(SoftBody::new(mesh, Material::default(), &[]).unwrap())
    }

    fn states(bodies: &[Body]) -> Vec<MechanicalState> {
        bodies.iter().map(|b| b.initial_state(Vector3::zeros(), UnitQuaternion::identity())).collect()
    }

    #[test]
    fn distant_cubes_have_no_pairs() {
        let bodies = [cube(Vector3::zeros()), cube(Vector3::new(1.1, 0.0, 0.0))];
        let s = states(&bodies);
        assert!(detect(&SceneView::new(&bodies, &s, &[], 0.0), 0.01).unwrap().is_empty());
    }

    #[test]
    fn vertex_below_plane_projects_onto_it() {
        let bodies = [Body::Soft(SoftBody::point_mass(Vector3::new(0.3, -0.005, 0.2), 1.0).unwrap())];
        let s = states(&bodies);
        let planes = [Collider::fixed_plane(Vector3::zeros(), Vector3::y())];
        let pairs = detect(&SceneView::new(&bodies, &s, &planes, 0.0), 0.01).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].pa, Vector3::new(0.3, -0.005, 0.2));
        assert_eq!(pairs[0].pb, Vector3::new(0.3, 0.0, 0.2));
        assert!((pairs[0].signed_distance() + 0.005).abs() < 1e-15);
    }

    #[test]
    fn vertex_over_triangle_gets_interior_weights() {
        let top = TetMesh::box_grid(Vector3::new(0.02, 0.1005, 0.03), Vector3::repeat(0.05), [1, 1, 1]);
        let bodies = [Body::Soft(SoftBody::new(top, Material::default(), &[]).unwrap()), cube(Vector3::zeros())];
        let s = states(&bodies);
        let pairs = detect(&SceneView::new(&bodies, &s, &[], 0.0), 0.001).unwrap();
        assert_eq!(pairs.len(), 4, "bottom face vertices of the small cube");
        for p in &pairs {
            let Attachment::Triangle { weights, nodes, .. } = p.attach_b else { panic!() };
            assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let recon: Vector3<f64> = nodes.iter().zip(&weights).map(|(n, w)| s[1].node(*n) * *w).sum();
            assert!((recon - p.pb).norm() < 1e-12);
            assert!((p.pb - Vector3::new(p.pa.x, 0.1, p.pa.z)).norm() < 1e-10);
            assert!((p.normal - Vector3::y()).norm() < 1e-12);
        }
    }

    #[test]
    fn sphere_on_plane() {
        let bodies = [Body::Rigid(RigidBody::new(1.0, RigidShape::Sphere { radius: 0.1 }).unwrap())];
        let s = vec![bodies[0].initial_state(Vector3::new(0.0, 0.105, 0.0), UnitQuaternion::identity())];
        let planes = [Collider::fixed_plane(Vector3::zeros(), Vector3::y())];
        let pairs = detect(&SceneView::new(&bodies, &s, &planes, 0.0), 0.01).unwrap();
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].signed_distance() - 0.005).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_threshold() {
        assert!(matches!(detect(&SceneView::new(&[], &[], &[], 0.0), 0.0), Err(CollisionError::InvalidThreshold(_))));
    }
}
