//! Mechanical models and the implicit (backward Euler) step.
//!
//! Every body reduces to one linear system `A Δv = b + h f_c` per step:
//! `A = M + hB + h²K`, `b = h f_ext - h f(q,v) - h² K v` for soft bodies and
//! `A = M`, `b = h f_ext` for rigid ones. Fixed DOFs get identity rows and a
//! zero right-hand side.

mod mesh;
mod rigid;
mod soft;

use std::sync::Arc;

use nalgebra::{UnitQuaternion, Vector3};
use thiserror::Error;

pub use mesh::{signed_volume, TetMesh};
pub use rigid::{skew, RigidBody, RigidShape};
pub use soft::{element_stiffness, Material, SoftBody};

use crate::linalg::{self, Factorization, LinalgError, SparseSym};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("tetrahedron {tet} has non-positive rest volume {volume:e}")]
    DegenerateTet { tet: usize, volume: f64 },
    #[error("non-finite force at DOF {dof}")]
    NonFiniteForce { dof: usize },
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid rigid body: {0}")]
    InvalidRigid(String),
    #[error("index {index} out of range for {len} entries")]
    InvalidIndex { index: usize, len: usize },
    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),
    #[error("state has {found} DOFs, body has {expected}")]
    StateMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Debug)]
pub enum Body {
    Soft(SoftBody),
    Rigid(RigidBody),
}

impl Body {
    pub fn dofs(&self) -> usize {
        match self {
            Body::Soft(s) => s.dofs(),
            Body::Rigid(_) => 6,
        }
    }

    /// Per-DOF flag of immovable DOFs.
    pub fn fixed_dofs(&self) -> Vec<bool> {
        match self {
            Body::Soft(s) => s.fixed_dofs(),
            Body::Rigid(_) => vec![false; 6],
        }
    }

    pub fn is_rigid(&self) -> bool {
        matches!(self, Body::Rigid(_))
    }

    /// Whether `A` can change between steps (rigid inertia follows the orientation).
    pub fn system_depends_on_state(&self) -> bool {
        self.is_rigid()
    }

    /// Rest/initial state at zero velocity.
    pub fn initial_state(&self, position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> MechanicalState {
        match self {
            Body::Soft(s) => MechanicalState { q: s.rest_positions(), v: vec![0.0; s.dofs()], orientation: None },
            Body::Rigid(_) => MechanicalState {
                q: vec![position.x, position.y, position.z, 0.0, 0.0, 0.0],
                v: vec![0.0; 6],
                orientation: Some(orientation),
            },
        }
    }
}

/// Stacked DOF positions and velocities of one body.
///
/// Rigid bodies store `q = [x; θ]` where `θ` is a rotation-vector increment
/// on top of `orientation`; `v = [v_lin; ω]` with `ω` in world frame.
/// [`MechanicalState::normalize_rigid`] folds `θ` back into `orientation`.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanicalState {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub orientation: Option<UnitQuaternion<f64>>,
}

impl MechanicalState {
    pub fn dofs(&self) -> usize {
        self.q.len()
    }

    /// Full rotation of a rigid state including the pending increment.
    pub fn rotation(&self) -> UnitQuaternion<f64> {
        let base = self.orientation.unwrap_or_else(UnitQuaternion::identity);
        if self.q.len() == 6 && self.orientation.is_some() {
            UnitQuaternion::from_scaled_axis(Vector3::new(self.q[3], self.q[4], self.q[5])) * base
        } else {
            base
        }
    }

    pub fn normalize_rigid(&mut self) {
        if self.orientation.is_some() {
            let mut r = self.rotation();
            r.renormalize();
            self.orientation = Some(r);
            self.q[3..6].fill(0.0);
        }
    }

    pub fn node(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.q[3 * i], self.q[3 * i + 1], self.q[3 * i + 2])
    }
}

/// External loading: uniform gravity plus constant point forces.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExternalLoad {
    /// m/s²
    pub gravity: Vector3<f64>,
    /// `(node, force)`; rigid bodies apply these at the centre of mass.
    pub forces: Vec<(usize, Vector3<f64>)>,
}

/// Assembles `(A, b)` for one body at `state`.
pub fn assemble_system(body: &Body, state: &MechanicalState, h: f64, load: &ExternalLoad) -> Result<(SparseSym, Vec<f64>), DynamicsError> {
    Ok((assemble_matrix(body, state, h)?, assemble_rhs(body, state, h, load)?))
}

pub fn assemble_matrix(body: &Body, state: &MechanicalState, h: f64) -> Result<SparseSym, DynamicsError> {
    check(body, state, h)?;
    match body {
        Body::Soft(s) => {
            let alpha = s.material.rayleigh_mass;
            let beta = s.material.rayleigh_stiffness;
            let m_scaled = SparseSym::from_diagonal(&s.mass_diagonal().iter().map(|v| (1.0 + h * alpha) * v).collect::<Vec<_>>());
            let mut a = m_scaled.add_scaled(s.stiffness(), h * beta + h * h)?;
            a.constrain_identity(&s.fixed_dofs());
            Ok(a)
        }
        Body::Rigid(r) => {
            let inertia = r.world_inertia(&state.rotation());
            let mut t = Vec::with_capacity(12);
            for i in 0..3 {
                t.push((i, i, r.mass));
                for j in 0..3 {
                    t.push((3 + i, 3 + j, inertia[(i, j)]));
                }
            }
            Ok(SparseSym::from_triplets(6, &t)?)
        }
    }
}

pub fn assemble_rhs(body: &Body, state: &MechanicalState, h: f64, load: &ExternalLoad) -> Result<Vec<f64>, DynamicsError> {
    check(body, state, h)?;
    let b = match body {
        Body::Soft(s) => {
            let n = s.dofs();
            let mass = s.mass_diagonal();
            let mut f_ext: Vec<f64> = (0..n).map(|i| mass[i] * load.gravity[i % 3]).collect();
            for (node, f) in &load.forces {
                if *node >= s.node_count() {
                    return Err(DynamicsError::InvalidIndex { index: *node, len: s.node_count() });
                }
                for c in 0..3 {
                    f_ext[3 * node + c] += f[c];
                }
            }
            let f_int = s.internal_force(&state.q, &state.v);
            let kv = s.stiffness().matvec(&state.v)?;
            let fixed = s.fixed_dofs();
            (0..n)
                .map(|i| if fixed[i] { 0.0 } else { h * f_ext[i] - h * f_int[i] - h * h * kv[i] })
                .collect::<Vec<f64>>()
        }
        Body::Rigid(r) => {
            let mut f = r.mass * load.gravity;
            for (_, extra) in &load.forces {
                f += extra;
            }
            vec![h * f.x, h * f.y, h * f.z, 0.0, 0.0, 0.0]
        }
    };
    if let Some(dof) = b.iter().position(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFiniteForce { dof });
    }
    Ok(b)
}

fn check(body: &Body, state: &MechanicalState, h: f64) -> Result<(), DynamicsError> {
    if !(h > 0.0) {
        return Err(DynamicsError::InvalidTimeStep(h));
    }
    if state.q.len() != body.dofs() || state.v.len() != body.dofs() {
        return Err(DynamicsError::StateMismatch { expected: body.dofs(), found: state.q.len() });
    }
    Ok(())
}

/// Unconstrained motion of one step plus the factorization that produced it.
#[derive(Clone, Debug)]
pub struct FreeMotion {
    pub dv_free: Vec<f64>,
    /// `q + h (v + dv_free)`
    pub q_free: Vec<f64>,
    pub factorization: Arc<Factorization>,
}

pub fn compute_free_motion(a: &SparseSym, b: &[f64], state: &MechanicalState, h: f64) -> Result<FreeMotion, DynamicsError> {
    let factorization = Arc::new(linalg::factorize(a)?);
    free_motion_with(factorization, b, state, h)
}

/// Free motion reusing an existing factorization of this step's `A`.
pub fn free_motion_with(factorization: Arc<Factorization>, b: &[f64], state: &MechanicalState, h: f64) -> Result<FreeMotion, DynamicsError> {
    let dv_free = linalg::solve(&factorization, b)?;
    let q_free = state.q.iter().zip(&state.v).zip(&dv_free).map(|((q, v), dv)| q + h * (v + dv)).collect();
    Ok(FreeMotion { dv_free, q_free, factorization })
}

/// Positions reached from the free state with an accumulated correction
/// `dv_cor`, without folding rigid rotations.
pub fn corrected_positions(free: &FreeMotion, dv_cor: &[f64], h: f64) -> Vec<f64> {
    free.q_free.iter().zip(dv_cor).map(|(q, dv)| q + h * dv).collect()
}

/// End-of-step state: `v' = v + dv_free + dv_cor`, `q' = q_free + h dv_cor`.
pub fn integrate_correction(state: &MechanicalState, free: &FreeMotion, dv_cor: &[f64], h: f64) -> MechanicalState {
    let v = state.v.iter().zip(&free.dv_free).zip(dv_cor).map(|((v, a), b)| v + a + b).collect();
    let mut next = MechanicalState { q: corrected_positions(free, dv_cor, h), v, orientation: state.orientation };
    next.normalize_rigid();
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(mass: f64) -> (Body, MechanicalState) {
        let body = Body::Soft(SoftBody::point_mass(Vector3::new(0.3, 1.0, -0.2), mass).unwrap());
        let state = body.initial_state(Vector3::zeros(), UnitQuaternion::identity());
        (body, state)
    }

    fn gravity() -> ExternalLoad {
        ExternalLoad { gravity: Vector3::new(0.0, -10.0, 0.0), forces: vec![] }
    }

    #[test]
    fn point_mass_system() {
        let (body, state) = point(2.0);
        let (a, b) = assemble_system(&body, &state, 0.01, &gravity()).unwrap();
        assert_eq!(a.to_dense(), {
            let mut m = crate::linalg::DenseMat::identity(3);
            m.scale(2.0);
            m
        });
        assert!((b[1] + 0.2).abs() < 1e-15 && b[0] == 0.0 && b[2] == 0.0);
        let free = compute_free_motion(&a, &b, &state, 0.01).unwrap();
        assert!((free.dv_free[1] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn rigid_system_is_generalized_mass() {
        let body = Body::Rigid(RigidBody::new(1.0, RigidShape::Sphere { radius: 0.5 }).unwrap());
        let state = body.initial_state(Vector3::new(0.0, 1.0, 0.0), UnitQuaternion::identity());
        let (a, b) = assemble_system(&body, &state, 0.01, &ExternalLoad::default()).unwrap();
        assert_eq!(b, vec![0.0; 6]);
        assert_eq!(a.get(0, 0), 1.0);
        assert!((a.get(4, 4) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rest_stays_at_rest() {
        let (body, state) = point(1.0);
        let (a, _) = assemble_system(&body, &state, 0.01, &ExternalLoad::default()).unwrap();
        let free = compute_free_motion(&a, &[0.0; 3], &state, 0.01).unwrap();
        assert_eq!(free.dv_free, vec![0.0; 3]);
        assert_eq!(free.q_free, state.q);
    }

    #[test]
    fn fixed_face_tet_matches_dense_oracle() {
        let mesh = TetMesh {
            nodes: vec![Vector3::zeros(), Vector3::new(0.1, 0.0, 0.0), Vector3::new(0.0, 0.0, 0.1), Vector3::new(0.03, 0.1, 0.02)],
            tets: vec![[0, 1, 2, 3]],
        };
        let mesh = if signed_volume(&mesh.nodes[0], &mesh.nodes[1], &mesh.nodes[2], &mesh.nodes[3]) < 0.0 {
            TetMesh { tets: vec![[0, 2, 1, 3]], ..mesh }
        } else {
            mesh
        };
        let body = Body::Soft(SoftBody::new(mesh, Material::default(), &[0, 1, 2]).unwrap());
        let state = body.initial_state(Vector3::zeros(), UnitQuaternion::identity());
        let (a, b) = assemble_system(&body, &state, 0.01, &gravity()).unwrap();
        let free = compute_free_motion(&a, &b, &state, 0.01).unwrap();
        // dense Gauss-Jordan on the same A
        let mut m = a.to_dense();
        let mut x = b.clone();
        let n = x.len();
        for c in 0..n {
            let p = m[(c, c)];
            for k in 0..n {
                m[(c, k)] /= p;
            }
            x[c] /= p;
            for r in 0..n {
                if r != c {
                    let f = m[(r, c)];
                    for k in 0..n {
                        m[(r, k)] -= f * m[(c, k)];
                    }
                    x[r] -= f * x[c];
                }
            }
        }
        for i in 0..n {
            assert!((free.dv_free[i] - x[i]).abs() <= 1e-10 * x[i].abs().max(1e-12), "{i}");
        }
        assert!(free.dv_free[..9].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn integrate_zero_and_cancelling_correction() {
        let (body, mut state) = point(1.0);
        state.v = vec![0.0, 0.0, 0.0];
        let (a, b) = assemble_system(&body, &state, 0.01, &gravity()).unwrap();
        let free = compute_free_motion(&a, &b, &state, 0.01).unwrap();
        let next = integrate_correction(&state, &free, &[0.0; 3], 0.01);
        assert_eq!(next.q, free.q_free);
        let cancel: Vec<f64> = free.dv_free.iter().map(|v| -v).collect();
        let next = integrate_correction(&state, &free, &cancel, 0.01);
        assert_eq!(next.v, vec![0.0; 3]);
        for (a, b) in next.q.iter().zip(&state.q) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_step_and_nan_forces() {
        let (body, state) = point(1.0);
        assert!(matches!(assemble_system(&body, &state, 0.0, &gravity()), Err(DynamicsError::InvalidTimeStep(_))));
        let load = ExternalLoad { gravity: Vector3::new(0.0, f64::NAN, 0.0), forces: vec![] };
        assert!(matches!(assemble_system(&body, &state, 0.01, &load), Err(DynamicsError::NonFiniteForce { dof: 1 })));
    }
}
