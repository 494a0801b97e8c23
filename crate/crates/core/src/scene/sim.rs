use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use nalgebra::Vector3;

use super::config::{ObjectConfig, SceneConfig, SoftSource};
use super::snapshot::{ContactRecord, Snapshot};
use super::SceneError;
use crate::collision::{build_frames, build_mapping_jacobian, detect, Collider, ContactFrame, ProximityPair, SceneView};
use crate::dynamics::{
    assemble_matrix, assemble_rhs, corrected_positions, free_motion_with, integrate_correction, Body, ExternalLoad, FreeMotion,
    MechanicalState, SoftBody, TetMesh,
};
use crate::linalg::{factorize, Factorization, SparseRows};
use crate::solver::{self, ContactProblem, IterationReport, NewtonOutcome, Scheme, SolverError};

/// Wall time of the phases outside the Newton loop.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub detect: Duration,
    /// Frames and mapping Jacobians.
    pub linearize: Duration,
    pub assemble: Duration,
    pub free_motion: Duration,
    /// Present only for the fast scheme.
    pub build_wg: Option<Duration>,
    /// Closing mechanical correction of the fast scheme.
    pub final_correction: Option<Duration>,
    pub integrate: Duration,
    pub total: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    /// Index of the step just taken, from 0.
    pub step: usize,
    /// s, at the end of the step.
    pub time: f64,
    pub scheme: Scheme,
    pub dofs: usize,
    pub pairs: usize,
    /// Constraint rows, three per pair.
    pub constraints: usize,
    pub timings: PhaseTimings,
    /// One entry per Newton iteration actually run.
    pub iterations: Vec<IterationReport>,
    /// m, at the free-motion state.
    pub penetration_before: f64,
    /// m, at the end-of-step state.
    pub penetration_after: f64,
    /// N, largest normal force of the step.
    pub lambda_n_max: f64,
    pub lambda_n_sum: f64,
}

impl StepReport {
    pub fn pgs_iterations(&self) -> usize {
        self.iterations.iter().map(|i| i.pgs_iterations).sum()
    }
}

/// Per-step contact data shared by all correction schemes.
pub struct Prepared {
    pub pairs: Vec<ProximityPair>,
    pub frames: Vec<ContactFrame>,
    pub mapping: Vec<SparseRows>,
    pub free: Vec<FreeMotion>,
    pub timings: PhaseTimings,
}

/// A simulated scene: static description plus the evolving state.
pub struct Scene {
    config: SceneConfig,
    bodies: Vec<Body>,
    colliders: Vec<Collider>,
    loads: Vec<ExternalLoad>,
    /// Soft-body `A` never changes, so its factorization is computed once.
    factors: Vec<OnceLock<Arc<Factorization>>>,
    state: Snapshot,
}

fn soft_mesh(source: &SoftSource, offset: &Vector3<f64>) -> TetMesh {
    match source {
        SoftSource::Box(b) => TetMesh::box_grid(b.min + offset, b.size, b.cells),
        SoftSource::Mesh(m) => {
            let mut m = m.clone();
            m.translate(offset);
            m
        }
    }
}

impl Scene {
    pub fn new(config: SceneConfig) -> Result<Self, SceneError> {
        config.validate().map_err(|message| SceneError::Validation { path: Default::default(), message })?;
        let mut bodies = Vec::new();
        let mut states = Vec::new();
        let mut colliders = Vec::new();
        for object in &config.objects {
            match object {
                ObjectConfig::Soft { source, offset, material, fixed_nodes, fixed_below, velocity } => {
                    let mesh = soft_mesh(source, offset);
                    let mut fixed = fixed_nodes.clone();
                    if let Some(y) = fixed_below {
                        fixed.extend((0..mesh.nodes.len()).filter(|&i| mesh.nodes[i].y <= y + 1e-12));
                    }
                    let body = Body::Soft(SoftBody::new(mesh, *material, &fixed)?);
                    let mut state = body.initial_state(Vector3::zeros(), Default::default());
                    let flags = body.fixed_dofs();
                    for (i, v) in state.v.iter_mut().enumerate() {
                        *v = if flags[i] { 0.0 } else { velocity[i % 3] };
                    }
                    bodies.push(body);
                    states.push(state);
                }
                ObjectConfig::Particle { position, mass, velocity } => {
                    let body = Body::Soft(SoftBody::point_mass(*position, *mass)?);
                    let mut state = body.initial_state(Vector3::zeros(), Default::default());
                    state.v = velocity.iter().copied().collect();
                    bodies.push(body);
                    states.push(state);
                }
                ObjectConfig::Rigid { body, position, orientation, velocity, angular_velocity } => {
                    let body = Body::Rigid(body.clone());
                    let mut state = body.initial_state(*position, *orientation);
                    state.v = velocity.iter().chain(angular_velocity.iter()).copied().collect();
                    bodies.push(body);
                    states.push(state);
                }
                ObjectConfig::Collider(c) => colliders.push(c.clone()),
            }
        }
        let loads = bodies.iter().map(|_| ExternalLoad { gravity: config.gravity, forces: vec![] }).collect();
        let factors = bodies.iter().map(|_| OnceLock::new()).collect();
        let state = Snapshot { step: 0, time: 0.0, bodies: states, contacts: vec![] };
        Ok(Self { config, bodies, colliders, loads, factors, state })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    /// Changes the correction scheme for subsequent steps.
    pub fn set_scheme(&mut self, scheme: Scheme) {
        self.config.newton.scheme = scheme;
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    pub fn colliders(&self) -> &[Collider] {
        &self.colliders
    }

    pub fn snapshot(&self) -> &Snapshot {
        &self.state
    }

    pub fn states(&self) -> &[MechanicalState] {
        &self.state.bodies
    }

    /// Replaces the current state; the body layout must match.
    pub fn restore(&mut self, snapshot: Snapshot) -> Result<(), SceneError> {
        if snapshot.bodies.len() != self.bodies.len()
            || snapshot.bodies.iter().zip(&self.bodies).any(|(s, b)| s.q.len() != b.dofs() || s.v.len() != b.dofs())
        {
            return Err(SceneError::Snapshot("snapshot does not match the scene's bodies".into()));
        }
        self.state = snapshot;
        Ok(())
    }

    pub fn dofs(&self) -> usize {
        self.bodies.iter().map(Body::dofs).sum()
    }

    /// A view of the current state at the current time.
    pub fn view(&self) -> SceneView<'_> {
        SceneView::new(&self.bodies, &self.state.bodies, &self.colliders, self.state.time)
    }

    fn factorization(&self, b: usize, state: &MechanicalState) -> Result<Arc<Factorization>, SolverError> {
        let body = &self.bodies[b];
        let build = || -> Result<Arc<Factorization>, SolverError> { Ok(Arc::new(factorize(&assemble_matrix(body, state, self.config.dt)?)?)) };
        if body.system_depends_on_state() {
            return build();
        }
        if let Some(f) = self.factors[b].get() {
            return Ok(f.clone());
        }
        let f = build()?;
        Ok(self.factors[b].get_or_init(|| f).clone())
    }

    /// Detection, linearization and free motion for the current state.
    /// Identical for every correction scheme.
    pub fn prepare(&self) -> Result<Prepared, SolverError> {
        let mut timings = PhaseTimings::default();
        let view = self.view();
        let t = Instant::now();
        let pairs = detect(&view, self.config.threshold)?;
        timings.detect = t.elapsed();

        let t = Instant::now();
        let frames = build_frames(&pairs, &view)?;
        let mapping = (0..self.bodies.len()).map(|b| build_mapping_jacobian(&pairs, b, &view)).collect::<Result<Vec<_>, _>>()?;
        timings.linearize = t.elapsed();

        let h = self.config.dt;
        let t = Instant::now();
        let rhs = self
            .bodies
            .iter()
            .zip(&self.state.bodies)
            .zip(&self.loads)
            .map(|((b, s), l)| assemble_rhs(b, s, h, l))
            .collect::<Result<Vec<_>, _>>()?;
        let factors =
            self.state.bodies.iter().enumerate().map(|(b, s)| self.factorization(b, s)).collect::<Result<Vec<_>, _>>()?;
        timings.assemble = t.elapsed();

        let t = Instant::now();
        let free = factors
            .into_iter()
            .zip(&rhs)
            .zip(&self.state.bodies)
            .map(|((f, b), s)| free_motion_with(f, b, s, h))
            .collect::<Result<Vec<_>, _>>()?;
        timings.free_motion = t.elapsed();
        Ok(Prepared { pairs, frames, mapping, free, timings })
    }

    /// The correction phase's input for `prepared`.
    pub fn problem<'a>(&'a self, prepared: &'a Prepared) -> ContactProblem<'a> {
        ContactProblem {
            bodies: &self.bodies,
            states: &self.state.bodies,
            colliders: &self.colliders,
            free: &prepared.free,
            pairs: &prepared.pairs,
            frames: &prepared.frames,
            mapping: &prepared.mapping,
            h: self.config.dt,
            time_end: self.state.time + self.config.dt,
        }
    }

    /// Advances one time step. On error the state is left untouched.
    pub fn step(&mut self) -> Result<StepReport, SceneError> {
        let step = self.state.step;
        let (report, next) = self.try_step().map_err(|source| SceneError::Step { step, source })?;
        self.state = next;
        Ok(report)
    }

    fn try_step(&self) -> Result<(StepReport, Snapshot), SolverError> {
        let start = Instant::now();
        let h = self.config.dt;
        let prepared = self.prepare()?;
        let problem = self.problem(&prepared);
        let outcome = solver::correct(&problem, &self.config.newton, &self.config.pgs)?;

        let t = Instant::now();
        let q_end: Vec<Vec<f64>> = prepared.free.iter().zip(&outcome.dv_cor).map(|(f, dv)| corrected_positions(f, dv, h)).collect();
        let penetration_after = if prepared.pairs.is_empty() {
            0.0
        } else {
            let points = SceneView::with_positions(&self.bodies, &self.state.bodies, &q_end, &self.colliders, problem.time_end).points(&prepared.pairs);
            solver::measure_penetration(&problem, &points, &outcome.frames, &q_end)?.0
        };
        let bodies: Vec<MechanicalState> = self
            .state
            .bodies
            .iter()
            .zip(&prepared.free)
            .zip(&outcome.dv_cor)
            .map(|((s, f), dv)| integrate_correction(s, f, dv, h))
            .collect();
        let contacts = contact_records(&prepared.pairs, &outcome);
        let integrate = t.elapsed();

        let scheme = self.config.newton.scheme;
        let timings = PhaseTimings {
            build_wg: (scheme == Scheme::Fast).then_some(outcome.build_wg),
            final_correction: (scheme == Scheme::Fast).then_some(outcome.final_correction),
            integrate,
            total: start.elapsed(),
            ..prepared.timings
        };
        let report = StepReport {
            step: self.state.step,
            time: self.state.time + h,
            scheme,
            dofs: self.dofs(),
            pairs: prepared.pairs.len(),
            constraints: 3 * prepared.pairs.len(),
            timings,
            penetration_before: outcome.initial_penetration,
            penetration_after,
            lambda_n_max: contacts.iter().map(|c| c.lambda[0]).fold(0.0, f64::max),
            lambda_n_sum: contacts.iter().map(|c| c.lambda[0]).sum(),
            iterations: outcome.iterations,
        };
        let next = Snapshot { step: self.state.step + 1, time: self.state.time + h, bodies, contacts };
        Ok((report, next))
    }
}

/// Total contact force of each pair expressed in its last frame.
fn contact_records(pairs: &[ProximityPair], outcome: &NewtonOutcome) -> Vec<ContactRecord> {
    if outcome.frames.is_empty() {
        return vec![];
    }
    pairs
        .iter()
        .zip(&outcome.frames)
        .enumerate()
        .map(|(i, (p, frame))| {
            let force = Vector3::from_column_slice(&outcome.lambda.accumulated[3 * i..3 * i + 3]);
            let local = frame.project(&force);
            ContactRecord { object_a: p.object_a, object_b: p.object_b, frame: *frame, lambda: [local.x, local.y, local.z] }
        })
        .collect()
}

/// Receives every step's report and the state reached by it.
pub trait StepSink {
    fn record(&mut self, report: &StepReport, state: &Snapshot) -> Result<(), SceneError>;
}

/// Runs `steps` steps, handing each result to every sink.
pub fn run(scene: &mut Scene, steps: usize, sinks: &mut [&mut dyn StepSink]) -> Result<Vec<StepReport>, SceneError> {
    if steps == 0 {
        return Err(SceneError::Validation { path: Default::default(), message: "number of steps must be at least 1".into() });
    }
    let mut reports = Vec::with_capacity(steps);
    for _ in 0..steps {
        let report = scene.step()?;
        for sink in sinks.iter_mut() {
            sink.record(&report, scene.snapshot())?;
        }
        reports.push(report);
    }
    Ok(reports)
}
