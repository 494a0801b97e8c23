use std::time::{Duration, Instant};

use super::{pgs, PgsConfig, PgsSolution, SolverError};
use crate::collision::{relinearize, Collider, ContactFrame, PointPair, ProximityPair, SceneView};
use crate::constraints::{self, assemble_direction, assemble_h, assemble_w_standard, compute_violation, MappingDelassus};
use crate::dynamics::{corrected_positions, Body, FreeMotion, MechanicalState};
use crate::linalg::{self, DenseMat, Factorization, SparseRows};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// One linearization, one PGS solve, one correction.
    Single,
    /// Newton loop that rebuilds `W` from the mechanical state every iteration.
    Standard,
    /// Newton loop on `W_g` and proximity positions only.
    Fast,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Single => "single",
            Scheme::Standard => "standard",
            Scheme::Fast => "fast",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    /// m; the loop stops once the deepest penetration is at most this.
    pub penetration_tolerance: f64,
    pub scheme: Scheme,
    /// Recompute contact frames from the current proximity positions each iteration.
    pub relinearize: bool,
    /// Allow stopping before `max_iterations`.
    pub early_exit: bool,
    /// rad; frames turning less than this between iterations also stop the loop.
    pub rotation_tolerance: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5,
            penetration_tolerance: 1e-5,
            scheme: Scheme::Single,
            relinearize: true,
            early_exit: true,
            rotation_tolerance: 1e-4,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.max_iterations == 0 {
            return Err(SolverError::InvalidConfig("newton.iterations must be at least 1".into()));
        }
        if !(self.penetration_tolerance >= 0.0) {
            return Err(SolverError::InvalidConfig("newton.penetration_tol must be non-negative".into()));
        }
        Ok(())
    }

    fn iterations(&self) -> usize {
        match self.scheme {
            Scheme::Single => 1,
            _ => self.max_iterations,
        }
    }
}

/// Everything fixed during one step's correction phase.
pub struct ContactProblem<'a> {
    pub bodies: &'a [Body],
    /// States at the start of the step.
    pub states: &'a [MechanicalState],
    pub colliders: &'a [Collider],
    pub free: &'a [FreeMotion],
    pub pairs: &'a [ProximityPair],
    /// Frames linearized at detection time.
    pub frames: &'a [ContactFrame],
    /// Signed mapping Jacobian of each body.
    pub mapping: &'a [SparseRows],
    pub h: f64,
    /// End-of-step time, at which collider poses are evaluated.
    pub time_end: f64,
}

impl ContactProblem<'_> {
    fn factors(&self) -> Vec<&Factorization> {
        self.free.iter().map(|f| f.factorization.as_ref()).collect()
    }

    /// Proximity positions at the free-motion state.
    pub fn points_at_free(&self) -> Vec<PointPair> {
        self.points_at(&self.free_positions())
    }

    fn points_at(&self, q: &[Vec<f64>]) -> Vec<PointPair> {
        SceneView::with_positions(self.bodies, self.states, q, self.colliders, self.time_end).points(self.pairs)
    }

    fn free_positions(&self) -> Vec<Vec<f64>> {
        self.free.iter().map(|f| f.q_free.clone()).collect()
    }

    fn end_view<'b>(&'b self, q: &'b [Vec<f64>]) -> SceneView<'b> {
        SceneView::with_positions(self.bodies, self.states, q, self.colliders, self.time_end)
    }
}

/// Per-iteration diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationReport {
    /// Building `W` for this iteration.
    pub rebuild: Duration,
    pub pgs: Duration,
    /// Standard: mechanical correction and mapping refresh; fast: proximity update.
    pub correction: Duration,
    pub pgs_iterations: usize,
    pub pgs_converged: bool,
    pub pgs_residuals: Vec<f64>,
    /// Deepest penetration after this iteration's correction, m.
    pub max_penetration: f64,
    /// Largest normal rotation between this iteration's frames and the next, rad.
    pub frame_rotation: f64,
}

/// Forces of the last iteration plus the running `Σ_k D_kᵀ λ_k`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LambdaState {
    pub lambda: Vec<f64>,
    /// Sum of all iterations' forces in proximity space.
    pub accumulated: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    /// Per-body total corrective velocity.
    pub dv_cor: Vec<Vec<f64>>,
    pub lambda: LambdaState,
    /// `λ_k` of every iteration.
    pub history: Vec<Vec<f64>>,
    pub iterations: Vec<IterationReport>,
    /// Frames used by the last iteration.
    pub frames: Vec<ContactFrame>,
    /// Constraint-space gaps predicted by the last PGS solve.
    pub gap_end: Vec<f64>,
    /// Penetration at the free state, measured like the per-iteration values.
    pub initial_penetration: f64,
    /// Time to build `W_g` (fast scheme only).
    pub build_wg: Duration,
    /// Final mechanical correction of the fast scheme.
    pub final_correction: Duration,
}

impl NewtonOutcome {
    /// Sum of the per-iteration constraint forces, `Σ_k λ_k`.
    pub fn total_lambda(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.lambda.lambda.len()];
        for l in &self.history {
            for (t, x) in total.iter_mut().zip(l) {
                *t += x;
            }
        }
        total
    }
}

/// Deepest penetration of `points` along frames relinearized from `previous`
/// at the end-of-step collider poses, together with those frames.
pub fn measure_penetration(
    problem: &ContactProblem,
    points: &[PointPair],
    previous: &[ContactFrame],
    q: &[Vec<f64>],
) -> Result<(f64, Vec<ContactFrame>), SolverError> {
    let frames = relinearize(problem.pairs, points, previous, &problem.end_view(q))?;
    let depth = frames.iter().zip(points).map(|(f, p)| (-f.normal.dot(&p.relative())).max(0.0)).fold(0.0, f64::max);
    Ok((depth, frames))
}

fn max_rotation(a: &[ContactFrame], b: &[ContactFrame]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.angle_to(y)).fold(0.0, f64::max)
}

fn should_stop(config: &NewtonConfig, report: &IterationReport) -> bool {
    config.early_exit
        && (report.max_penetration <= config.penetration_tolerance || (config.relinearize && report.frame_rotation <= config.rotation_tolerance))
}

fn empty_outcome(problem: &ContactProblem) -> NewtonOutcome {
    NewtonOutcome {
        dv_cor: problem.bodies.iter().map(|b| vec![0.0; b.dofs()]).collect(),
        lambda: LambdaState::default(),
        history: vec![],
        iterations: vec![],
        frames: vec![],
        gap_end: vec![],
        initial_penetration: 0.0,
        build_wg: Duration::ZERO,
        final_correction: Duration::ZERO,
    }
}

/// Corrective loop that relinearizes on the mechanical state: every
/// iteration rebuilds `H_k = D_k G` and `W_k = Σ H_k A⁻¹ H_kᵀ` with
/// multi-right-hand-side solves, applies `Δv_k = h A⁻¹ H_kᵀ λ_k` and
/// re-evaluates the proximity positions. With [`Scheme::Single`] it runs once.
pub fn newton_standard(problem: &ContactProblem, config: &NewtonConfig, pgs_config: &PgsConfig) -> Result<NewtonOutcome, SolverError> {
    config.validate()?;
    pgs_config.validate()?;
    if problem.pairs.is_empty() {
        return Ok(empty_outcome(problem));
    }
    let h = problem.h;
    let c = 3 * problem.pairs.len();
    let factors = problem.factors();
    let mut out = empty_outcome(problem);
    out.lambda.accumulated = vec![0.0; c];
    let mut q = problem.free_positions();
    let mut points = problem.points_at(&q);
    let mut frames = problem.frames.to_vec();
    out.initial_penetration = measure_penetration(problem, &points, &frames, &q)?.0;

    for _ in 0..config.iterations() {
        let t0 = Instant::now();
        let d = assemble_direction(&frames);
        let hs = problem.mapping.iter().map(|g| assemble_h(&d, g)).collect::<Result<Vec<_>, _>>()?;
        let w = assemble_w_standard(&hs, &factors, c)?;
        let gap = compute_violation(&d, &points)?;
        let rebuild = t0.elapsed();

        let t1 = Instant::now();
        let solution = pgs(&w, &gap, h, pgs_config)?;
        let pgs_time = t1.elapsed();

        let t2 = Instant::now();
        for (b, (hb, f)) in hs.iter().zip(&factors).enumerate() {
            if hb.is_zero() {
                continue;
            }
            let dv = linalg::solve(f, &hb.matvec_transpose(&solution.lambda)?)?;
            for (acc, x) in out.dv_cor[b].iter_mut().zip(dv) {
                *acc += h * x;
            }
        }
        q = problem.free.iter().zip(&out.dv_cor).map(|(f, dv)| corrected_positions(f, dv, h)).collect();
        points = problem.points_at(&q);
        let (depth, measured) = measure_penetration(problem, &points, &frames, &q)?;
        let correction = t2.elapsed();

        let force = d.apply_transpose(&solution.lambda)?;
        accumulate(&mut out, &force, &solution);
        let report = report(rebuild, pgs_time, correction, &solution, depth, max_rotation(&frames, &measured));
        let stop = should_stop(config, &report);
        out.iterations.push(report);
        out.frames = frames.clone();
        if config.relinearize {
            frames = measured;
        }
        if stop {
            break;
        }
    }
    Ok(out)
}

/// Corrective loop on the mapping-space operator: `W_g` is built once,
/// then each iteration only forms `W_k = D_k W_g D_kᵀ`, solves PGS and
/// moves the proximity points by `h² W_g D_kᵀ λ_k`. One mechanical
/// correction `h A⁻¹ Gᵀ Σ_k D_kᵀ λ_k` closes the step.
pub fn newton_fast(problem: &ContactProblem, config: &NewtonConfig, pgs_config: &PgsConfig) -> Result<NewtonOutcome, SolverError> {
    config.validate()?;
    pgs_config.validate()?;
    if problem.pairs.is_empty() {
        return Ok(empty_outcome(problem));
    }
    let factors = problem.factors();
    let t = Instant::now();
    let wg = constraints::assemble_wg(problem.pairs, problem.mapping, &factors)?;
    let build_wg = t.elapsed();
    let mut out = finish_fast(problem, fast_loop(problem, config, pgs_config, &wg)?)?;
    out.build_wg = build_wg;
    Ok(out)
}

/// Applies the single mechanical correction `h A⁻¹ Gᵀ Σ_k D_kᵀ λ_k` after [`fast_loop`].
pub fn finish_fast(problem: &ContactProblem, mut out: NewtonOutcome) -> Result<NewtonOutcome, SolverError> {
    if out.lambda.accumulated.is_empty() {
        return Ok(out);
    }
    let t = Instant::now();
    for (b, (g, f)) in problem.mapping.iter().zip(problem.factors()).enumerate() {
        if g.is_zero() {
            continue;
        }
        let dv = linalg::solve(f, &g.matvec_transpose(&out.lambda.accumulated)?)?;
        out.dv_cor[b] = dv.iter().map(|x| problem.h * x).collect();
    }
    out.final_correction = t.elapsed();
    Ok(out)
}

/// The inner loop of [`newton_fast`] with a caller-supplied `W_g`.
pub fn fast_loop(problem: &ContactProblem, config: &NewtonConfig, pgs_config: &PgsConfig, wg: &MappingDelassus) -> Result<NewtonOutcome, SolverError> {
    config.validate()?;
    let c = 3 * problem.pairs.len();
    let mut out = empty_outcome(problem);
    if c == 0 {
        return Ok(out);
    }
    out.lambda.accumulated = vec![0.0; c];
    let q = problem.free_positions();
    let mut points = problem.points_at(&q);
    let mut frames = problem.frames.to_vec();
    out.initial_penetration = measure_penetration(problem, &points, &frames, &q)?.0;

    for _ in 0..config.iterations() {
        let t0 = Instant::now();
        let d = assemble_direction(&frames);
        let w = constraints::rebuild_w_fast(&d, &wg.combined)?;
        let gap = compute_violation(&d, &points)?;
        let rebuild = t0.elapsed();

        let t1 = Instant::now();
        let solution = pgs(&w, &gap, problem.h, pgs_config)?;
        let pgs_time = t1.elapsed();

        let t2 = Instant::now();
        points = constraints::fast_update_proximity(&points, wg, &d, &solution.lambda, problem.h)?;
        let (depth, measured) = measure_penetration(problem, &points, &frames, &q)?;
        let correction = t2.elapsed();

        let force = d.apply_transpose(&solution.lambda)?;
        accumulate(&mut out, &force, &solution);
        let report = report(rebuild, pgs_time, correction, &solution, depth, max_rotation(&frames, &measured));
        let stop = should_stop(config, &report);
        out.iterations.push(report);
        out.frames = frames.clone();
        if config.relinearize {
            frames = measured;
        }
        if stop {
            break;
        }
    }
    Ok(out)
}

fn accumulate(out: &mut NewtonOutcome, force: &[f64], solution: &PgsSolution) {
    for (a, f) in out.lambda.accumulated.iter_mut().zip(force) {
        *a += f;
    }
    out.lambda.lambda = solution.lambda.clone();
    out.history.push(solution.lambda.clone());
    out.gap_end = solution.gap_end.clone();
}

fn report(rebuild: Duration, pgs: Duration, correction: Duration, s: &PgsSolution, depth: f64, rotation: f64) -> IterationReport {
    IterationReport {
        rebuild,
        pgs,
        correction,
        pgs_iterations: s.iterations,
        pgs_converged: s.converged,
        pgs_residuals: s.residuals.clone(),
        max_penetration: depth,
        frame_rotation: rotation,
    }
}

/// Dispatches on `config.scheme`.
pub fn correct(problem: &ContactProblem, config: &NewtonConfig, pgs_config: &PgsConfig) -> Result<NewtonOutcome, SolverError> {
    match config.scheme {
        Scheme::Single | Scheme::Standard => newton_standard(problem, config, pgs_config),
        Scheme::Fast => newton_fast(problem, config, pgs_config),
    }
}

/// Dense helper for diagnostics: `W` of the standard route at the given frames.
pub fn standard_delassus(problem: &ContactProblem, frames: &[ContactFrame]) -> Result<DenseMat, SolverError> {
    let d = assemble_direction(frames);
    let hs = problem.mapping.iter().map(|g| assemble_h(&d, g)).collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_w_standard(&hs, &problem.factors(), 3 * problem.pairs.len())?)
}
