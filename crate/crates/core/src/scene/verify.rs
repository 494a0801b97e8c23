//! Algebraic and complementarity self-checks on a scene's current state.

use super::sim::Scene;
use crate::constraints::{assemble_direction, assemble_wg, compute_violation, rebuild_w_fast};
use crate::dynamics::corrected_positions;
use crate::solver::{self, NewtonConfig, PgsConfig, Scheme, SolverError};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    /// Perturb `W_g` before the identity check. A negative control: the check must fail.
    pub corrupt_wg: bool,
}

/// Tolerances of the individual checks.
pub const IDENTITY_TOL: f64 = 1e-9;
pub const GAP_TOL: f64 = 1e-6;
pub const PRODUCT_TOL: f64 = 1e-6;
pub const CONE_TOL: f64 = 1e-9;
pub const EQUIVALENCE_TOL: f64 = 1e-8;

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

/// Runs the three checks on the contacts detected at the scene's current state:
///
/// 1. `D W_g Dᵀ` equals the Delassus operator assembled through `H = D G`;
/// 2. a converged PGS solve satisfies Signorini and Coulomb conditions;
/// 3. without relinearization the fast and standard loops agree.
pub fn verify_scene(scene: &Scene, options: VerifyOptions) -> Result<Vec<CheckResult>, SolverError> {
    let prepared = scene.prepare()?;
    let problem = scene.problem(&prepared);
    let c = 3 * prepared.pairs.len();
    let mut out = Vec::with_capacity(3);

    let factors: Vec<_> = prepared.free.iter().map(|f| f.factorization.as_ref()).collect();
    let d = assemble_direction(&prepared.frames);
    let w = solver::standard_delassus(&problem, &prepared.frames)?;
    let mut wg = assemble_wg(&prepared.pairs, &prepared.mapping, &factors)?;
    if options.corrupt_wg && c > 0 {
        let bump = 1e-3 * wg.combined.max_abs().max(1.0);
        wg.combined.row_mut(0)[0] += bump;
    }
    let w_fast = rebuild_w_fast(&d, &wg.combined)?;
    let mut diff = w.clone();
    let mut neg = w_fast.clone();
    neg.scale(-1.0);
    diff.add_assign(&neg)?;
    let (err, scale) = (diff.norm_inf(), w.norm_inf());
    out.push(CheckResult {
        name: "delassus identity",
        passed: err <= IDENTITY_TOL * scale,
        detail: format!("|D Wg D^T - sum H A^-1 H^T|_inf = {err:.3e}, |W|_inf = {scale:.3e}, c = {c}"),
    });

    let pgs_config = PgsConfig { max_iterations: 200, tolerance: 1e-6, friction: scene.config().pgs.friction };
    let gap = compute_violation(&d, &problem.points_at_free())?;
    let sol = solver::pgs(&w, &gap, problem.h, &pgs_config)?;
    let mu = pgs_config.friction;
    let (mut min_force, mut min_gap, mut max_product, mut max_cone) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for g in 0..prepared.pairs.len() {
        let (ln, gn) = (sol.lambda[3 * g], sol.gap_end[3 * g]);
        let lt = sol.lambda[3 * g + 1].hypot(sol.lambda[3 * g + 2]);
        min_force = min_force.min(ln);
        min_gap = min_gap.min(gn);
        max_product = max_product.max(ln * gn);
        max_cone = max_cone.max(lt - mu * ln);
    }
    out.push(CheckResult {
        name: "complementarity",
        passed: sol.converged && min_force >= 0.0 && min_gap >= -GAP_TOL && max_product <= PRODUCT_TOL && max_cone <= CONE_TOL,
        detail: format!(
            "sweeps {}{}, min lambda_n {min_force:.3e}, min gap {min_gap:.3e}, max lambda_n*gap {max_product:.3e}, max cone excess {max_cone:.3e}",
            sol.iterations,
            if sol.converged { "" } else { " (not converged)" }
        ),
    });

    let newton = NewtonConfig { max_iterations: 3, relinearize: false, early_exit: false, scheme: Scheme::Standard, ..scene.config().newton };
    let standard = solver::newton_standard(&problem, &newton, &pgs_config)?;
    let fast = solver::fast_loop(&problem, &newton, &pgs_config, &wg)?;
    let fast = solver::finish_fast(&problem, fast)?;
    let lambda_err = rel_diff(&fast.total_lambda(), &standard.total_lambda());
    let q_err = prepared
        .free
        .iter()
        .zip(standard.dv_cor.iter().zip(&fast.dv_cor))
        .map(|(f, (a, b))| rel_diff(&corrected_positions(f, b, problem.h), &corrected_positions(f, a, problem.h)))
        .fold(0.0, f64::max);
    out.push(CheckResult {
        name: "scheme equivalence",
        passed: lambda_err <= EQUIVALENCE_TOL && q_err <= EQUIVALENCE_TOL,
        detail: format!("relative lambda difference {lambda_err:.3e}, relative q difference {q_err:.3e}"),
    });
    Ok(out)
}
