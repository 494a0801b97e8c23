use nalgebra::{Matrix2, Vector2};

use super::SolverError;
use crate::linalg::DenseMat;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgsConfig {
    pub max_iterations: usize,
    /// Relative change `|λⁱ - λⁱ⁻¹| / |λⁱ|` below which sweeping stops.
    pub tolerance: f64,
    /// Coulomb coefficient μ.
    pub friction: f64,
}

impl Default for PgsConfig {
    fn default() -> Self {
        Self { max_iterations: 30, tolerance: 1e-6, friction: 0.5 }
    }
}

impl PgsConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.max_iterations == 0 {
            return Err(SolverError::InvalidConfig("pgs.iterations must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(SolverError::InvalidConfig(format!("pgs.tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.friction >= 0.0) || !self.friction.is_finite() {
            return Err(SolverError::InvalidConfig(format!("friction coefficient must be non-negative, got {}", self.friction)));
        }
        Ok(())
    }
}

/// Outcome of one PGS solve. Forces `λ` are in newtons, grouped
/// `(λ_n, λ_t1, λ_t2)`; gaps satisfy `gap_end = gap + h² W λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PgsSolution {
    pub lambda: Vec<f64>,
    pub gap_end: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// ε after each sweep.
    pub residuals: Vec<f64>,
    /// Diagonal shift added because a group block was singular.
    pub shift: f64,
}

/// Gap of group `group` without its own contribution: `δ_α + h² Σ_{β≠α} W_αβ λ_β`.
fn external_gap(group: usize, w: &DenseMat, gap: &[f64], lambda: &[f64], h2: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (r, o) in out.iter_mut().enumerate() {
        let row = w.row(3 * group + r);
        let full: f64 = row.iter().zip(lambda).map(|(a, b)| a * b).sum();
        let own: f64 = (0..3).map(|k| row[3 * group + k] * lambda[3 * group + k]).sum();
        *o = gap[3 * group + r] + h2 * (full - own);
    }
    out
}

/// One local Signorini–Coulomb solve for `group` with all other groups frozen.
///
/// The normal row is solved first using the current tangential force,
/// clamped at zero; the tangential pair then solves its 2×2 system and is
/// projected onto the disk of radius `μ λ_n`.
pub fn local_solve(group: usize, w: &DenseMat, gap: &[f64], lambda: &[f64], friction: f64, h2: f64) -> Result<[f64; 3], SolverError> {
    let r = external_gap(group, w, gap, lambda, h2);
    let b = 3 * group;
    let at = |i: usize, j: usize| h2 * w[(b + i, b + j)];
    if !(at(0, 0) > 0.0) {
        return Err(SolverError::SingularBlock { group });
    }
    let (lt1, lt2) = (lambda[b + 1], lambda[b + 2]);
    let ln = (-(r[0] + at(0, 1) * lt1 + at(0, 2) * lt2) / at(0, 0)).max(0.0);
    if ln == 0.0 || friction == 0.0 {
        return Ok([ln, 0.0, 0.0]);
    }
    let tt = Matrix2::new(at(1, 1), at(1, 2), at(2, 1), at(2, 2));
    let rhs = -Vector2::new(r[1] + at(1, 0) * ln, r[2] + at(2, 0) * ln);
    let mut lt = tt.try_inverse().ok_or(SolverError::SingularBlock { group })? * rhs;
    let bound = friction * ln;
    let norm = lt.norm();
    if norm > bound {
        lt *= bound / norm;
    }
    Ok([ln, lt.x, lt.y])
}

fn blocks_singular(w: &DenseMat, groups: usize, friction: f64) -> bool {
    let scale = (0..w.rows()).map(|i| w[(i, i)].abs()).fold(0.0, f64::max);
    let eps = 1e-14 * scale.max(f64::MIN_POSITIVE);
    (0..groups).any(|g| {
        let b = 3 * g;
        let nn = w[(b, b)];
        let det_t = w[(b + 1, b + 1)] * w[(b + 2, b + 2)] - w[(b + 1, b + 2)] * w[(b + 2, b + 1)];
        nn <= eps || (friction > 0.0 && det_t <= eps * eps)
    })
}

/// Projected Gauss–Seidel on `gap_end = gap + h² W λ` with Signorini and
/// Coulomb conditions per group, starting from `λ = 0`.
pub fn pgs(w: &DenseMat, gap: &[f64], h: f64, config: &PgsConfig) -> Result<PgsSolution, SolverError> {
    config.validate()?;
    let c = gap.len();
    if w.rows() != c || w.cols() != c || c % 3 != 0 {
        return Err(SolverError::DimensionMismatch { expected: c, found: w.rows() });
    }
    if c == 0 {
        return Ok(PgsSolution { lambda: vec![], gap_end: vec![], iterations: 0, converged: true, residuals: vec![], shift: 0.0 });
    }
    let groups = c / 3;
    let mut shift = 0.0;
    let shifted;
    let w = if blocks_singular(w, groups, config.friction) {
        shift = 1e-10 * w.trace() / c as f64;
        let mut m = w.clone();
        for i in 0..c {
            m.row_mut(i)[i] += shift;
        }
        if blocks_singular(&m, groups, config.friction) {
            let group = (0..groups).find(|g| !(m[(3 * g, 3 * g)] > 0.0)).unwrap_or(0);
            return Err(SolverError::SingularBlock { group });
        }
        shifted = m;
        &shifted
    } else {
        w
    };
    let h2 = h * h;
    let mut lambda = vec![0.0; c];
    let mut residuals = Vec::new();
    let mut converged = false;
    for _ in 0..config.max_iterations {
        let mut change = 0.0;
        let mut size = 0.0;
        for g in 0..groups {
            let next = local_solve(g, w, gap, &lambda, config.friction, h2)?;
            for (k, v) in next.iter().enumerate() {
                let d = v - lambda[3 * g + k];
                change += d * d;
                size += v * v;
                lambda[3 * g + k] = *v;
            }
        }
        let eps = if size > 0.0 { (change / size).sqrt() } else if change == 0.0 { 0.0 } else { f64::INFINITY };
        residuals.push(eps);
        if eps <= config.tolerance {
            converged = true;
            break;
        }
    }
    let wl = w.matvec(&lambda)?;
    let gap_end = gap.iter().zip(&wl).map(|(d, x)| d + h2 * x).collect();
    Ok(PgsSolution { lambda, gap_end, iterations: residuals.len(), converged, residuals, shift })
}
