//! Constraint-space operators.
//!
//! All contact quantities live in one stacked relative space: pair `i` owns
//! rows `3i..3i+3`, holding `pA - pB` (proximity space) or `(n, t1, t2)`
//! components (constraint space). Mapping Jacobians carry the B-side sign,
//! so `W_g = Σ G A⁻¹ Gᵀ` and `W = D W_g Dᵀ` act directly on relative
//! displacements.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::collision::{ContactFrame, Owner, PointPair, ProximityPair};
use crate::linalg::{self, DenseMat, Factorization, LinalgError, SparseRows};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch { op: &'static str, expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn expect_len(op: &'static str, expected: usize, found: usize) -> Result<(), ConstraintError> {
    if expected != found {
        return Err(ConstraintError::DimensionMismatch { op, expected, found });
    }
    Ok(())
}

/// Block-diagonal matrix of contact frames, one 3×3 block per group.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionMatrix {
    blocks: Vec<Matrix3<f64>>,
}

pub fn assemble_direction(frames: &[ContactFrame]) -> DirectionMatrix {
    DirectionMatrix { blocks: frames.iter().map(ContactFrame::matrix).collect() }
}

impl DirectionMatrix {
    pub fn groups(&self) -> usize {
        self.blocks.len()
    }

    pub fn rows(&self) -> usize {
        3 * self.blocks.len()
    }

    pub fn block(&self, i: usize) -> &Matrix3<f64> {
        &self.blocks[i]
    }

    pub fn to_dense(&self) -> DenseMat {
        let mut d = DenseMat::zeros(self.rows(), self.rows());
        for (g, b) in self.blocks.iter().enumerate() {
            for r in 0..3 {
                for c in 0..3 {
                    d[(3 * g + r, 3 * g + c)] = b[(r, c)];
                }
            }
        }
        d
    }

    /// `D x` for a stacked proximity-space vector.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, ConstraintError> {
        expect_len("DirectionMatrix::apply", self.rows(), x.len())?;
        let mut out = Vec::with_capacity(x.len());
        for (g, b) in self.blocks.iter().enumerate() {
            out.extend((b * Vector3::new(x[3 * g], x[3 * g + 1], x[3 * g + 2])).iter());
        }
        Ok(out)
    }

    /// `Dᵀ λ`: constraint-space forces expressed in proximity space.
    pub fn apply_transpose(&self, lambda: &[f64]) -> Result<Vec<f64>, ConstraintError> {
        expect_len("DirectionMatrix::apply_transpose", self.rows(), lambda.len())?;
        let mut out = Vec::with_capacity(lambda.len());
        for (g, b) in self.blocks.iter().enumerate() {
            out.extend((b.transpose() * Vector3::new(lambda[3 * g], lambda[3 * g + 1], lambda[3 * g + 2])).iter());
        }
        Ok(out)
    }
}

/// `H = D G` for one body; rows grouped `(n, t1, t2)` per pair.
pub fn assemble_h(d: &DirectionMatrix, g: &SparseRows) -> Result<SparseRows, ConstraintError> {
    expect_len("assemble_h", d.rows(), g.nrows())?;
    let mut h = SparseRows::new(g.nrows(), g.ncols());
    for (grp, block) in d.blocks.iter().enumerate() {
        for r in 0..3 {
            for k in 0..3 {
                let coef = block[(r, k)];
                if coef == 0.0 {
                    continue;
                }
                for (col, v) in g.row(3 * grp + k) {
                    h.add(3 * grp + r, *col, coef * v);
                }
            }
        }
    }
    Ok(h)
}

/// `Σ_b J_b A_b⁻¹ J_bᵀ` restricted to the rows each body actually touches.
/// Returns the per-body products as `(rows, block)` with `block` square over `rows`.
fn schur_blocks(jacobians: &[SparseRows], factors: &[&Factorization]) -> Result<Vec<(Vec<usize>, DenseMat)>, ConstraintError> {
    expect_len("schur complement", jacobians.len(), factors.len())?;
    let mut out = Vec::with_capacity(jacobians.len());
    for (j, f) in jacobians.iter().zip(factors) {
        expect_len("schur complement", f.dim(), j.ncols())?;
        let rows: Vec<usize> = (0..j.nrows()).filter(|&r| !j.row(r).is_empty()).collect();
        if rows.is_empty() {
            out.push((rows, DenseMat::zeros(0, 0)));
            continue;
        }
        let mut rhs = DenseMat::zeros(j.ncols(), rows.len());
        for (k, &r) in rows.iter().enumerate() {
            for (c, v) in j.row(r) {
                rhs[(*c, k)] = *v;
            }
        }
        let x = linalg::solve_multi(f, &rhs)?;
        let mut block = DenseMat::zeros(rows.len(), rows.len());
        for (a, &r) in rows.iter().enumerate() {
            let brow = block.row_mut(a);
            for (c, v) in j.row(r) {
                for (o, xv) in brow.iter_mut().zip(x.row(*c)) {
                    *o += v * xv;
                }
            }
        }
        out.push((rows, block));
    }
    Ok(out)
}

/// Delassus operator `W = Σ H A⁻¹ Hᵀ` through multi-right-hand-side solves.
pub fn assemble_w_standard(h: &[SparseRows], factors: &[&Factorization], c: usize) -> Result<DenseMat, ConstraintError> {
    let mut w = DenseMat::zeros(c, c);
    for hb in h {
        expect_len("assemble_w_standard", c, hb.nrows())?;
    }
    for (rows, block) in schur_blocks(h, factors)? {
        scatter_add(&mut w, &rows, &block, |_| true);
    }
    w.symmetrize();
    Ok(w)
}

fn scatter_add(target: &mut DenseMat, rows: &[usize], block: &DenseMat, keep_row: impl Fn(usize) -> bool) {
    for (a, &r) in rows.iter().enumerate() {
        if !keep_row(r) {
            continue;
        }
        let src = block.row(a);
        let dst = target.row_mut(r);
        for (b, &c) in rows.iter().enumerate() {
            dst[c] += src[b];
        }
    }
}

/// Mapping-space Delassus operator split by side.
///
/// Row block `i` of `side_a` is the response of `pA_i` to proximity-space
/// forces, row block `i` of `side_b` the (negated) response of `pB_i`;
/// `W_g = side_a + side_b`.
#[derive(Clone, Debug, PartialEq)]
pub struct MappingDelassus {
    pub side_a: DenseMat,
    pub side_b: DenseMat,
    pub combined: DenseMat,
}

impl MappingDelassus {
    pub fn dim(&self) -> usize {
        self.combined.rows()
    }
}

/// Builds `W_g = Σ G A⁻¹ Gᵀ` from the signed per-body mapping Jacobians.
pub fn assemble_wg(pairs: &[ProximityPair], g: &[SparseRows], factors: &[&Factorization]) -> Result<MappingDelassus, ConstraintError> {
    let dim = 3 * pairs.len();
    for gb in g {
        expect_len("assemble_wg", dim, gb.nrows())?;
    }
    let mut side_a = DenseMat::zeros(dim, dim);
    let mut side_b = DenseMat::zeros(dim, dim);
    for (body, (rows, block)) in schur_blocks(g, factors)?.into_iter().enumerate() {
        scatter_add(&mut side_a, &rows, &block, |r| pairs[r / 3].object_a == body);
        scatter_add(&mut side_b, &rows, &block, |r| pairs[r / 3].object_b == Owner::Body(body));
    }
    let mut combined = side_a.clone();
    combined.add_assign(&side_b)?;
    combined.symmetrize();
    Ok(MappingDelassus { side_a, side_b, combined })
}

/// `W = D W_g Dᵀ`, block by block; no linear solve involved.
pub fn rebuild_w_fast(d: &DirectionMatrix, wg: &DenseMat) -> Result<DenseMat, ConstraintError> {
    let c = d.rows();
    expect_len("rebuild_w_fast", c, wg.rows())?;
    expect_len("rebuild_w_fast", c, wg.cols())?;
    let mut w = DenseMat::zeros(c, c);
    for i in 0..d.groups() {
        let di = d.block(i);
        for j in 0..d.groups() {
            let dj = d.block(j);
            let mut blk = Matrix3::zeros();
            for r in 0..3 {
                let row = &wg.row(3 * i + r)[3 * j..3 * j + 3];
                for s in 0..3 {
                    blk[(r, s)] = row[s];
                }
            }
            let out = di * blk * dj.transpose();
            for r in 0..3 {
                w.row_mut(3 * i + r)[3 * j..3 * j + 3].copy_from_slice(&[out[(r, 0)], out[(r, 1)], out[(r, 2)]]);
            }
        }
    }
    Ok(w)
}

/// Per-group gaps `δ = D_i (pA - pB)`, stacked `(δ_n, δ_t1, δ_t2)`.
pub fn compute_violation(d: &DirectionMatrix, points: &[PointPair]) -> Result<Vec<f64>, ConstraintError> {
    expect_len("compute_violation", d.groups(), points.len())?;
    let mut out = Vec::with_capacity(3 * points.len());
    for (g, p) in points.iter().enumerate() {
        out.extend((d.block(g) * p.relative()).iter());
    }
    Ok(out)
}

/// Stacked relative positions `pA - pB`.
pub fn relative_positions(points: &[PointPair]) -> Vec<f64> {
    points.iter().flat_map(|p| p.relative().iter().copied().collect::<Vec<_>>()).collect()
}

/// `p_{k+1} = p_k + h² W_g Dᵀ λ` in relative space, scattered to the two sides.
pub fn fast_update_proximity(
    points: &[PointPair],
    wg: &MappingDelassus,
    d: &DirectionMatrix,
    lambda: &[f64],
    h: f64,
) -> Result<Vec<PointPair>, ConstraintError> {
    expect_len("fast_update_proximity", wg.dim(), 3 * points.len())?;
    let force = d.apply_transpose(lambda)?;
    let da = wg.side_a.matvec(&force)?;
    let db = wg.side_b.matvec(&force)?;
    let h2 = h * h;
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, p)| PointPair {
            a: p.a + h2 * Vector3::new(da[3 * i], da[3 * i + 1], da[3 * i + 2]),
            b: p.b - h2 * Vector3::new(db[3 * i], db[3 * i + 1], db[3 * i + 2]),
        })
        .collect())
}

#[cfg(test)]
mod tests;
