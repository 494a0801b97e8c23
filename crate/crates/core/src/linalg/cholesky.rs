//! Envelope (profile) Cholesky factorization `P A Pᵀ = L Lᵀ`.
//!
//! Rows of `L` are stored contiguously from their first structurally
//! non-zero column up to the diagonal, so both the factorization and the
//! triangular solves reduce to dense dot products and axpys over short
//! slices. The permutation is a reverse Cuthill–McKee ordering.

use rayon::prelude::*;

use super::{ordering, DenseMat, LinalgError, SparseSym};

/// Immutable factor data; shareable across threads.
#[derive(Clone, Debug)]
pub struct Factorization {
    dim: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    first: Vec<usize>,
    row_start: Vec<usize>,
    values: Vec<f64>,
}

impl Factorization {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored entries in the envelope of `L`.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.values[self.row_start[i]..self.row_start[i + 1]]
    }

    fn solve_permuted_in_place(&self, y: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            let row = self.row(i);
            let f = self.first[i];
            let (diag, off) = row.split_last().expect("row contains its diagonal");
            let dot: f64 = off.iter().zip(&y[f..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - dot) / diag;
        }
        for i in (0..n).rev() {
            let row = self.row(i);
            let f = self.first[i];
            let (diag, off) = row.split_last().expect("row contains its diagonal");
            let xi = y[i] / diag;
            y[i] = xi;
            if xi != 0.0 {
                for (yk, l) in y[f..i].iter_mut().zip(off) {
                    *yk -= l * xi;
                }
            }
        }
    }
}

pub fn factorize(a: &SparseSym) -> Result<Factorization, LinalgError> {
    let n = a.dim();
    let perm = ordering::reverse_cuthill_mckee(a);
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }

    let mut first: Vec<usize> = (0..n).collect();
    for old in 0..n {
        let i = inv[old];
        let (cols, vals) = a.row(old);
        for (c, v) in cols.iter().zip(vals) {
            let j = inv[*c];
            if j < i && *v != 0.0 {
                first[i] = first[i].min(j);
            }
        }
    }
    let mut row_start = Vec::with_capacity(n + 1);
    row_start.push(0);
    for i in 0..n {
        row_start.push(row_start[i] + (i - first[i] + 1));
    }
    let mut values = vec![0.0; row_start[n]];
    for old in 0..n {
        let i = inv[old];
        let (cols, vals) = a.row(old);
        for (c, v) in cols.iter().zip(vals) {
            let j = inv[*c];
            if j <= i && j >= first[i] {
                values[row_start[i] + (j - first[i])] = *v;
            }
        }
    }

    for i in 0..n {
        let (done, rest) = values.split_at_mut(row_start[i]);
        let row_i = &mut rest[..row_start[i + 1] - row_start[i]];
        let fi = first[i];
        for j in fi..i {
            let row_j = &done[row_start[j]..row_start[j + 1]];
            let fj = first[j];
            let k0 = fi.max(fj);
            let dot: f64 = row_i[k0 - fi..j - fi].iter().zip(&row_j[k0 - fj..j - fj]).map(|(a, b)| a * b).sum();
            let ljj = row_j[j - fj];
            row_i[j - fi] = (row_i[j - fi] - dot) / ljj;
        }
        let (diag, off) = row_i.split_last_mut().expect("row contains its diagonal");
        let d = *diag - off.iter().map(|v| v * v).sum::<f64>();
        if !(d > 0.0) || !d.is_finite() {
            return Err(LinalgError::NotSpd { row: perm[i], pivot: d });
        }
        *diag = d.sqrt();
    }

    Ok(Factorization { dim: n, perm, first, row_start, values })
}

pub fn solve(f: &Factorization, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if b.len() != f.dim {
        return Err(LinalgError::DimensionMismatch { op: "solve", expected: f.dim, found: b.len() });
    }
    let mut y: Vec<f64> = f.perm.iter().map(|&old| b[old]).collect();
    f.solve_permuted_in_place(&mut y);
    let mut x = vec![0.0; f.dim];
    for (new, &old) in f.perm.iter().enumerate() {
        x[old] = y[new];
    }
    Ok(x)
}

/// Solves `A X = B` column by column with the shared factor.
///
/// Columns are independent, so they may be distributed over the current
/// rayon pool without changing any result bit.
pub fn solve_multi(f: &Factorization, b: &DenseMat) -> Result<DenseMat, LinalgError> {
    if b.rows() != f.dim {
        return Err(LinalgError::DimensionMismatch { op: "solve_multi", expected: f.dim, found: b.rows() });
    }
    let solve_column = |j: usize| {
        let mut y: Vec<f64> = f.perm.iter().map(|&old| b[(old, j)]).collect();
        f.solve_permuted_in_place(&mut y);
        y
    };
    let columns: Vec<Vec<f64>> = if rayon::current_num_threads() > 1 && b.cols() > 1 {
        (0..b.cols()).into_par_iter().map(solve_column).collect()
    } else {
        (0..b.cols()).map(solve_column).collect()
    };
    let mut x = DenseMat::zeros(f.dim, b.cols());
    for (j, y) in columns.iter().enumerate() {
        for (new, &old) in f.perm.iter().enumerate() {
            x[(old, j)] = y[new];
        }
    }
    Ok(x)
}
