use super::{DenseMat, LinalgError};

/// Square sparse matrix in compressed-row form, storing both triangles.
///
/// Column indices within a row are strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Builds from `(row, col, value)` triplets, summing duplicates in input order.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, LinalgError> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(LinalgError::DimensionMismatch {
                    op: "SparseSym::from_triplets",
                    expected: dim,
                    found: r.max(c) + 1,
                });
            }
            sorted.push((r, c, v));
        }
        // stable: duplicates keep their insertion order, so sums are reproducible
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { dim, row_ptr, col_idx, values })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: vec![1.0; dim],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::identity(diag.len());
        m.values.copy_from_slice(diag);
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.dim {
            return Err(LinalgError::DimensionMismatch { op: "SparseSym::matvec", expected: self.dim, found: x.len() });
        }
        Ok((0..self.dim)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(c, v)| v * x[*c]).sum()
            })
            .collect())
    }

    /// Largest `|a_ij - a_ji|` relative to the largest magnitude entry.
    pub fn relative_asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(*c, i)).abs());
            }
        }
        worst / scale
    }

    /// Replaces the rows and columns of `fixed` with identity.
    pub fn constrain_identity(&mut self, fixed: &[bool]) {
        assert_eq!(fixed.len(), self.dim, "fixed mask length");
        for i in 0..self.dim {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            for k in range {
                let j = self.col_idx[k];
                if fixed[i] || fixed[j] {
                    self.values[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        // a fixed row without a stored diagonal would be singular
        let missing: Vec<usize> = (0..self.dim).filter(|&i| fixed[i] && self.row(i).0.binary_search(&i).is_err()).collect();
        if !missing.is_empty() {
            let mut triplets = self.triplets();
            triplets.extend(missing.into_iter().map(|i| (i, i, 1.0)));
            *self = Self::from_triplets(self.dim, &triplets).expect("indices already validated");
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.dim {
            let (cols, vals) = self.row(i);
            out.extend(cols.iter().zip(vals).map(|(c, v)| (i, *c, *v)));
        }
        out
    }

    pub fn to_dense(&self) -> DenseMat {
        let mut d = DenseMat::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                d[(i, *c)] = *v;
            }
        }
        d
    }

    /// `self + s·other`, both of the same dimension.
    pub fn add_scaled(&self, other: &SparseSym, s: f64) -> Result<SparseSym, LinalgError> {
        if other.dim != self.dim {
            return Err(LinalgError::DimensionMismatch { op: "SparseSym::add_scaled", expected: self.dim, found: other.dim });
        }
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, s * v)));
        Self::from_triplets(self.dim, &t)
    }
}
