use super::{DenseMat, LinalgError};

/// Rectangular matrix stored as sparse rows; used for mapping and contact Jacobians.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseRows {
    cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { cols, rows: vec![Vec::new(); rows] }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Adds `value` at `(i, j)`; zero values are not stored.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(j < self.cols);
        if value == 0.0 {
            return;
        }
        match self.rows[i].iter_mut().find(|(c, _)| *c == j) {
            Some(entry) => entry.1 += value,
            None => self.rows[i].push((j, value)),
        }
    }

    pub fn set_row(&mut self, i: usize, mut entries: Vec<(usize, f64)>) {
        entries.retain(|(_, v)| *v != 0.0);
        self.rows[i] = entries;
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::DimensionMismatch { op: "SparseRows::matvec", expected: self.cols, found: x.len() });
        }
        Ok(self.rows.iter().map(|r| r.iter().map(|(c, v)| v * x[*c]).sum()).collect())
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if y.len() != self.rows.len() {
            return Err(LinalgError::DimensionMismatch { op: "SparseRows::matvec_transpose", expected: self.rows.len(), found: y.len() });
        }
        let mut out = vec![0.0; self.cols];
        for (r, yi) in self.rows.iter().zip(y) {
            for (c, v) in r {
                out[*c] += v * yi;
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseMat {
        let mut d = DenseMat::zeros(self.rows.len(), self.cols);
        for (i, r) in self.rows.iter().enumerate() {
            for (c, v) in r {
                d[(i, *c)] += v;
            }
        }
        d
    }

    /// Dense transpose, shaped `ncols × nrows` (right-hand sides for multi-solves).
    pub fn transpose_dense(&self) -> DenseMat {
        let mut d = DenseMat::zeros(self.cols, self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            for (c, v) in r {
                d[(*c, i)] += v;
            }
        }
        d
    }

    /// `self · b` with `b` dense.
    pub fn mul_dense(&self, b: &DenseMat) -> Result<DenseMat, LinalgError> {
        if b.rows() != self.cols {
            return Err(LinalgError::DimensionMismatch { op: "SparseRows::mul_dense", expected: self.cols, found: b.rows() });
        }
        let mut out = DenseMat::zeros(self.rows.len(), b.cols());
        for (i, r) in self.rows.iter().enumerate() {
            let orow = out.row_mut(i);
            for (c, v) in r {
                for (o, x) in orow.iter_mut().zip(b.row(*c)) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }
}
