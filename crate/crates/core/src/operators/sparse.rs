//! Compressed sparse row storage for complex operators, with the handful of
//! products the master equation needs against dense density matrices.

use nalgebra::{DMatrix, DVector};

use super::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed and exact
    /// zeros dropped. Column order within a row is ascending.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, C64)]) -> Self {
        let mut sorted: Vec<(usize, usize, C64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(sorted.len());
        for (r, c, v) in sorted {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|t| t.2 != C64::new(0.0, 0.0));
        let mut row_ptr = vec![0; nrows + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            cols: merged.iter().map(|t| t.1).collect(),
            vals: merged.iter().map(|t| t.2).collect(),
        }
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != C64::new(0.0, 0.0) {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries of row `i` as (column, value).
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn adjoint(&self) -> CsrMatrix {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v.conj())).collect();
        CsrMatrix::from_triplets(self.ncols, self.nrows, &t)
    }

    /// A†A, computed row by row without densifying.
    pub fn adjoint_times_self(&self) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..self.nrows {
            for (a, va) in self.row(i) {
                for (b, vb) in self.row(i) {
                    t.push((a, b, va.conj() * vb));
                }
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.ncols, &t)
    }

    pub fn mul_vec(&self, x: &DVector<C64>) -> DVector<C64> {
        DVector::from_fn(self.nrows, |i, _| self.row(i).map(|(j, v)| v * x[j]).sum())
    }

    /// out += scale · A·B
    pub fn mul_dense_acc(&self, b: &DMatrix<C64>, scale: C64, out: &mut DMatrix<C64>) {
        let (n, m) = (b.nrows(), b.ncols());
        let on = out.nrows();
        let bs = b.as_slice();
        let os = out.as_mut_slice();
        for i in 0..self.nrows {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            if span.is_empty() {
                continue;
            }
            let (cols, vals) = (&self.cols[span.clone()], &self.vals[span]);
            for c in 0..m {
                let bc = &bs[c * n..(c + 1) * n];
                let mut acc = C64::new(0.0, 0.0);
                for (&j, &v) in cols.iter().zip(vals) {
                    acc += v * bc[j];
                }
                os[i + c * on] += scale * acc;
            }
        }
    }

    pub fn mul_dense(&self, b: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.nrows, b.ncols());
        self.mul_dense_acc(b, C64::new(1.0, 0.0), &mut out);
        out
    }

    /// out += scale · B·A†
    pub fn dense_mul_adjoint_acc(&self, b: &DMatrix<C64>, scale: C64, out: &mut DMatrix<C64>) {
        let n = b.nrows();
        let bs = b.as_slice();
        let os = out.as_mut_slice();
        for row in 0..self.nrows {
            let oc = &mut os[row * n..(row + 1) * n];
            for (j, v) in self.row(row) {
                let f = scale * v.conj();
                for (o, x) in oc.iter_mut().zip(&bs[j * n..(j + 1) * n]) {
                    *o += f * x;
                }
            }
        }
    }

    /// out += A ρ A†
    pub fn sandwich_acc(&self, rho: &DMatrix<C64>, scratch: &mut DMatrix<C64>, out: &mut DMatrix<C64>) {
        scratch.fill(C64::new(0.0, 0.0));
        self.mul_dense_acc(rho, C64::new(1.0, 0.0), scratch);
        self.dense_mul_adjoint_acc(scratch, C64::new(1.0, 0.0), out);
    }

    pub fn scaled(&self, s: C64) -> CsrMatrix {
        CsrMatrix {
            vals: self.vals.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }
}
