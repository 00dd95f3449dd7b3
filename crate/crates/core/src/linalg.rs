//! Thin sparse-matrix layer over `faer`: triplet assembly, a CSR copy for
//! cheap products, and factorizations reused across many right-hand sides.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square sparse matrix assembled from (row, col, value) entries.
/// Duplicate entries are summed.
#[derive(Debug, Clone)]
pub struct SparseBuilder<T> {
    n: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Copy + std::ops::AddAssign + Default> SparseBuilder<T> {
    pub fn new(n: usize, capacity: usize) -> Self {
        SparseBuilder {
            n,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: T) {
        self.entries.push((row, col, value));
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row-compressed copy with duplicates merged.
    pub fn to_csr(&self) -> Csr<T> {
        let mut sorted = self.entries.clone();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(sorted.len());
        let mut vals: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            n: self.n,
            row_ptr,
            cols,
            vals,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Csr<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T> Csr<T>
where
    T: Copy + Default + std::ops::Mul<Output = T> + std::ops::AddAssign,
{
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        for (row, out) in y.iter_mut().enumerate() {
            let mut acc = T::default();
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    /// Copy with `offset` added to every diagonal entry.
    pub fn add_diagonal(&self, offset: T) -> Self {
        let mut b = SparseBuilder::new(self.n, self.vals.len() + self.n);
        for (row, col, val) in self.triplets().into_iter().map(|t| (t.row, t.col, t.val)) {
            b.push(row, col, val);
        }
        for i in 0..self.n {
            b.push(i, i, offset);
        }
        b.to_csr()
    }

    fn triplets(&self) -> Vec<Triplet<usize, usize, T>> {
        let mut out = Vec::with_capacity(self.vals.len());
        for row in 0..self.n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                out.push(Triplet::new(row, self.cols[k], self.vals[k]));
            }
        }
        out
    }
}

/// LU factorization of a complex sparse matrix.
pub struct ComplexLu {
    n: usize,
    lu: Lu<usize, Complex64>,
}

impl ComplexLu {
    pub fn new(a: &Csr<Complex64>) -> Result<Self> {
        let mat = SparseColMat::<usize, Complex64>::try_new_from_triplets(a.n, a.n, &a.triplets())
            .map_err(|e| Error::LinearAlgebra(format!("assembly: {e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| Error::LinearAlgebra(format!("sparse LU: {e:?}")))?;
        Ok(ComplexLu { n: a.n, lu })
    }

    pub fn solve_in_place(&self, rhs: &mut [Complex64]) {
        let view = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        self.lu.solve_in_place(view);
    }
}

/// Cholesky factorization of a real symmetric positive-definite sparse matrix.
pub struct RealCholesky {
    n: usize,
    llt: Llt<usize, f64>,
}

impl RealCholesky {
    pub fn new(a: &Csr<f64>) -> Result<Self> {
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &a.triplets())
            .map_err(|e| Error::LinearAlgebra(format!("assembly: {e:?}")))?;
        let llt = mat
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::LinearAlgebra(format!("sparse Cholesky: {e:?}")))?;
        Ok(RealCholesky { n: a.n, llt })
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let view = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        self.llt.solve_in_place(view);
    }
}
