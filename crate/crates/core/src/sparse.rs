//! Symmetric matrix operators: dense views, compressed sparse rows, and the
//! implicit rank-one degree-regularization shift.
//!
//! The spectral kernels only need matrix-vector products against a symmetric
//! operator, so everything here implements [`SymOp`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A symmetric linear operator on R^n exposed through matrix-vector products.
pub trait SymOp {
    /// Dimension n of the operator.
    fn dim(&self) -> usize;
    /// Writes `M·v` into `out`.
    fn matvec(&self, v: &DVector<f64>, out: &mut DVector<f64>);
    /// Materializes the operator as a dense matrix (used by the dense
    /// eigensolver fallback for small n).
    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = DVector::zeros(n);
        let mut col = DVector::zeros(n);
        for j in 0..n {
            e[j] = 1.0;
            self.matvec(&e, &mut col);
            m.set_column(j, &col);
            e[j] = 0.0;
        }
        m
    }
}

impl SymOp for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn matvec(&self, v: &DVector<f64>, out: &mut DVector<f64>) {
        out.gemv(1.0, self, v, 0.0);
    }
    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// Symmetric sparse matrix in compressed sparse row form. Both (i,j) and (j,i)
/// are stored so a single row sweep computes the product.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a symmetric CSR matrix from unordered (i, j, value) triplets of
    /// the upper (or lower) triangle; the mirror entries are added
    /// automatically. Diagonal entries must appear at most once.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n + 1];
        for &(i, j, _) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "triplet index ({}, {}) out of range for n = {}",
                    i, j, n
                )));
            }
            counts[i + 1] += 1;
            if i != j {
                counts[j + 1] += 1;
            }
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        let nnz = counts[n];
        let mut col_idx = vec![0u32; nnz];
        let mut values = vec![0.0; nnz];
        let mut next = counts.clone();
        for &(i, j, v) in triplets {
            col_idx[next[i]] = j as u32;
            values[next[i]] = v;
            next[i] += 1;
            if i != j {
                col_idx[next[j]] = i as u32;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        Ok(CsrMatrix {
            n,
            row_ptr: counts,
            col_idx,
            values,
        })
    }

    /// Builds the adjacency matrix of a simple undirected graph given its
    /// unordered edge pairs (each edge listed once).
    pub fn adjacency(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let triplets: Vec<(usize, usize, f64)> = edges
            .iter()
            .map(|&(a, b)| (a as usize, b as usize, 1.0))
            .collect();
        Self::from_triplets(n, &triplets)
    }

    /// Number of stored entries (both triangles).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Node degrees (row sums for a 0/1 adjacency matrix).
    pub fn row_sums(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.n);
        for i in 0..self.n {
            d[i] = self.values[self.row_ptr[i]..self.row_ptr[i + 1]]
                .iter()
                .sum();
        }
        d
    }
}

impl SymOp for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }
    fn matvec(&self, v: &DVector<f64>, out: &mut DVector<f64>) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * v[self.col_idx[k] as usize];
            }
            out[i] = acc;
        }
    }
    fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k] as usize)] += self.values[k];
            }
        }
        m
    }
}

/// `base + shift·J` where J is the all-ones matrix, applied implicitly:
/// the product is `base·v + shift·(Σᵥ)·1` and J is never materialized.
pub struct RankOneShifted<'a, M: SymOp> {
    /// Underlying symmetric operator.
    pub base: &'a M,
    /// Uniform additive shift per entry.
    pub shift: f64,
}

impl<'a, M: SymOp> SymOp for RankOneShifted<'a, M> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn matvec(&self, v: &DVector<f64>, out: &mut DVector<f64>) {
        self.base.matvec(v, out);
        let s = self.shift * v.sum();
        for x in out.iter_mut() {
            *x += s;
        }
    }
    fn to_dense(&self) -> DMatrix<f64> {
        self.base.to_dense().add_scalar(self.shift)
    }
}
