//! Compressed-column storage and a direct LU solve backed by `faer`.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, NumericLu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{MatMut, Par};

use crate::error::{Error, Result};

/// Sorted, duplicate-free column structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CscPattern {
    pub nrows: usize,
    pub ncols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
}

impl CscPattern {
    /// Builds the pattern from `(row, col)` pairs; duplicates are merged.
    pub fn from_entries(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize)>) -> Self {
        entries.sort_unstable_by_key(|&(r, c)| (c, r));
        entries.dedup();
        let mut col_ptr = vec![0; ncols + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        for &(r, c) in &entries {
            debug_assert!(r < nrows && c < ncols);
            col_ptr[c + 1] += 1;
            row_idx.push(r);
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
        }
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Storage position of `(row, col)`, if structurally present.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let (lo, hi) = (self.col_ptr[col], self.col_ptr[col + 1]);
        self.row_idx[lo..hi].binary_search(&row).ok().map(|k| lo + k)
    }

    fn faer_ref(&self) -> SymbolicSparseColMatRef<'_, usize> {
        SymbolicSparseColMatRef::new_checked(self.nrows, self.ncols, &self.col_ptr, None, &self.row_idx)
    }
}

/// Sparse matrix sharing an immutable pattern.
#[derive(Debug, Clone)]
pub struct CscMatrix {
    pub pattern: Arc<CscPattern>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(pattern: Arc<CscPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    /// Sums duplicate triplets.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let pattern = Arc::new(CscPattern::from_entries(
            nrows,
            ncols,
            triplets.iter().map(|&(r, c, _)| (r, c)).collect(),
        ));
        let mut m = Self::zeros(pattern);
        for &(r, c, v) in triplets {
            let k = m.pattern.position(r, c).expect("entry present");
            m.values[k] += v;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.position(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let p = &*self.pattern;
        let mut y = vec![0.0; p.nrows];
        for c in 0..p.ncols {
            let xc = x[c];
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                y[p.row_idx[k]] += self.values[k] * xc;
            }
        }
        y
    }

    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let p = &*self.pattern;
        (0..p.ncols)
            .map(|c| {
                (p.col_ptr[c]..p.col_ptr[c + 1])
                    .map(|k| self.values[k] * x[p.row_idx[k]])
                    .sum()
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A − Aᵀ|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let p = &*self.pattern;
        let mut worst = 0.0f64;
        for c in 0..p.ncols {
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                let r = p.row_idx[k];
                worst = worst.max((self.values[k] - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let p = &*self.pattern;
        let mut d = vec![vec![0.0; p.ncols]; p.nrows];
        for c in 0..p.ncols {
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                d[p.row_idx[k]][c] += self.values[k];
            }
        }
        d
    }

    fn faer_ref(&self) -> SparseColMatRef<'_, usize, f64> {
        SparseColMatRef::new(self.pattern.faer_ref(), &self.values)
    }
}

/// LU factorization with a reusable fill-reducing symbolic analysis.
///
/// Runs sequentially so that repeated solves are bitwise reproducible.
pub struct LuSolver {
    pattern: Arc<CscPattern>,
    symbolic: SymbolicLu<usize>,
    numeric: NumericLu<usize, f64>,
    factored: bool,
}

impl LuSolver {
    pub fn analyze(pattern: Arc<CscPattern>) -> Result<Self> {
        if pattern.nrows != pattern.ncols {
            return Err(Error::LinearSolve(format!(
                "matrix is not square ({} × {})",
                pattern.nrows, pattern.ncols
            )));
        }
        let symbolic = factorize_symbolic_lu(pattern.faer_ref(), Default::default())
            .map_err(|e| Error::LinearSolve(format!("symbolic analysis failed: {e:?}")))?;
        Ok(Self {
            pattern,
            symbolic,
            numeric: NumericLu::new(),
            factored: false,
        })
    }

    pub fn factorize(&mut self, a: &CscMatrix) -> Result<()> {
        if !Arc::ptr_eq(&self.pattern, &a.pattern) && *self.pattern != *a.pattern {
            return Err(Error::LinearSolve("pattern differs from the analyzed one".into()));
        }
        if a.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("system matrix"));
        }
        let par = Par::Seq;
        let mut mem = MemBuffer::new(
            self.symbolic
                .factorize_numeric_lu_scratch::<f64>(par, Default::default()),
        );
        self.factored = false;
        self.symbolic
            .factorize_numeric_lu(
                &mut self.numeric,
                a.faer_ref(),
                par,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|e| Error::LinearSolve(format!("structurally singular matrix: {e:?}")))?;
        self.factored = true;
        Ok(())
    }

    fn apply(&self, rhs: &[f64], transpose: bool) -> Result<Vec<f64>> {
        if !self.factored {
            return Err(Error::LinearSolve("matrix has not been factorized".into()));
        }
        let n = self.pattern.nrows;
        if rhs.len() != n {
            return Err(Error::LinearSolve(format!(
                "right-hand side has length {}, expected {n}",
                rhs.len()
            )));
        }
        let mut x = rhs.to_vec();
        let par = Par::Seq;
        // numeric was produced from `symbolic` in `factorize`
        let lu = faer::sparse::linalg::lu::LuRef::new_unchecked(&self.symbolic, &self.numeric);
        let rhs_mat = MatMut::from_column_major_slice_mut(&mut x, n, 1);
        if transpose {
            let mut mem = MemBuffer::new(self.symbolic.solve_transpose_in_place_scratch::<f64>(1, par));
            lu.solve_transpose_in_place_with_conj(faer::Conj::No, rhs_mat, par, MemStack::new(&mut mem));
        } else {
            let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, par));
            lu.solve_in_place_with_conj(faer::Conj::No, rhs_mat, par, MemStack::new(&mut mem));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("zero pivot encountered (singular matrix)".into()));
        }
        Ok(x)
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.apply(rhs, false)
    }

    /// Solves `Aᵀ x = rhs`.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.apply(rhs, true)
    }
}

/// One-shot direct solve of `K x = rhs`.
pub fn linear_solve(k: &CscMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut lu = LuSolver::analyze(k.pattern.clone())?;
    lu.factorize(k)?;
    let x = lu.solve(rhs)?;
    let r = k.mul_vec(&x);
    let rn = norm(rhs);
    let res = r.iter().zip(rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    // a blown-up solution with huge residual signals a numerically zero pivot
    if rn > 0.0 && res / rn > 1e-6 {
        return Err(Error::LinearSolve(format!(
            "relative residual {:.3e} after direct solve (matrix numerically singular)",
            res / rn
        )));
    }
    Ok(x)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
