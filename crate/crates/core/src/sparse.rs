//! Compressed sparse rows plus thin wrappers over the faer direct solvers.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Coordinate-format accumulator; duplicates are summed on compression.
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicates; columns come out sorted within each row.
    pub fn from_triplets(t: Triplets) -> Self {
        // bucket by row, then merge each row through a dense marker
        let mut start = vec![0usize; t.nrows + 1];
        for e in &t.entries {
            start[e.0 + 1] += 1;
        }
        for i in 0..t.nrows {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut by_row = vec![(0usize, 0.0f64); t.entries.len()];
        for &(i, j, v) in &t.entries {
            by_row[fill[i]] = (j, v);
            fill[i] += 1;
        }
        drop(t.entries);
        let mut slot = vec![usize::MAX; t.ncols];
        let mut indptr = vec![0usize; t.nrows + 1];
        let mut indices = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for i in 0..t.nrows {
            let row0 = indices.len();
            for &(j, v) in &by_row[start[i]..start[i + 1]] {
                if slot[j] == usize::MAX {
                    slot[j] = indices.len();
                    indices.push(j);
                    values.push(v);
                } else {
                    values[slot[j]] += v;
                }
            }
            for &j in &indices[row0..] {
                slot[j] = usize::MAX;
            }
            let mut row: Vec<(usize, f64)> =
                indices[row0..].iter().copied().zip(values[row0..].iter().copied()).collect();
            row.sort_unstable_by_key(|e| e.0);
            for (k, (j, v)) in row.into_iter().enumerate() {
                indices[row0 + k] = j;
                values[row0 + k] = v;
            }
            indptr[i + 1] = indices.len();
        }
        Self { nrows: t.nrows, ncols: t.ncols, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        match r.binary_search(&j) {
            Ok(k) => self.values[self.indptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `self^T x`
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push(j, i, v);
            }
        }
        Self::from_triplets(t)
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m = m.max((v - self.get(j, i)).abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Rows without any nonzero entry.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.nrows).filter(|&i| self.row(i).all(|(_, v)| v == 0.0)).collect()
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push(Triplet::new(i, j, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t).map_err(|e| Error::Solver(format!("{e:?}")))
    }

    fn stats(&self) -> String {
        format!("{}x{} with {} nonzeros, max |a| = {:e}", self.nrows, self.ncols, self.nnz(), self.max_abs())
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Outcome of a direct solve.
#[derive(Clone, Debug)]
pub struct SolveInfo {
    pub solution: Vec<f64>,
    /// `||b - A x|| / ||b||`, or the absolute residual when `b = 0`.
    pub relative_residual: f64,
    pub refinements: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factorization {
    Lu,
    Cholesky,
}

/// Direct sparse solve with up to `max_refine` steps of iterative
/// refinement until the relative residual drops below `tol`.
pub fn solve(a: &CsrMatrix, b: &[f64], kind: Factorization, tol: f64, max_refine: usize) -> Result<SolveInfo> {
    if a.nrows != a.ncols || a.nrows != b.len() {
        return Err(Error::Dimension { what: "linear system".into(), expected: a.nrows, got: b.len() });
    }
    let n = a.nrows;
    if n == 0 {
        return Ok(SolveInfo { solution: Vec::new(), relative_residual: 0.0, refinements: 0 });
    }
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("right-hand side entry {i}")));
    }
    let fa = a.to_faer()?;
    let bnorm = norm(b);
    let solver: Box<dyn Fn(&Mat<f64>) -> Mat<f64>> = match kind {
        Factorization::Lu => {
            let lu = fa.sp_lu().map_err(|e| Error::Solver(format!("LU failed ({e:?}) on {}", a.stats())))?;
            Box::new(move |r: &Mat<f64>| lu.solve(r))
        }
        Factorization::Cholesky => {
            let ch = fa
                .sp_cholesky(faer::Side::Lower)
                .map_err(|e| Error::Solver(format!("Cholesky failed ({e:?}) on {}", a.stats())))?;
            Box::new(move |r: &Mat<f64>| ch.solve(r))
        }
    };
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let sol = solver(&rhs);
    let mut x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    let residual = |x: &[f64]| -> Vec<f64> { a.matvec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect() };
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut r = residual(&x);
    let mut rel = norm(&r) / scale;
    let mut refinements = 0;
    while rel > tol && refinements < max_refine && rel.is_finite() {
        let rm = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
        let d = solver(&rm);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += d[(i, 0)];
        }
        r = residual(&x);
        rel = norm(&r) / scale;
        refinements += 1;
    }
    if !rel.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver(format!("non-finite solution on {}", a.stats())));
    }
    Ok(SolveInfo { solution: x, relative_residual: rel, refinements })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_1d(n: usize) -> CsrMatrix {
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, 1.0);
            t.push(i, i, 1.0);
            if i > 0 {
                t.push(i, i - 1, -1.0);
            }
            if i + 1 < n {
                t.push(i, i + 1, -1.0);
            }
        }
        CsrMatrix::from_triplets(t)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = poisson_1d(4);
        assert_eq!(a.get(1, 1), 2.0);
        assert_eq!(a.get(0, 3), 0.0);
        assert_eq!(a.nnz(), 10);
        assert_eq!(a.max_asymmetry(), 0.0);
    }

    #[test]
    fn lu_and_cholesky_agree() {
        let a = poisson_1d(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let x = solve(&a, &b, Factorization::Lu, 1e-12, 2).unwrap();
        let y = solve(&a, &b, Factorization::Cholesky, 1e-12, 2).unwrap();
        assert!(x.relative_residual < 1e-12);
        for (u, v) in x.solution.iter().zip(&y.solution) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn transpose_product() {
        let mut t = Triplets::new(2, 3);
        t.push(0, 2, 4.0);
        t.push(1, 0, -1.0);
        let a = CsrMatrix::from_triplets(t);
        assert_eq!(a.matvec_transpose(&[1.0, 2.0]), vec![-2.0, 0.0, 4.0]);
        assert_eq!(a.transpose().matvec(&[1.0, 2.0]), vec![-2.0, 0.0, 4.0]);
    }

    #[test]
    fn singular_system_reports_error() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        t.push(1, 1, 1.0);
        let a = CsrMatrix::from_triplets(t);
        assert!(solve(&a, &[1.0, 2.0], Factorization::Lu, 1e-10, 1).is_err());
    }
}
