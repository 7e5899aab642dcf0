//! Compressed sparse rows and a banded Cholesky factorization.

use crate::error::{Error, Result};

/// Square or rectangular matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < rows && c < cols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .cloned()
            .zip(self.values[span].iter().cloned())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, xr) in x.iter().enumerate().take(self.rows) {
            for (c, v) in self.row(r) {
                out[c] += v * xr;
            }
        }
        out
    }

    /// Largest `|row - col|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }
}

/// Lower Cholesky factor of a symmetric positive definite band matrix.
///
/// Column `j` stores rows `j..=j+b` contiguously.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    /// Factors the lower triangle of `a`, whose half bandwidth must not exceed `b`.
    pub fn factor(a: &SparseMatrix, b: usize) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::Assembly("Cholesky needs a square matrix".into()));
        }
        let n = a.rows();
        let w = b + 1;
        let mut data = vec![0.0; n * w];
        for r in 0..n {
            for (c, v) in a.row(r) {
                if c <= r {
                    if r - c > b {
                        return Err(Error::Assembly(format!(
                            "entry ({r}, {c}) outside band {b}"
                        )));
                    }
                    data[c * w + (r - c)] += v;
                }
            }
        }
        for k in 0..n {
            let (head, tail) = data.split_at_mut((k + 1) * w);
            let col = &mut head[k * w..];
            let d = col[0];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite(format!("pivot {k} is {d:e}")));
            }
            let l = d.sqrt();
            col[0] = l;
            let m = b.min(n - 1 - k);
            for v in &mut col[1..=m] {
                *v /= l;
            }
            for s in 1..=m {
                let ljk = col[s];
                if ljk == 0.0 {
                    continue;
                }
                let target = &mut tail[(s - 1) * w..(s - 1) * w + (m - s + 1)];
                for (t, x) in target.iter_mut().zip(&col[s..=m]) {
                    *t -= ljk * x;
                }
            }
        }
        Ok(Self { n, b, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.b
    }

    /// Solves `L L^T x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        for k in 0..n {
            let col = &self.data[k * w..k * w + w];
            x[k] /= col[0];
            let xk = x[k];
            let m = b.min(n - 1 - k);
            for (t, l) in col[1..=m].iter().enumerate() {
                x[k + 1 + t] -= l * xk;
            }
        }
        for k in (0..n).rev() {
            let col = &self.data[k * w..k * w + w];
            let m = b.min(n - 1 - k);
            let s: f64 = col[1..=m]
                .iter()
                .enumerate()
                .map(|(t, l)| l * x[k + 1 + t])
                .sum();
            x[k] = (x[k] - s) / col[0];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, shift: f64) -> SparseMatrix {
        let mut t = vec![];
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn triplets_merge() {
        let a = SparseMatrix::from_triplets(2, 3, vec![(0, 1, 1.0), (1, 2, 2.0), (0, 1, 0.5)]);
        assert_eq!(a.mul_vec(&[1.0, 2.0, 3.0]), vec![3.0, 6.0]);
        assert_eq!(a.mul_transpose_vec(&[1.0, 1.0]), vec![0.0, 1.5, 2.0]);
        assert_eq!(a.bandwidth(), 1);
    }

    #[test]
    fn band_solve_matches_product() {
        let n = 50;
        let mut t = vec![];
        for i in 0..n {
            t.push((i, i, 10.0 + i as f64 * 0.1));
            for k in 1..=3 {
                if i >= k {
                    let v = 1.0 / (k as f64 + i as f64 * 0.01);
                    t.push((i, i - k, v));
                    t.push((i - k, i, v));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, n, t);
        let chol = BandCholesky::factor(&a, a.bandwidth()).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = a.mul_vec(&x);
        chol.solve_in_place(&mut y);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_rejected() {
        let a = laplacian_1d(10, -3.0);
        assert!(matches!(
            BandCholesky::factor(&a, 1),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn band_too_narrow_rejected() {
        let a = laplacian_1d(10, 0.0);
        assert!(matches!(
            BandCholesky::factor(&a, 0),
            Err(Error::Assembly(_))
        ));
    }
}
