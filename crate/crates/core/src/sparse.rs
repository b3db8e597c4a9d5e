//! Compressed-row sparse matrices.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("dimension mismatch: matrix is {rows}x{cols}, vector has {len} entries")]
    DimensionMismatch { rows: usize, cols: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero-valued matrix from sorted, duplicate-free column lists per row.
    pub fn from_pattern(ncols: usize, rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(rows.iter().map(|r| r.len()).sum());
        for r in &rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]));
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix {
            nrows: rows.len(),
            ncols,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_pattern(n, (0..n).map(|i| vec![i]).collect());
        m.values.fill(1.0);
        m
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed in
    /// input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nrows];
        for &(r, c, _) in triplets {
            rows[r].push(c);
        }
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
        }
        let mut m = Self::from_pattern(ncols, rows);
        for &(r, c, v) in triplets {
            let k = m.position(r, c).unwrap();
            m.values[k] += v;
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    /// Storage index of entry `(r, c)` if it is in the pattern.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[a..b].binary_search(&c).ok().map(|k| a + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    /// Row-parallel product; each row sums left to right, so the result does
    /// not depend on the worker count.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<(), SparseError> {
        use rayon::prelude::*;
        if x.len() != self.ncols || y.len() != self.nrows {
            return Err(SparseError::DimensionMismatch {
                rows: self.nrows,
                cols: self.ncols,
                len: if x.len() != self.ncols { x.len() } else { y.len() },
            });
        }
        y.par_chunks_mut(1024).enumerate().for_each(|(chunk, out)| {
            for (k, yi) in out.iter_mut().enumerate() {
                let i = chunk * 1024 + k;
                let mut s = 0.0;
                for j in self.row_ptr[i]..self.row_ptr[i + 1] {
                    s += self.values[j] * x[self.col_idx[j]];
                }
                *yi = s;
            }
        });
        Ok(())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                row[*c] += v;
            }
        }
        d
    }

    /// Largest `|a_ij - a_ji|` relative to the largest `|a_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let mut scale: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                scale = scale.max(v.abs());
                worst = worst.max((v - self.get(*c, i)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 2.0), (0, 2, 0.5), (0, 0, -1.0)]);
        assert_eq!(m.row_ptr, vec![0, 2, 3]);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 2.0]).unwrap(), vec![2.0, 2.0]);
        assert!(m.matvec(&[1.0]).is_err());
    }

    #[test]
    fn identity_and_zero() {
        let id = CsrMatrix::identity(4);
        let x = vec![1.0, -2.0, 3.5, 0.25];
        assert_eq!(id.matvec(&x).unwrap(), x);
        assert_eq!(id.matvec(&[0.0; 4]).unwrap(), vec![0.0; 4]);
        assert_eq!(id.asymmetry(), 0.0);
    }
}
