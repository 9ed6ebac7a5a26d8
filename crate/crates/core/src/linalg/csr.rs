use crate::error::{Error, Result};

use super::dense::DenseMatrix;

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, checking the structural invariants.
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != nrows + 1 || indices.len() != data.len() || indptr[nrows] != data.len() {
            return Err(Error::InvalidArgument("inconsistent CSR array lengths".into()));
        }
        for r in 0..nrows {
            if indptr[r] > indptr[r + 1] {
                return Err(Error::InvalidArgument("row offsets must be monotone".into()));
            }
            let row = &indices[indptr[r]..indptr[r + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&c| c >= ncols) {
                return Err(Error::InvalidArgument(format!(
                    "row {r} has unsorted, duplicate or out-of-range columns"
                )));
            }
        }
        Ok(Self { nrows, ncols, indptr, indices, data })
    }

    /// Builds a matrix from (row, col, value) triplets; duplicates are summed.
    ///
    /// Triplets are stably sorted before summation, so the result is
    /// bitwise reproducible for a given input order.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of range");
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self { nrows, ncols, indptr, indices, data }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.data[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.data[k] * x[self.indices[k]];
            }
            *yr = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// Bilinear form yᵀ A x.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                let s: f64 = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
                y[r] * s
            })
            .sum()
    }

    /// Replaces the listed rows by rows of the identity matrix.
    ///
    /// The diagonal entry must already be part of the sparsity pattern.
    pub fn set_identity_rows(&mut self, rows: &[usize]) {
        for &r in rows {
            let span = self.indptr[r]..self.indptr[r + 1];
            for k in span {
                self.data[k] = if self.indices[k] == r { 1.0 } else { 0.0 };
            }
        }
    }

    /// Linear combination Σ cᵢ Aᵢ of matrices sharing this matrix's pattern.
    pub fn combine(terms: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        let first = terms[0].1;
        let mut out = first.clone();
        out.data.iter_mut().for_each(|v| *v = 0.0);
        for (c, m) in terms {
            assert!(
                m.indptr == first.indptr && m.indices == first.indices,
                "combined matrices must share a sparsity pattern"
            );
            for (o, v) in out.data.iter_mut().zip(&m.data) {
                *o += c * v;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                d[(r, c)] = v;
            }
        }
        d
    }

    /// Triplets in row-major order.
    pub fn to_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            out.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, v)));
        }
        out
    }

    pub fn transpose(&self) -> CsrMatrix {
        let trips = self.to_triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        CsrMatrix::from_triplets(self.ncols, self.nrows, trips)
    }

    /// Restriction to the given rows and columns (in the given order).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut trips = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                if col_map[c] != usize::MAX {
                    trips.push((i, col_map[c], v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), trips)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 2.0), (0, 1, 3.0), (0, 0, 1.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 4.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![5.0, 2.0]);
    }

    #[test]
    fn raw_arrays_are_validated() {
        assert!(CsrMatrix::from_raw(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::from_raw(1, 2, vec![0, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn identity_rows() {
        let mut a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (0, 1, 3.0), (1, 0, 4.0), (1, 1, 5.0)]);
        a.set_identity_rows(&[0]);
        assert_eq!(a.to_dense().row(0), &[1.0, 0.0]);
        assert_eq!(a.get(1, 0), 4.0);
    }

    proptest! {
        #[test]
        fn coo_csr_dense_roundtrip(entries in proptest::collection::btree_map((0usize..7, 0usize..5), -10.0f64..10.0, 0..30)) {
            let trips: Vec<_> = entries.iter().filter(|(_, v)| **v != 0.0).map(|(&(r, c), &v)| (r, c, v)).collect();
            let a = CsrMatrix::from_triplets(7, 5, trips.clone());
            let d = a.to_dense();
            let mut back = Vec::new();
            for r in 0..7 {
                for c in 0..5 {
                    if d[(r, c)] != 0.0 {
                        back.push((r, c, d[(r, c)]));
                    }
                }
            }
            prop_assert_eq!(back, trips);
        }
    }
}
