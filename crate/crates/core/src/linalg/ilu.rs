use crate::error::{Error, Result};

use super::CsrMatrix;

/// Right preconditioner: z ≈ A⁻¹ r.
pub trait Preconditioner: Send + Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// Identity preconditioner.
pub struct NoPreconditioner;

impl Preconditioner for NoPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let inv_diag = a
            .diagonal()
            .into_iter()
            .map(|d| if d == 0.0 { Err(Error::Singular) } else { Ok(1.0 / d) })
            .collect::<Result<_>>()?;
        Ok(Self { inv_diag })
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *z = r * d;
        }
    }
}

/// Incomplete LU factorisation with zero fill-in.
///
/// L (unit lower) and U share the sparsity pattern of the input matrix.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::InvalidArgument("ILU0 needs a square matrix".into()));
        }
        let mut lu = a.clone();
        let indptr = lu.indptr().to_vec();
        let indices = lu.indices().to_vec();
        let mut diag_pos = vec![usize::MAX; n];
        for r in 0..n {
            for k in indptr[r]..indptr[r + 1] {
                if indices[k] == r {
                    diag_pos[r] = k;
                }
            }
            if diag_pos[r] == usize::MAX {
                return Err(Error::Singular);
            }
        }
        // Scatter map from column to position within the current row.
        let mut pos = vec![usize::MAX; n];
        let data = lu.data_mut();
        for i in 0..n {
            for k in indptr[i]..indptr[i + 1] {
                pos[indices[k]] = k;
            }
            for kk in indptr[i]..diag_pos[i] {
                let j = indices[kk];
                let pivot = data[diag_pos[j]];
                let f = data[kk] / pivot;
                data[kk] = f;
                for m in diag_pos[j] + 1..indptr[j + 1] {
                    let p = pos[indices[m]];
                    if p != usize::MAX {
                        data[p] -= f * data[m];
                    }
                }
            }
            for k in indptr[i]..indptr[i + 1] {
                pos[indices[k]] = usize::MAX;
            }
            let d = data[diag_pos[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Singular);
            }
        }
        Ok(Self { lu, diag_pos })
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        let ip = self.lu.indptr();
        let idx = self.lu.indices();
        let val = self.lu.data();
        for i in 0..n {
            let mut s = r[i];
            for k in ip[i]..self.diag_pos[i] {
                s -= val[k] * z[idx[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag_pos[i] + 1..ip[i + 1] {
                s -= val[k] * z[idx[k]];
            }
            z[i] = s / val[self.diag_pos[i]];
        }
    }
}
