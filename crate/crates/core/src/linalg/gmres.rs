use std::time::Instant;

use crate::error::{Error, Result};

use super::{dot, norm2, CsrMatrix, Preconditioner, SolveReport};

/// Restarted, right-preconditioned GMRES.
///
/// Convergence is declared on the true relative residual ‖b − Ax‖/‖b‖,
/// recomputed whenever the Arnoldi estimate drops below `tol`. A report is
/// returned whether or not the iteration converged; non-finite values are
/// an error.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    restart: usize,
    max_iter: usize,
    precond: &dyn Preconditioner,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::InvalidArgument("GMRES dimension mismatch".into()));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotFinite("GMRES right-hand side"));
    }
    let restart = restart.max(1);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let bnorm = norm2(b);
    let report = |iterations, residual, converged| SolveReport {
        iterations,
        residual,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
    };
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], report(0, 0.0, true)));
    }

    let true_residual = |x: &[f64], r: &mut Vec<f64>| {
        a.matvec(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        norm2(r)
    };

    let mut r = vec![0.0; n];
    let mut rnorm = true_residual(&x, &mut r);
    let mut iters = 0;
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];

    while iters < max_iter {
        if !rnorm.is_finite() {
            return Err(Error::NotFinite("GMRES residual"));
        }
        if rnorm / bnorm <= tol {
            return Ok((x, report(iters, rnorm / bnorm, true)));
        }
        v.clear();
        v.push(r.iter().map(|ri| ri / rnorm).collect());
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = rnorm;
        let mut m = 0;
        while m < restart && iters < max_iter {
            precond.apply(&v[m], &mut z);
            a.matvec(&z, &mut w);
            // Modified Gram-Schmidt.
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(&w, vi);
                h[i][m] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let wnorm = norm2(&w);
            h[m + 1][m] = wnorm;
            for i in 0..m {
                let t = cs[i] * h[i][m] + sn[i] * h[i + 1][m];
                h[i + 1][m] = -sn[i] * h[i][m] + cs[i] * h[i + 1][m];
                h[i][m] = t;
            }
            let denom = h[m][m].hypot(h[m + 1][m]);
            if !denom.is_finite() {
                return Err(Error::NotFinite("GMRES Arnoldi"));
            }
            if denom == 0.0 {
                cs[m] = 1.0;
                sn[m] = 0.0;
            } else {
                cs[m] = h[m][m] / denom;
                sn[m] = h[m + 1][m] / denom;
            }
            h[m][m] = denom;
            h[m + 1][m] = 0.0;
            g[m + 1] = -sn[m] * g[m];
            g[m] *= cs[m];
            iters += 1;
            m += 1;
            let breakdown = wnorm <= 1e-14 * bnorm;
            if g[m].abs() / bnorm <= tol || breakdown {
                break;
            }
            v.push(w.iter().map(|wk| wk / wnorm).collect());
        }
        // Solve the triangular least-squares system and update x.
        let mut y = vec![0.0; m];
        for i in (0..m).rev() {
            let s: f64 = (i + 1..m).map(|j| h[i][j] * y[j]).sum();
            y[i] = if h[i][i] != 0.0 { (g[i] - s) / h[i][i] } else { 0.0 };
        }
        let mut u = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&v) {
            for (uk, vk) in u.iter_mut().zip(vi) {
                *uk += yi * vk;
            }
        }
        precond.apply(&u, &mut z);
        for (xk, zk) in x.iter_mut().zip(&z) {
            *xk += zk;
        }
        let prev = rnorm;
        rnorm = true_residual(&x, &mut r);
        // A full cycle without progress means stagnation.
        if m < restart && rnorm / bnorm > tol && rnorm >= prev {
            break;
        }
    }
    if !rnorm.is_finite() {
        return Err(Error::NotFinite("GMRES residual"));
    }
    let converged = rnorm / bnorm <= tol;
    Ok((x, report(iters, rnorm / bnorm, converged)))
}
