use super::matrix::{Matrix, SymMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 30;
const REL_TOL: f64 = 1e-12;

/// Eigenpairs of a symmetric matrix; `eigvecs` holds one eigenvector per
/// column, matching `eigvals` (descending).
#[derive(Clone, Debug)]
pub struct EvdResult {
    pub eigvals: Vec<f64>,
    pub eigvecs: Matrix,
}

impl EvdResult {
    /// `V f(Λ) Vᵀ`.
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let fl: Vec<f64> = self.eigvals.iter().map(|&l| f(l)).collect();
        self.with_eigvals(&fl)
    }

    /// `V diag(values) Vᵀ`, keeping these eigenvectors.
    pub fn with_eigvals(&self, fl: &[f64]) -> SymMatrix {
        let n = self.eigvals.len();
        assert_eq!(fl.len(), n);
        SymMatrix::from_fn(n, |i, j| {
            let (vi, vj) = (self.eigvecs.row(i), self.eigvecs.row(j));
            (0..n).map(|k| vi[k] * fl[k] * vj[k]).sum()
        })
    }
}

fn off_diagonal_norm(a: &SymMatrix) -> f64 {
    let n = a.order();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += a.get(i, j).powi(2);
        }
    }
    (2.0 * s).sqrt()
}

/// Symmetric eigendecomposition by cyclic Jacobi sweeps.
pub fn sym_evd(a: &SymMatrix) -> Result<EvdResult> {
    let n = a.order();
    let mut w = a.clone();
    let mut v = Matrix::identity(n);
    let tol = REL_TOL * a.frobenius_norm();

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&w);
        if off <= tol {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (w.get(q, q) - w.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // W ← Jᵀ W J with J = [[c, s], [-s, c]] on (p, q)
                w.rotate_pair(p, q, c, -s);
                w.set(p, q, 0.0);
                for k in 0..n {
                    let row = v.row_mut(k);
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| w.get(y, y).total_cmp(&w.get(x, x)));
    let eigvals = order.iter().map(|&k| w.get(k, k)).collect();
    let eigvecs = v.select_cols(&order);
    Ok(EvdResult { eigvals, eigvecs })
}
