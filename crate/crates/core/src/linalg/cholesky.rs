use super::matrix::{Matrix, SymMatrix};
use crate::error::{Error, Result};

/// Lower-triangular factor `L` with `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn new(a: &SymMatrix) -> Result<Self> {
        let n = a.order();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Cholesky { n, l })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// `L z`.
    pub fn lower_mul_vec(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if z.len() != n {
            return Err(Error::dim(format!("factor of order {n} times vector of length {}", z.len())));
        }
        Ok((0..n)
            .map(|i| (0..=i).map(|k| self.l[i * n + k] * z[k]).sum())
            .collect())
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::dim(format!(
                "right-hand side of length {} against order {n}",
                b.len()
            )));
        }
        let mut x = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s = x[i] - row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum::<f64>();
            x[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let s = x[i] - ((i + 1)..n).map(|k| self.l[k * n + i] * x[k]).sum::<f64>();
            x[i] = s / self.l[i * n + i];
        }
        Ok(x)
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows() != self.n {
            return Err(Error::dim(format!(
                "right-hand side with {} rows against order {}",
                b.rows(),
                self.n
            )));
        }
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            out.set_column(j, &self.solve_vec(&b.column(j))?);
        }
        Ok(out)
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn logdet(&self) -> f64 {
        (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>() * 2.0
    }
}

pub fn cholesky_solve(a: &SymMatrix, b: &Matrix) -> Result<Matrix> {
    Cholesky::new(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm, sym_evd};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_solve() {
        let b = Matrix::column_vector(&[1.0, -2.0, 3.0]);
        assert_eq!(cholesky_solve(&SymMatrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn diagonal_solve() {
        let a = SymMatrix::from_diag(&[4.0, 9.0]);
        let x = cholesky_solve(&a, &Matrix::column_vector(&[8.0, 27.0])).unwrap();
        assert_eq!(x.as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn random_spd_against_evd_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = Matrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
        let mut a = SymMatrix::from_dense(&g.matmul(&g.transpose()).unwrap(), 1e-12).unwrap();
        a.add_diag(0.5);
        let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let x = Cholesky::new(&a).unwrap().solve_vec(&b).unwrap();
        let ax = a.mul_vec(&x).unwrap();
        let res: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm(&res) / norm(&b) <= 1e-8);

        let inv = sym_evd(&a).unwrap().reassemble(|l| 1.0 / l);
        let y = inv.mul_vec(&b).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() <= 1e-8 * norm(&y));
        }
    }

    #[test]
    fn logdet_matches_product() {
        let a = SymMatrix::from_diag(&[2.0, 4.0]);
        assert!((Cholesky::new(&a).unwrap().logdet() - 8f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite() {
        let a = SymMatrix::from_row_major(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(
            Cholesky::new(&a),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }
}
