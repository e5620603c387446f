use super::matrix::SymMatrix;
use crate::error::{Error, Result};

/// `ord[k]` is the source index placed at position `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    ord: Vec<usize>,
}

impl Permutation {
    pub fn new(ord: Vec<usize>) -> Result<Self> {
        let n = ord.len();
        let mut seen = vec![false; n];
        for &k in &ord {
            if k >= n {
                return Err(Error::IndexOutOfRange { index: k, dim: n });
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::invalid(format!("index {k} repeated in permutation")));
            }
        }
        Ok(Permutation { ord })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            ord: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ord.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ord.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.ord
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.ord.len()];
        for (k, &src) in self.ord.iter().enumerate() {
            inv[src] = k;
        }
        Permutation { ord: inv }
    }

    /// `out[k] = x[ord[k]]`.
    pub fn gather<T: Copy>(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.ord.len());
        self.ord.iter().map(|&k| x[k]).collect()
    }

    /// `out[ord[k]] = x[k]`; inverse of [`Permutation::gather`].
    pub fn scatter<T: Copy + Default>(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.ord.len());
        let mut out = vec![T::default(); x.len()];
        for (k, &dst) in self.ord.iter().enumerate() {
            out[dst] = x[k];
        }
        out
    }
}

/// `out(k, l) = A(ord[k], ord[l])`.
pub fn permute_sym(a: &SymMatrix, p: &Permutation) -> Result<SymMatrix> {
    if p.len() != a.order() {
        return Err(Error::dim(format!(
            "permutation of length {} against matrix of order {}",
            p.len(),
            a.order()
        )));
    }
    Ok(a.submatrix(p.as_slice()))
}
