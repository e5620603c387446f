use serde::{Deserialize, Serialize};

use super::matrix::{Matrix, SymMatrix};
use crate::error::{Error, Result};

/// Plane rotation acting on coordinates `(i, j)` as the 2x2 block
/// `[[c, s], [-s, c]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "(usize, usize, f64, f64)", try_from = "(usize, usize, f64, f64)")]
pub struct GivensRotation {
    pub i: usize,
    pub j: usize,
    pub c: f64,
    pub s: f64,
}

impl GivensRotation {
    pub fn new(i: usize, j: usize, c: f64, s: f64) -> Result<Self> {
        if i >= j {
            return Err(Error::invalid(format!(
                "Givens rotation needs i < j, got ({i}, {j})"
            )));
        }
        if ((c * c + s * s) - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "Givens rotation is not orthogonal: c²+s² = {}",
                c * c + s * s
            )));
        }
        Ok(GivensRotation { i, j, c, s })
    }

    pub fn from_angle(i: usize, j: usize, theta: f64) -> Result<Self> {
        GivensRotation::new(i, j, theta.cos(), theta.sin())
    }

    pub fn identity(i: usize, j: usize) -> Result<Self> {
        GivensRotation::new(i, j, 1.0, 0.0)
    }

    /// `x ← g x`.
    #[inline]
    pub fn apply(&self, x: &mut [f64]) {
        let (a, b) = (x[self.i], x[self.j]);
        x[self.i] = self.c * a + self.s * b;
        x[self.j] = -self.s * a + self.c * b;
    }

    /// `x ← gᵀ x`.
    #[inline]
    pub fn apply_transpose(&self, x: &mut [f64]) {
        let (a, b) = (x[self.i], x[self.j]);
        x[self.i] = self.c * a - self.s * b;
        x[self.j] = self.s * a + self.c * b;
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.j >= dim {
            return Err(Error::IndexOutOfRange {
                index: self.j,
                dim,
            });
        }
        Ok(())
    }

    pub(crate) fn conjugate_in_place(&self, a: &mut SymMatrix) {
        a.rotate_pair(self.i, self.j, self.c, self.s);
    }

    pub(crate) fn conjugate_transpose_in_place(&self, a: &mut SymMatrix) {
        a.rotate_pair(self.i, self.j, self.c, -self.s);
    }
}

impl From<GivensRotation> for (usize, usize, f64, f64) {
    fn from(g: GivensRotation) -> Self {
        (g.i, g.j, g.c, g.s)
    }
}

impl TryFrom<(usize, usize, f64, f64)> for GivensRotation {
    type Error = Error;

    fn try_from((i, j, c, s): (usize, usize, f64, f64)) -> Result<Self> {
        GivensRotation::new(i, j, c, s)
    }
}

/// `g A gᵀ`.
pub fn apply_givens_conjugate(a: &SymMatrix, g: &GivensRotation) -> Result<SymMatrix> {
    g.check(a.order())?;
    let mut out = a.clone();
    g.conjugate_in_place(&mut out);
    Ok(out)
}

/// Ordered product `Q = q_L ⋯ q_1` of plane rotations on `dim` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationSequence {
    dim: usize,
    rotations: Vec<GivensRotation>,
}

impl RotationSequence {
    pub fn new(dim: usize, rotations: Vec<GivensRotation>) -> Result<Self> {
        for g in &rotations {
            g.check(dim)?;
        }
        Ok(RotationSequence { dim, rotations })
    }

    pub fn empty(dim: usize) -> Self {
        RotationSequence {
            dim,
            rotations: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rotations(&self) -> &[GivensRotation] {
        &self.rotations
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    pub(crate) fn push(&mut self, g: GivensRotation) {
        debug_assert!(g.j < self.dim);
        self.rotations.push(g);
    }

    /// `x ← Q x` (`q_1` first).
    pub fn apply(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for g in &self.rotations {
            g.apply(x);
        }
    }

    /// `x ← Qᵀ x`.
    pub fn apply_transpose(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for g in self.rotations.iter().rev() {
            g.apply_transpose(x);
        }
    }

    /// `Q A Qᵀ`.
    pub fn conjugate(&self, a: &SymMatrix) -> Result<SymMatrix> {
        self.check_order(a)?;
        let mut out = a.clone();
        for g in &self.rotations {
            g.conjugate_in_place(&mut out);
        }
        Ok(out)
    }

    /// `Qᵀ A Q`.
    pub fn conjugate_transpose(&self, a: &SymMatrix) -> Result<SymMatrix> {
        self.check_order(a)?;
        let mut out = a.clone();
        for g in self.rotations.iter().rev() {
            g.conjugate_transpose_in_place(&mut out);
        }
        Ok(out)
    }

    /// Dense `Q`, built by applying the sequence to each unit vector.
    pub fn to_dense(&self) -> Matrix {
        let mut q = Matrix::zeros(self.dim, self.dim);
        let mut e = vec![0.0; self.dim];
        for k in 0..self.dim {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[k] = 1.0;
            self.apply(&mut e);
            q.set_column(k, &e);
        }
        q
    }

    fn check_order(&self, a: &SymMatrix) -> Result<()> {
        if a.order() != self.dim {
            return Err(Error::dim(format!(
                "rotation sequence of dimension {} against matrix of order {}",
                self.dim,
                a.order()
            )));
        }
        Ok(())
    }
}
