//! Greedy-Jacobi multiresolution matrix factorization of a single cluster
//! block: `A ≈ Qᵀ H Q` with `Q` a product of Givens rotations and `H`
//! core-diagonal.

use crate::error::{Error, Result};
use crate::linalg::{RotationSequence, GivensRotation, SymMatrix};

/// Rotations taken for a block of size `m` at compression ratio `gamma`:
/// `⌊(1-γ)m⌋`, never more than `m - 1`.
pub fn rotation_count(m: usize, gamma: f64) -> usize {
    if m == 0 {
        return 0;
    }
    // the small slack keeps e.g. (1 - 0.7) * 10 from flooring to 2
    let l = ((1.0 - gamma) * m as f64 + 1e-9).floor() as usize;
    l.min(m - 1)
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid(format!(
            "compression ratio gamma must lie in (0, 1], got {gamma}"
        )));
    }
    Ok(())
}

/// The orthogonal part of a core-diagonal compression, together with how the
/// rotated coordinates split into core and wavelet.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreDiagonalCompression {
    pub rotation: RotationSequence,
    pub core_size: usize,
    /// Rotated coordinates kept in the core, ascending.
    pub core_indices: Vec<usize>,
    /// Rotated coordinates truncated to the diagonal, in designation order.
    pub wavelet_indices: Vec<usize>,
}

impl CoreDiagonalCompression {
    pub fn dim(&self) -> usize {
        self.rotation.dim()
    }
}

/// `H` with nonzeros only on the `c × c` core block and the diagonal of the
/// remaining `m - c` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreDiagonal {
    pub core: SymMatrix,
    pub tail: Vec<f64>,
}

impl CoreDiagonal {
    pub fn c(&self) -> usize {
        self.core.order()
    }

    /// Dense `H` in the rotated coordinates of `comp`.
    pub fn to_dense(&self, comp: &CoreDiagonalCompression) -> SymMatrix {
        let mut h = SymMatrix::zeros(comp.dim());
        for (a, &ia) in comp.core_indices.iter().enumerate() {
            for (b, &ib) in comp.core_indices.iter().enumerate().skip(a) {
                h.set(ia, ib, self.core.get(a, b));
            }
        }
        for (&w, &d) in comp.wavelet_indices.iter().zip(&self.tail) {
            h.set(w, w, d);
        }
        h
    }
}

fn gram(b: &SymMatrix) -> SymMatrix {
    let m = b.order();
    SymMatrix::from_fn(m, |i, j| crate::linalg::dot(b.row(i), b.row(j)))
}

/// Runs the greedy rotation sequence and returns the compression together
/// with the fully rotated block `Q A Qᵀ`.
pub(crate) fn greedy_jacobi(a: &SymMatrix, gamma: f64) -> Result<(CoreDiagonalCompression, SymMatrix)> {
    let m = a.order();
    if m == 0 {
        return Err(Error::invalid("cannot compress an empty block"));
    }
    check_gamma(gamma)?;

    let steps = rotation_count(m, gamma);
    let mut b = a.clone();
    let mut g = if steps > 0 { gram(&b) } else { SymMatrix::zeros(0) };
    let mut active = vec![true; m];
    let mut rotation = RotationSequence::empty(m);
    let mut wavelets = Vec::with_capacity(steps);

    for _ in 0..steps {
        // most correlated active pair under the Gram matrix
        let mut best: Option<(usize, usize)> = None;
        let mut best_score = f64::NEG_INFINITY;
        for i in (0..m).filter(|&i| active[i]) {
            let gii = g.get(i, i);
            for j in ((i + 1)..m).filter(|&j| active[j]) {
                let denom = (gii * g.get(j, j)).sqrt();
                let score = if denom > 0.0 {
                    g.get(i, j).abs() / denom
                } else {
                    0.0
                };
                if score > best_score {
                    best_score = score;
                    best = Some((i, j));
                }
            }
        }
        let (i, j) = best.expect("at least two active coordinates remain");

        let bij = b.get(i, j);
        let rot = if bij == 0.0 {
            GivensRotation::identity(i, j)?
        } else {
            let theta = 0.5 * (2.0 * bij).atan2(b.get(i, i) - b.get(j, j));
            GivensRotation::from_angle(i, j, theta)?
        };
        b.rotate_pair(i, j, rot.c, rot.s);
        g.rotate_pair(i, j, rot.c, rot.s);
        rotation.push(rot);

        let energy = |r: usize| -> f64 {
            (0..m)
                .filter(|&k| k != r && active[k])
                .map(|k| b.get(r, k).powi(2))
                .sum()
        };
        let wavelet = if energy(i) < energy(j) { i } else { j };
        active[wavelet] = false;
        wavelets.push(wavelet);
    }

    let core_indices: Vec<usize> = (0..m).filter(|&k| active[k]).collect();
    let comp = CoreDiagonalCompression {
        rotation,
        core_size: core_indices.len(),
        core_indices,
        wavelet_indices: wavelets,
    };
    Ok((comp, b))
}

/// Core-diagonal compression of one block by greedy-Jacobi MMF.
pub fn mmf_compress(a: &SymMatrix, gamma: f64) -> Result<(CoreDiagonalCompression, CoreDiagonal)> {
    let (comp, rotated) = greedy_jacobi(a, gamma)?;
    let h = CoreDiagonal {
        core: rotated.submatrix(&comp.core_indices),
        tail: comp
            .wavelet_indices
            .iter()
            .map(|&w| rotated.get(w, w))
            .collect(),
    };
    Ok((comp, h))
}

/// `‖A - Qᵀ H Q‖_F` by dense expansion.
pub fn compression_error(a: &SymMatrix, comp: &CoreDiagonalCompression, h: &CoreDiagonal) -> Result<f64> {
    if a.order() != comp.dim() || h.c() != comp.core_size || h.tail.len() != comp.dim() - comp.core_size {
        return Err(Error::dim(format!(
            "matrix of order {}, compression of dimension {} with core {}, H with core {} and tail {}",
            a.order(),
            comp.dim(),
            comp.core_size,
            h.c(),
            h.tail.len()
        )));
    }
    let approx = comp.rotation.conjugate_transpose(&h.to_dense(comp))?;
    Ok(a.to_matrix().sub(&approx.to_matrix())?.frobenius_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sym_evd, Matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spsd(m: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Matrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
        SymMatrix::from_dense(&g.matmul(&g.transpose()).unwrap(), 1e-12).unwrap()
    }

    #[test]
    fn rotation_count_arithmetic() {
        assert_eq!(rotation_count(8, 0.5), 4);
        assert_eq!(rotation_count(8, 1.0), 0);
        assert_eq!(rotation_count(10, 0.7), 3);
        assert_eq!(rotation_count(10, 0.3), 7);
        assert_eq!(rotation_count(1, 0.01), 0);
        assert_eq!(rotation_count(3, 1e-15), 2);
    }

    #[test]
    fn half_compression_of_eight() {
        let a = random_spsd(8, 1);
        let (comp, h) = mmf_compress(&a, 0.5).unwrap();
        assert_eq!(comp.rotation.len(), 4);
        assert_eq!(comp.core_size, 4);
        assert_eq!(h.c(), 4);
        assert_eq!(h.tail.len(), 4);
        let mut all: Vec<usize> = comp.core_indices.iter().chain(&comp.wavelet_indices).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn gamma_one_is_exact() {
        let a = random_spsd(6, 2);
        let (comp, h) = mmf_compress(&a, 1.0).unwrap();
        assert!(comp.rotation.is_empty());
        assert_eq!(h.core, a);
        assert!(compression_error(&a, &comp, &h).unwrap() <= 1e-12);
    }

    #[test]
    fn rank_one_two_by_two() {
        let a = SymMatrix::from_row_major(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let (comp, h) = mmf_compress(&a, 0.5).unwrap();
        assert_eq!(comp.rotation.len(), 1);
        let g = comp.rotation.rotations()[0];
        assert!((g.c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((g.s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(comp.core_indices, vec![0]);
        assert_eq!(comp.wavelet_indices, vec![1]);
        assert!((h.core.get(0, 0) - 2.0).abs() < 1e-15);
        assert!(h.tail[0].abs() < 1e-15);
        assert!(compression_error(&a, &comp, &h).unwrap() < 1e-15);
    }

    #[test]
    fn diagonal_input_has_zero_error() {
        let a = SymMatrix::from_diag(&[3.0, 1.0, 4.0, 1.0, 5.0, 9.0]);
        for gamma in [0.2, 0.5, 0.8, 1.0] {
            let (comp, h) = mmf_compress(&a, gamma).unwrap();
            assert_eq!(compression_error(&a, &comp, &h).unwrap(), 0.0);
        }
    }

    #[test]
    fn error_matches_dense_oracle() {
        let a = random_spsd(8, 3);
        let (comp, h) = mmf_compress(&a, 0.5).unwrap();
        // oracle: dense Q, dense H, explicit Qᵀ H Q
        let q = comp.rotation.to_dense();
        let hd = h.to_dense(&comp).to_matrix();
        let approx = q.transpose().matmul(&hd).unwrap().matmul(&q).unwrap();
        let oracle = a.to_matrix().sub(&approx).unwrap().frobenius_norm();
        let got = compression_error(&a, &comp, &h).unwrap();
        assert!((got - oracle).abs() <= 1e-12, "{got} vs {oracle}");
    }

    #[test]
    fn preserves_spsd() {
        for seed in 0..10 {
            let a = random_spsd(12, seed);
            let (_, h) = mmf_compress(&a, 0.4).unwrap();
            let scale = a.frobenius_norm();
            assert!(h.tail.iter().all(|&t| t >= -1e-10 * scale));
            let ev = sym_evd(&h.core).unwrap().eigvals;
            assert!(*ev.last().unwrap() >= -1e-10 * scale);
        }
    }

    #[test]
    fn error_non_increasing_in_gamma() {
        for seed in 0..10 {
            let a = random_spsd(16, 100 + seed);
            let errs: Vec<f64> = [0.25, 0.5, 0.75, 1.0]
                .iter()
                .map(|&g| {
                    let (comp, h) = mmf_compress(&a, g).unwrap();
                    compression_error(&a, &comp, &h).unwrap()
                })
                .collect();
            for w in errs.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "seed {seed}: {errs:?}");
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(mmf_compress(&SymMatrix::zeros(0), 0.5).is_err());
        let a = SymMatrix::identity(3);
        assert!(mmf_compress(&a, 0.0).is_err());
        assert!(mmf_compress(&a, 1.5).is_err());
        assert!(mmf_compress(&a, f64::NAN).is_err());
        let (comp, h) = mmf_compress(&a, 0.5).unwrap();
        assert!(compression_error(&SymMatrix::identity(4), &comp, &h).is_err());
    }
}
