//! Multiresolution kernel approximation (MKA).
//!
//! A symmetric positive semi-definite kernel matrix is compressed stage by
//! stage: the columns are clustered, each diagonal block is rotated into
//! core-diagonal form by a greedy sequence of Givens rotations, the cores are
//! gathered into the next stage's matrix and the wavelet diagonals are kept
//! aside. The result is a telescoping factorization
//!
//! ```text
//! K ≈ Q₁ᵀ (Q₂ᵀ ( … Q_sᵀ (K_s ⊕ D_s) Q_s … ⊕ D₂) Q₂ ⊕ D₁) Q₁
//! ```
//!
//! on which matrix-vector products, matrix powers, exponentials, solves and
//! log-determinants are all cheap. [`gp`] uses it for Gaussian process
//! regression and [`bench`] compares it against a full GP and a
//! subset-of-regressors baseline.

pub mod bench;
pub mod cli;
pub mod cluster;
pub mod error;
pub mod gp;
pub mod linalg;
pub mod mka;
pub mod mmf;

pub use error::{Error, Result};
pub use mka::{
    mka_apply, mka_factorize, mka_logdet, mka_reconstruct, mka_solve, mka_spectral, mka_storage,
    MkaConfig, MkaFactorization, MkaStage, SpectralFn, StorageReport,
};
