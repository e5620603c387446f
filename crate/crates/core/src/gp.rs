//! Gaussian process regression with a squared-exponential kernel: the exact
//! Cholesky predictor, the subset-of-regressors (Nyström) baseline, and the
//! MKA predictor built on the joint train/test kernel matrix.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, sym_evd, Cholesky, Matrix, SymMatrix};
use crate::mka::{mka_factorize, MkaConfig, MkaFactorization, SpectralFn};

/// Inputs `x` (one row per point) with targets `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::invalid("dataset needs at least one point"));
        }
        if x.rows() != y.len() {
            return Err(Error::dim(format!(
                "{} input rows but {} targets",
                x.rows(),
                y.len()
            )));
        }
        Ok(Dataset { x, y })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Dataset> {
        Dataset::new(self.x.select_rows(idx), idx.iter().map(|&i| self.y[i]).collect())
    }

}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GpHyper {
    pub lengthscale: f64,
    /// Observation noise variance σ².
    pub noise: f64,
}

impl GpHyper {
    pub fn new(lengthscale: f64, noise: f64) -> Result<Self> {
        let h = GpHyper { lengthscale, noise };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(Error::invalid(format!(
                "lengthscale must be positive, got {}",
                self.lengthscale
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be non-negative, got {}",
                self.noise
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (-d2 / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionResult {
    pub mean: Vec<f64>,
    /// Predictive variance of a noisy observation (includes σ²).
    pub variance: Vec<f64>,
}

fn check_dims(x: &Matrix, x2: &Matrix) -> Result<()> {
    if x.cols() != x2.cols() {
        return Err(Error::dim(format!(
            "inputs have {} and {} features",
            x.cols(),
            x2.cols()
        )));
    }
    Ok(())
}

/// `k(x_i, x'_j) = exp(-‖x_i - x'_j‖² / 2ℓ²)`.
pub fn kernel_matrix(x: &Matrix, x2: &Matrix, hyper: &GpHyper) -> Result<Matrix> {
    check_dims(x, x2)?;
    Ok(Matrix::from_fn(x.rows(), x2.rows(), |i, j| {
        hyper.kernel(x.row(i), x2.row(j))
    }))
}

pub fn kernel_sym(x: &Matrix, hyper: &GpHyper) -> SymMatrix {
    SymMatrix::from_fn(x.rows(), |i, j| hyper.kernel(x.row(i), x.row(j)))
}

/// `[[K + σ²I, K_*], [K_*ᵀ, K_test]]` with training points first.
pub fn joint_kernel_matrix(train: &Dataset, test_x: &Matrix, hyper: &GpHyper) -> Result<SymMatrix> {
    check_dims(train.x(), test_x)?;
    let n = train.len();
    let pts = |i: usize| {
        if i < n {
            train.x().row(i)
        } else {
            test_x.row(i - n)
        }
    };
    Ok(SymMatrix::from_fn(n + test_x.rows(), |i, j| {
        let k = hyper.kernel(pts(i), pts(j));
        if i == j && i < n {
            k + hyper.noise
        } else {
            k
        }
    }))
}

fn noisy_train_kernel(train: &Dataset, hyper: &GpHyper) -> SymMatrix {
    let mut k = kernel_sym(train.x(), hyper);
    k.add_diag(hyper.noise);
    k
}

pub fn full_gp_predict(train: &Dataset, test_x: &Matrix, hyper: &GpHyper) -> Result<PredictionResult> {
    hyper.validate()?;
    let chol = Cholesky::new(&noisy_train_kernel(train, hyper))?;
    let alpha = chol.solve_vec(train.y())?;
    let kstar = kernel_matrix(test_x, train.x(), hyper)?;
    let (mean, variance) = (0..test_x.rows())
        .into_par_iter()
        .map(|j| {
            let k = kstar.row(j);
            let v = chol.solve_vec(k)?;
            Ok((dot(k, &alpha), 1.0 + hyper.noise - dot(k, &v)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(PredictionResult { mean, variance })
}

/// Uniform landmark indices without replacement, sorted.
pub fn select_landmarks(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, m.min(n)).into_vec();
    idx.sort_unstable();
    idx
}

/// Subset of regressors on landmarks `I`:
/// `mean = K_{test,I} Σ K_{I,train} y`, `var = σ² (1 + k_I Σ k_Iᵀ)`
/// with `Σ = (K_{I,train} K_{train,I} + σ² W)⁻¹`.
pub fn sor_predict(
    train: &Dataset,
    test_x: &Matrix,
    landmarks: &[usize],
    hyper: &GpHyper,
) -> Result<PredictionResult> {
    hyper.validate()?;
    if landmarks.is_empty() {
        return Err(Error::invalid("subset of regressors needs at least one landmark"));
    }
    if let Some(&bad) = landmarks.iter().find(|&&i| i >= train.len()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            dim: train.len(),
        });
    }
    let m = landmarks.len();
    let xi = train.x().select_rows(landmarks);
    let kuf = kernel_matrix(&xi, train.x(), hyper)?;
    let mut w = kernel_sym(&xi, hyper);
    w.add_diag(1e-10 * w.trace() / m as f64);

    let inner = SymMatrix::from_fn(m, |a, b| {
        dot(kuf.row(a), kuf.row(b)) + hyper.noise * w.get(a, b)
    });
    let chol = Cholesky::new(&inner)?;
    let beta = chol.solve_vec(&kuf.mul_vec(train.y())?)?;
    let ktest = kernel_matrix(test_x, &xi, hyper)?;
    let mut mean = Vec::with_capacity(test_x.rows());
    let mut variance = Vec::with_capacity(test_x.rows());
    for j in 0..test_x.rows() {
        let k = ktest.row(j);
        mean.push(dot(k, &beta));
        variance.push(hyper.noise * (1.0 + dot(k, &chol.solve_vec(k)?)));
    }
    Ok(PredictionResult { mean, variance })
}

/// `Ǩ⁻¹ = A - B D⁻¹ C` from the blocks of the factored inverse of the
/// joint matrix, applied matrix-free.
struct SchurInverse {
    inv: MkaFactorization,
    n: usize,
    p: usize,
    d_evd: crate::linalg::EvdResult,
}

impl SchurInverse {
    fn new(joint: &MkaFactorization, n: usize) -> Result<Self> {
        let inv = joint.spectral(SpectralFn::Power(-1.0))?;
        let p = joint.n() - n;
        let cols = (0..p)
            .into_par_iter()
            .map(|k| {
                let mut e = vec![0.0; n + p];
                e[n + k] = 1.0;
                inv.apply(&e).map(|c| c[n..].to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        let d = SymMatrix::from_fn(p, |a, b| 0.5 * (cols[b][a] + cols[a][b]));
        let d_evd = sym_evd(&d)?;
        let top = d_evd.eigvals.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if let Some(&bad) = d_evd.eigvals.iter().find(|l| l.abs() <= 1e-12 * top) {
            return Err(Error::Singular {
                value: bad,
                reason: "test block of the inverse joint kernel is singular".into(),
            });
        }
        Ok(SchurInverse { inv, n, p, d_evd })
    }

    fn d_solve(&self, w: &[f64]) -> Vec<f64> {
        let v = &self.d_evd.eigvecs;
        let coef: Vec<f64> = (0..self.p)
            .map(|k| (0..self.p).map(|i| v[(i, k)] * w[i]).sum::<f64>() / self.d_evd.eigvals[k])
            .collect();
        (0..self.p)
            .map(|i| (0..self.p).map(|k| v[(i, k)] * coef[k]).sum())
            .collect()
    }

    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut padded = r.to_vec();
        padded.resize(self.n + self.p, 0.0);
        let full = self.inv.apply(&padded)?;
        let v = self.d_solve(&full[self.n..]);
        let mut lifted = vec![0.0; self.n];
        lifted.extend(v);
        let corr = self.inv.apply(&lifted)?;
        Ok(full[..self.n].iter().zip(&corr).map(|(u, c)| u - c).collect())
    }
}

/// Prediction from an MKA factorization of the joint train/test kernel,
/// using the Schur complement of the test block of its inverse.
pub fn mka_gp_predict(
    train: &Dataset,
    test_x: &Matrix,
    hyper: &GpHyper,
    cfg: &MkaConfig,
) -> Result<PredictionResult> {
    hyper.validate()?;
    if test_x.rows() == 0 {
        return Err(Error::invalid("MKA prediction needs at least one test point"));
    }
    let n = train.len();
    let joint = joint_kernel_matrix(train, test_x, hyper)?;
    let fact = mka_factorize(&joint, cfg)?;
    let schur = SchurInverse::new(&fact, n)?;

    let kstar = kernel_matrix(test_x, train.x(), hyper)?;
    let alpha = schur.apply(train.y())?;
    let (mean, variance) = (0..test_x.rows())
        .into_par_iter()
        .map(|j| {
            let k = kstar.row(j);
            let v = schur.apply(k)?;
            Ok((dot(k, &alpha), 1.0 + hyper.noise - dot(k, &v)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(PredictionResult { mean, variance })
}

fn population_variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Standardized mean squared error: MSE over the population variance of `y`.
pub fn smse(pred_mean: &[f64], y: &[f64]) -> Result<f64> {
    if pred_mean.len() != y.len() {
        return Err(Error::dim(format!(
            "{} predictions against {} targets",
            pred_mean.len(),
            y.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::invalid("SMSE needs at least two test points"));
    }
    let var = population_variance(y);
    if var == 0.0 {
        return Err(Error::invalid("SMSE is undefined for constant test targets"));
    }
    let mse = pred_mean.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64;
    Ok(mse / var)
}

/// Which variance normalizes each squared error in MNLP.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MnlpVariance {
    /// Each point's own predictive variance.
    #[default]
    Predictive,
    /// The population variance of the test targets, shared by all points.
    TestOutputs,
}

/// Mean negative log probability with per-point predictive variances.
pub fn mnlp(pred: &PredictionResult, y: &[f64]) -> Result<f64> {
    mnlp_with(pred, y, MnlpVariance::Predictive)
}

pub fn mnlp_with(pred: &PredictionResult, y: &[f64], which: MnlpVariance) -> Result<f64> {
    if pred.mean.len() != y.len() || pred.variance.len() != y.len() {
        return Err(Error::dim(format!(
            "{} means and {} variances against {} targets",
            pred.mean.len(),
            pred.variance.len(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::invalid("MNLP needs at least one test point"));
    }
    let shared = match which {
        MnlpVariance::Predictive => None,
        MnlpVariance::TestOutputs => Some(population_variance(y)),
    };
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut acc = 0.0;
    for ((m, v), t) in pred.mean.iter().zip(&pred.variance).zip(y) {
        let v = shared.unwrap_or(*v);
        if v.is_nan() || v <= 0.0 {
            return Err(Error::invalid(format!(
                "MNLP needs positive variances, got {v}"
            )));
        }
        acc += (m - t).powi(2) / v + v.ln() + ln_2pi;
    }
    Ok(acc / y.len() as f64)
}
