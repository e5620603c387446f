//! The staged MKA factorization and the operators that work directly on
//! its factored form.

mod serial;

use rayon::prelude::*;

use crate::cluster::{cluster_columns, ClusterConfig};
use crate::error::{Error, Result};
use crate::linalg::{permute_sym, sym_evd, Permutation, SymMatrix};
use crate::mmf::{check_gamma, greedy_jacobi, CoreDiagonalCompression};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MkaConfig {
    /// Fraction of each cluster kept in its core.
    pub gamma: f64,
    /// Stop once the core is at most this large.
    pub d_core_target: usize,
    pub m_max: usize,
    pub rng_seed: u64,
    pub stage_cap: usize,
}

impl Default for MkaConfig {
    fn default() -> Self {
        MkaConfig {
            gamma: 0.5,
            d_core_target: 16,
            m_max: 32,
            rng_seed: 0,
            stage_cap: 64,
        }
    }
}

impl MkaConfig {
    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        if self.d_core_target == 0 {
            return Err(Error::invalid("d_core_target must be at least 1"));
        }
        if self.m_max == 0 {
            return Err(Error::invalid("m_max must be at least 1"));
        }
        if self.stage_cap == 0 {
            return Err(Error::invalid("stage_cap must be at least 1"));
        }
        if self.gamma == 1.0 && self.stage_cap != 1 {
            return Err(Error::invalid(
                "gamma = 1 cannot shrink the core, so stage_cap must be 1",
            ));
        }
        Ok(())
    }

    /// Single exact stage: no rotations are truncated.
    pub fn exact() -> Self {
        MkaConfig {
            gamma: 1.0,
            d_core_target: 1,
            stage_cap: 1,
            ..MkaConfig::default()
        }
    }
}

/// One pass of cluster → rotate → gather cores → truncate.
#[derive(Clone, Debug, PartialEq)]
pub struct MkaStage {
    n_in: usize,
    cluster_order: Permutation,
    per_cluster: Vec<CoreDiagonalCompression>,
    offsets: Vec<usize>,
    core_first: Permutation,
    c_out: usize,
    d_entries: Vec<f64>,
}

impl MkaStage {
    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn cluster_order(&self) -> &Permutation {
        &self.cluster_order
    }

    pub fn per_cluster(&self) -> &[CoreDiagonalCompression] {
        &self.per_cluster
    }

    pub fn core_first(&self) -> &Permutation {
        &self.core_first
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    /// Diagonal of `D_ℓ`, in post-`P_ℓ` order.
    pub fn d_entries(&self) -> &[f64] {
        &self.d_entries
    }

    pub fn rotation_count(&self) -> usize {
        self.per_cluster.iter().map(|c| c.rotation.len()).sum()
    }

    /// `x ↦ P Q̄ C x` on a vector of length `n_in`.
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.cluster_order.gather(x);
        for (comp, &off) in self.per_cluster.iter().zip(&self.offsets) {
            comp.rotation.apply(&mut y[off..off + comp.dim()]);
        }
        self.core_first.gather(&y)
    }

    /// Inverse of [`MkaStage::forward`].
    fn backward(&self, h: &[f64]) -> Vec<f64> {
        let mut y = self.core_first.scatter(h);
        for (comp, &off) in self.per_cluster.iter().zip(&self.offsets) {
            comp.rotation.apply_transpose(&mut y[off..off + comp.dim()]);
        }
        self.cluster_order.scatter(&y)
    }
}

/// `K̃ = 𝒬₁ᵀ(𝒬₂ᵀ(… (K_s ⊕ D_s) …)𝒬₂ ⊕ D₁)𝒬₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct MkaFactorization {
    n: usize,
    stages: Vec<MkaStage>,
    core: SymMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpectralFn {
    Identity,
    Power(f64),
    Exp(f64),
}

impl SpectralFn {
    fn eval(self, x: f64, scale: f64) -> Result<f64> {
        let tiny = 1e-12 * scale;
        match self {
            SpectralFn::Identity => Ok(x),
            SpectralFn::Exp(beta) => Ok((beta * x).exp()),
            SpectralFn::Power(alpha) => {
                if alpha < 0.0 && x.abs() <= tiny {
                    return Err(Error::Singular {
                        value: x,
                        reason: format!("power {alpha} of a (near) zero eigenvalue"),
                    });
                }
                if alpha.fract() == 0.0 && alpha.abs() <= i32::MAX as f64 {
                    return Ok(x.powi(alpha as i32));
                }
                if x < 0.0 {
                    if x >= -tiny {
                        return Ok(0.0);
                    }
                    return Err(Error::Singular {
                        value: x,
                        reason: format!("fractional power {alpha} of a negative eigenvalue"),
                    });
                }
                Ok(x.powf(alpha))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct StorageReport {
    pub stages: usize,
    pub n: usize,
    pub d_core: usize,
    pub rotations: usize,
    /// Two reals per rotation.
    pub rotation_values: usize,
    pub d_values: usize,
    pub core_values: usize,
    pub total: usize,
    /// `(2s + 1) n + d_core²`.
    pub bound: usize,
}

fn block_offsets(per_cluster: &[CoreDiagonalCompression]) -> Vec<usize> {
    per_cluster
        .iter()
        .scan(0, |acc, c| {
            let off = *acc;
            *acc += c.dim();
            Some(off)
        })
        .collect()
}

pub fn mka_factorize(k: &SymMatrix, cfg: &MkaConfig) -> Result<MkaFactorization> {
    cfg.validate()?;
    let n = k.order();
    if n == 0 {
        return Err(Error::invalid("cannot factorize an empty matrix"));
    }

    let mut current = k.clone();
    let mut stages = Vec::new();
    loop {
        let ell = stages.len() + 1;
        let n_in = current.order();
        let part = cluster_columns(
            &current,
            &ClusterConfig {
                m_max: cfg.m_max,
                rng_seed: cfg.rng_seed ^ ell as u64,
            },
        );
        let cluster_order = part.to_permutation();
        let mut rotated = permute_sym(&current, &cluster_order)?;

        let mut blocks = Vec::with_capacity(part.len());
        let mut off = 0;
        for size in part.sizes() {
            blocks.push(off..off + size);
            off += size;
        }
        let per_cluster = blocks
            .par_iter()
            .map(|r| {
                let idx: Vec<usize> = r.clone().collect();
                greedy_jacobi(&rotated.submatrix(&idx), cfg.gamma).map(|(c, _)| c)
            })
            .collect::<Result<Vec<_>>>()?;

        // H̄ = Q̄ K̄ Q̄ᵀ on the whole matrix, so the cross-cluster core couplings survive
        for (comp, r) in per_cluster.iter().zip(&blocks) {
            for g in comp.rotation.rotations() {
                rotated.rotate_pair(r.start + g.i, r.start + g.j, g.c, g.s);
            }
        }

        let mut ord = Vec::with_capacity(n_in);
        for (comp, r) in per_cluster.iter().zip(&blocks) {
            ord.extend(comp.core_indices.iter().map(|&i| r.start + i));
        }
        let c_out = ord.len();
        for (comp, r) in per_cluster.iter().zip(&blocks) {
            ord.extend(comp.wavelet_indices.iter().map(|&i| r.start + i));
        }
        if c_out == n_in && cfg.gamma < 1.0 {
            return Err(Error::NoProgress { stage: ell, n_in });
        }
        let d_entries = ord[c_out..].iter().map(|&w| rotated.get(w, w)).collect();
        let next = rotated.submatrix(&ord[..c_out]);
        let core_first = Permutation::new(ord)?;

        stages.push(MkaStage {
            n_in,
            cluster_order,
            offsets: blocks.iter().map(|r| r.start).collect(),
            per_cluster,
            core_first,
            c_out,
            d_entries,
        });
        current = next;
        if c_out <= cfg.d_core_target || stages.len() >= cfg.stage_cap {
            break;
        }
    }

    Ok(MkaFactorization {
        n,
        stages,
        core: current,
    })
}

impl MkaFactorization {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stages(&self) -> &[MkaStage] {
        &self.stages
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    /// The innermost dense matrix `K_s`.
    pub fn core(&self) -> &SymMatrix {
        &self.core
    }

    pub fn d_core(&self) -> usize {
        self.core.order()
    }

    /// Eigenvalues of the flat core-diagonal `H`: those of `K_s` followed by
    /// every stage's `D` entries.
    pub fn global_spectrum(&self) -> Result<Vec<f64>> {
        let mut out = sym_evd(&self.core)?.eigvals;
        for st in &self.stages {
            out.extend_from_slice(&st.d_entries);
        }
        Ok(out)
    }

    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.n {
            return Err(Error::dim(format!(
                "vector of length {} against factorization of order {}",
                z.len(),
                self.n
            )));
        }
        let mut tails = Vec::with_capacity(self.stages.len());
        let mut x = z.to_vec();
        for st in &self.stages {
            let mut h = st.forward(&x);
            let tail: Vec<f64> = h[st.c_out..]
                .iter()
                .zip(&st.d_entries)
                .map(|(v, d)| v * d)
                .collect();
            h.truncate(st.c_out);
            tails.push(tail);
            x = h;
        }
        x = self.core.mul_vec(&x)?;
        for st in self.stages.iter().rev() {
            x.extend(tails.pop().expect("one tail per stage"));
            x = st.backward(&x);
        }
        Ok(x)
    }

    /// Dense `K̃`, expanded stage by stage from the inside out.
    pub fn reconstruct(&self) -> SymMatrix {
        let mut m = self.core.clone();
        for st in self.stages.iter().rev() {
            let mut h = SymMatrix::zeros(st.n_in);
            for i in 0..st.c_out {
                for j in i..st.c_out {
                    h.set(i, j, m.get(i, j));
                }
            }
            for (k, &d) in st.d_entries.iter().enumerate() {
                h.set(st.c_out + k, st.c_out + k, d);
            }
            let mut hbar = permute_sym(&h, &st.core_first.inverse()).expect("stage permutation");
            for (comp, &off) in st.per_cluster.iter().zip(&st.offsets) {
                for g in comp.rotation.rotations().iter().rev() {
                    hbar.rotate_pair(off + g.i, off + g.j, g.c, -g.s);
                }
            }
            m = permute_sym(&hbar, &st.cluster_order.inverse()).expect("stage permutation");
        }
        m
    }

    /// Same stages, with `f` applied to the spectrum of the flat `H`.
    pub fn spectral(&self, f: SpectralFn) -> Result<MkaFactorization> {
        if f == SpectralFn::Identity {
            return Ok(self.clone());
        }
        let evd = sym_evd(&self.core)?;
        let scale = evd
            .eigvals
            .iter()
            .chain(self.stages.iter().flat_map(|s| s.d_entries.iter()))
            .fold(0.0_f64, |m, x| m.max(x.abs()));
        let fvals = evd
            .eigvals
            .iter()
            .map(|&l| f.eval(l, scale))
            .collect::<Result<Vec<_>>>()?;
        let core = evd.with_eigvals(&fvals);
        let stages = self
            .stages
            .iter()
            .map(|st| {
                let d_entries = st
                    .d_entries
                    .iter()
                    .map(|&d| f.eval(d, scale))
                    .collect::<Result<Vec<_>>>()?;
                Ok(MkaStage {
                    d_entries,
                    ..st.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MkaFactorization {
            n: self.n,
            stages,
            core,
        })
    }

    /// `K̃⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.spectral(SpectralFn::Power(-1.0))?.apply(b)
    }

    pub fn logdet(&self) -> Result<f64> {
        let mut acc = 0.0;
        for l in self.global_spectrum()? {
            if l <= 0.0 {
                return Err(Error::Singular {
                    value: l,
                    reason: "log-determinant needs strictly positive eigenvalues".into(),
                });
            }
            acc += l.ln();
        }
        Ok(acc)
    }

    pub fn storage(&self) -> StorageReport {
        let s = self.stages.len();
        let rotations: usize = self.stages.iter().map(MkaStage::rotation_count).sum();
        let d_values: usize = self.stages.iter().map(|st| st.d_entries.len()).sum();
        let d_core = self.core.order();
        let core_values = d_core * d_core;
        StorageReport {
            stages: s,
            n: self.n,
            d_core,
            rotations,
            rotation_values: 2 * rotations,
            d_values,
            core_values,
            total: 2 * rotations + d_values + core_values,
            bound: (2 * s + 1) * self.n + core_values,
        }
    }
}

pub fn mka_apply(f: &MkaFactorization, z: &[f64]) -> Result<Vec<f64>> {
    f.apply(z)
}

pub fn mka_reconstruct(f: &MkaFactorization) -> SymMatrix {
    f.reconstruct()
}

pub fn mka_spectral(f: &MkaFactorization, func: SpectralFn) -> Result<MkaFactorization> {
    f.spectral(func)
}

pub fn mka_solve(f: &MkaFactorization, b: &[f64]) -> Result<Vec<f64>> {
    f.solve(b)
}

pub fn mka_logdet(f: &MkaFactorization) -> Result<f64> {
    f.logdet()
}

pub fn mka_storage(f: &MkaFactorization) -> StorageReport {
    f.storage()
}

#[cfg(test)]
mod tests;
