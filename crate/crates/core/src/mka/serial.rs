//! JSON form of a factorization:
//! `{n, stages: [{n_in, cluster_order, per_cluster: [{dim, core_size, rotations: [[i,j,c,s], …]}], core_first, d_entries}], core}`
//! with `core` row-major. Reals are written as shortest round-trip decimals.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{block_offsets, MkaFactorization, MkaStage};
use crate::error::{Error, Result};
use crate::linalg::{GivensRotation, Permutation, RotationSequence, SymMatrix};
use crate::mmf::CoreDiagonalCompression;

#[derive(Serialize, Deserialize)]
struct WireCluster {
    dim: usize,
    core_size: usize,
    rotations: Vec<GivensRotation>,
}

#[derive(Serialize, Deserialize)]
struct WireStage {
    n_in: usize,
    cluster_order: Vec<usize>,
    per_cluster: Vec<WireCluster>,
    core_first: Vec<usize>,
    d_entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WireFactorization {
    n: usize,
    stages: Vec<WireStage>,
    core: Vec<f64>,
}

impl From<&MkaFactorization> for WireFactorization {
    fn from(f: &MkaFactorization) -> Self {
        WireFactorization {
            n: f.n,
            stages: f
                .stages
                .iter()
                .map(|st| WireStage {
                    n_in: st.n_in,
                    cluster_order: st.cluster_order.as_slice().to_vec(),
                    per_cluster: st
                        .per_cluster
                        .iter()
                        .map(|c| WireCluster {
                            dim: c.dim(),
                            core_size: c.core_size,
                            rotations: c.rotation.rotations().to_vec(),
                        })
                        .collect(),
                    core_first: st.core_first.as_slice().to_vec(),
                    d_entries: st.d_entries.clone(),
                })
                .collect(),
            core: f.core.as_slice().to_vec(),
        }
    }
}

fn stage_from_wire(w: WireStage, idx: usize) -> Result<MkaStage> {
    let bad = |msg: String| Error::invalid(format!("stage {}: {msg}", idx + 1));
    let cluster_order = Permutation::new(w.cluster_order)?;
    let core_first = Permutation::new(w.core_first)?;
    if cluster_order.len() != w.n_in || core_first.len() != w.n_in {
        return Err(bad(format!("permutations must have length n_in = {}", w.n_in)));
    }
    let dims: usize = w.per_cluster.iter().map(|c| c.dim).sum();
    if dims != w.n_in {
        return Err(bad(format!("cluster dimensions sum to {dims}, not {}", w.n_in)));
    }
    let c_out: usize = w.per_cluster.iter().map(|c| c.core_size).sum();
    if c_out == 0 || w.d_entries.len() != w.n_in - c_out {
        return Err(bad(format!(
            "core size {c_out} and {} diagonal entries do not fit n_in = {}",
            w.d_entries.len(),
            w.n_in
        )));
    }

    let mut per_cluster = Vec::with_capacity(w.per_cluster.len());
    let mut off = 0;
    for c in w.per_cluster {
        let in_block = |k: &usize| (off..off + c.dim).contains(k);
        let ord = core_first.as_slice();
        let core_indices: Vec<usize> = ord[..c_out].iter().filter(|k| in_block(k)).map(|k| k - off).collect();
        let wavelet_indices: Vec<usize> = ord[c_out..].iter().filter(|k| in_block(k)).map(|k| k - off).collect();
        if core_indices.len() != c.core_size {
            return Err(bad(format!(
                "core_first places {} core coordinates in a cluster with core_size {}",
                core_indices.len(),
                c.core_size
            )));
        }
        per_cluster.push(CoreDiagonalCompression {
            rotation: RotationSequence::new(c.dim, c.rotations)?,
            core_size: c.core_size,
            core_indices,
            wavelet_indices,
        });
        off += c.dim;
    }

    Ok(MkaStage {
        n_in: w.n_in,
        cluster_order,
        offsets: block_offsets(&per_cluster),
        per_cluster,
        core_first,
        c_out,
        d_entries: w.d_entries,
    })
}

impl TryFrom<WireFactorization> for MkaFactorization {
    type Error = Error;

    fn try_from(w: WireFactorization) -> Result<Self> {
        let mut expected = w.n;
        let mut stages = Vec::with_capacity(w.stages.len());
        for (idx, ws) in w.stages.into_iter().enumerate() {
            if ws.n_in != expected {
                return Err(Error::invalid(format!(
                    "stage {} has n_in = {}, expected {expected}",
                    idx + 1,
                    ws.n_in
                )));
            }
            let st = stage_from_wire(ws, idx)?;
            expected = st.c_out;
            stages.push(st);
        }
        if w.core.len() != expected * expected {
            return Err(Error::invalid(format!(
                "core has {} values, expected {expected}²",
                w.core.len()
            )));
        }
        Ok(MkaFactorization {
            n: w.n,
            stages,
            core: SymMatrix::from_row_major(expected, w.core)?,
        })
    }
}

impl MkaFactorization {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&WireFactorization::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let wire: WireFactorization = serde_json::from_str(s)?;
        wire.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        MkaFactorization::from_json(&s)
    }
}
