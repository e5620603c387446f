//! Balanced column clustering for an MKA stage.
//!
//! `⌈n / m_max⌉` anchor columns are drawn uniformly at random. Every column
//! is scored against every anchor by the absolute normalized inner product
//! `|⟨M_j, M_a⟩| / (‖M_j‖ ‖M_a‖)`. Columns are then placed greedily, most
//! confident first, into the best-scoring anchor that still has capacity;
//! capacities are `⌊n/p⌋` or `⌈n/p⌉`, so every cluster is nonempty and none
//! exceeds `m_max`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::{dot, Permutation, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClusterConfig {
    pub m_max: usize,
    pub rng_seed: u64,
}

/// Disjoint cover of `0..n` by nonempty clusters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    clusters: Vec<Vec<usize>>,
    n: usize,
}

impl Partition {
    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    /// Concatenation of the clusters, as the stage's cluster-order permutation.
    pub fn to_permutation(&self) -> Permutation {
        Permutation::new(self.clusters.concat()).expect("partition is a disjoint cover")
    }

    /// Checks the cover invariants; used by tests and deserialization.
    pub fn is_valid(&self, m_max: usize) -> bool {
        let mut seen = vec![false; self.n];
        for c in &self.clusters {
            if c.is_empty() || c.len() > m_max {
                return false;
            }
            for &k in c {
                if k >= self.n || std::mem::replace(&mut seen[k], true) {
                    return false;
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

pub fn cluster_columns(m: &SymMatrix, cfg: &ClusterConfig) -> Partition {
    let n = m.order();
    let m_max = cfg.m_max.max(1);
    let p = n.div_ceil(m_max);
    if p <= 1 {
        return Partition {
            clusters: vec![(0..n).collect()],
            n,
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut anchors = rand::seq::index::sample(&mut rng, n, p).into_vec();
    anchors.sort_unstable();

    let norms: Vec<f64> = (0..n).map(|j| dot(m.row(j), m.row(j)).sqrt()).collect();

    // scores[j][a]; rows are independent so this is the parallel part
    let scores: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            anchors
                .iter()
                .map(|&a| {
                    let denom = norms[j] * norms[a];
                    if denom == 0.0 {
                        0.0
                    } else {
                        dot(m.row(j), m.row(a)).abs() / denom
                    }
                })
                .collect()
        })
        .collect();

    let best = |row: &[f64]| row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| best(&scores[y]).total_cmp(&best(&scores[x])).then(x.cmp(&y)));

    let base = n / p;
    let extra = n % p;
    let mut room: Vec<usize> = (0..p).map(|k| base + usize::from(k < extra)).collect();
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); p];
    for j in order {
        let mut pick = room.iter().position(|&r| r > 0).expect("capacity sums to n");
        let mut pick_score = scores[j][pick];
        for (k, &s) in scores[j].iter().enumerate().skip(pick + 1) {
            if room[k] > 0 && s > pick_score {
                pick = k;
                pick_score = s;
            }
        }
        room[pick] -= 1;
        clusters[pick].push(j);
    }
    for c in &mut clusters {
        c.sort_unstable();
    }
    Partition { clusters, n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kernel_1d(n: usize) -> SymMatrix {
        SymMatrix::from_fn(n, |i, j| {
            let d = (i as f64 - j as f64) * 0.1;
            (-d * d).exp()
        })
    }

    #[test]
    fn four_columns_two_per_cluster() {
        let part = cluster_columns(&kernel_1d(4), &ClusterConfig { m_max: 2, rng_seed: 3 });
        assert_eq!(part.sizes(), vec![2, 2]);
        assert!(part.is_valid(2));
    }

    #[test]
    fn small_input_is_one_cluster() {
        let part = cluster_columns(&kernel_1d(5), &ClusterConfig { m_max: 8, rng_seed: 0 });
        assert_eq!(part.clusters(), &[vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn singleton() {
        let part = cluster_columns(&SymMatrix::identity(1), &ClusterConfig { m_max: 1, rng_seed: 0 });
        assert_eq!(part.clusters(), &[vec![0]]);
    }

    #[test]
    fn deterministic_for_seed() {
        let m = kernel_1d(40);
        let cfg = ClusterConfig { m_max: 6, rng_seed: 99 };
        assert_eq!(cluster_columns(&m, &cfg), cluster_columns(&m, &cfg));
    }

    #[test]
    fn zero_columns_still_placed() {
        let m = SymMatrix::zeros(7);
        let part = cluster_columns(&m, &ClusterConfig { m_max: 3, rng_seed: 1 });
        assert!(part.is_valid(3));
        assert_eq!(part.len(), 3);
    }

    proptest! {
        #[test]
        fn always_a_valid_partition(n in 1usize..60, m_max in 1usize..20, seed: u64) {
            let m = SymMatrix::from_fn(n, |i, j| ((i * 7 + j * 13 + (seed % 11) as usize) % 11) as f64 - 5.0);
            let part = cluster_columns(&m, &ClusterConfig { m_max, rng_seed: seed });
            prop_assert!(part.is_valid(m_max));
            prop_assert!(part.len() >= n.div_ceil(m_max));
        }
    }
}
