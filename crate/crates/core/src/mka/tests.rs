use super::*;
use crate::linalg::{norm, Cholesky, Matrix};
use crate::mmf::rotation_count;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_spsd(n: usize, seed: u64) -> SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = (n / 2).max(1);
    let g = Matrix::from_fn(n, r, |_, _| rng.gen_range(-1.0..1.0));
    SymMatrix::from_dense(&g.matmul(&g.transpose()).unwrap(), 1e-12).unwrap()
}

fn rbf_kernel(n: usize, seed: u64, ls: f64) -> SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)]).collect();
    SymMatrix::from_fn(n, |i, j| {
        let d2 = (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2);
        (-d2 / (2.0 * ls * ls)).exp()
    })
}

fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn max_abs_diff(a: &SymMatrix, b: &SymMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

fn cfg(gamma: f64, target: usize, m_max: usize) -> MkaConfig {
    MkaConfig {
        gamma,
        d_core_target: target,
        m_max,
        rng_seed: 17,
        stage_cap: 64,
    }
}

#[test]
fn identity_is_reproduced_exactly() {
    let k = SymMatrix::identity(4);
    let f = mka_factorize(&k, &cfg(0.5, 1, 4)).unwrap();
    assert_eq!(f.reconstruct(), k);
    let z = vec![1.0, -2.0, 3.0, 0.5];
    assert_eq!(f.apply(&z).unwrap(), z);
    assert_eq!(f.solve(&z).unwrap(), z);
    assert_eq!(f.logdet().unwrap(), 0.0);
}

#[test]
fn gamma_one_single_stage_is_exact() {
    let k = random_spsd(10, 4);
    let f = mka_factorize(&k, &MkaConfig { m_max: 4, ..MkaConfig::exact() }).unwrap();
    assert_eq!(f.stage_count(), 1);
    assert!(max_abs_diff(&f.reconstruct(), &k) <= 1e-12);
}

#[test]
fn stage_count_follows_geometric_shrinkage() {
    let k = random_spsd(64, 9);
    let f = mka_factorize(&k, &cfg(0.5, 8, 8)).unwrap();
    // s = log(8/64) / log(0.5) = 3
    assert_eq!(f.stage_count(), 3);
    let sizes: Vec<usize> = f.stages().iter().map(|s| s.c_out()).collect();
    assert_eq!(sizes, vec![32, 16, 8]);
    assert_eq!(f.d_core(), 8);
}

#[test]
fn stage_bookkeeping_invariants() {
    let k = rbf_kernel(50, 2, 0.7);
    let f = mka_factorize(&k, &cfg(0.6, 5, 7)).unwrap();
    let mut n_in = 50;
    for st in f.stages() {
        assert_eq!(st.n_in(), n_in);
        let cores: usize = st.per_cluster().iter().map(|c| c.core_size).sum();
        assert_eq!(cores, st.c_out());
        assert_eq!(st.d_entries().len(), st.n_in() - st.c_out());
        for c in st.per_cluster() {
            assert_eq!(c.rotation.len(), rotation_count(c.dim(), 0.6));
            assert!(c.dim() <= 7);
        }
        n_in = st.c_out();
    }
    assert_eq!(f.d_core(), n_in);
    assert!(f.d_core() <= 5);
}

#[test]
fn apply_matches_dense_reconstruction() {
    for seed in 0..5 {
        let k = rbf_kernel(32, seed, 0.8);
        let f = mka_factorize(&k, &cfg(0.5, 4, 8)).unwrap();
        let dense = f.reconstruct();
        let z = rand_vec(32, 100 + seed);
        let got = f.apply(&z).unwrap();
        let want = dense.mul_vec(&z).unwrap();
        let diff: Vec<f64> = got.iter().zip(&want).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) <= 1e-10 * dense.frobenius_norm() * norm(&z));
    }
}

#[test]
fn apply_of_zero_is_zero() {
    let f = mka_factorize(&rbf_kernel(20, 1, 1.0), &cfg(0.5, 3, 6)).unwrap();
    assert!(f.apply(&[0.0; 20]).unwrap().iter().all(|&x| x == 0.0));
    assert!(f.apply(&[0.0; 19]).is_err());
}

#[test]
fn forward_then_backward_is_identity() {
    let f = mka_factorize(&rbf_kernel(30, 3, 0.5), &cfg(0.5, 4, 6)).unwrap();
    let st = &f.stages()[0];
    let x = rand_vec(30, 5);
    let back = st.backward(&st.forward(&x));
    for (a, b) in back.iter().zip(&x) {
        assert!((a - b).abs() < 1e-14);
    }
    // the permutation part alone is exact
    let p = st.core_first();
    assert_eq!(p.scatter(&p.gather(&x)), x);
}

#[test]
fn reconstruction_stays_spsd() {
    for seed in 0..10 {
        let k = random_spsd(24, seed);
        let f = mka_factorize(&k, &cfg(0.5, 3, 6)).unwrap();
        let ev = sym_evd(&f.reconstruct()).unwrap().eigvals;
        assert!(*ev.last().unwrap() >= -1e-8 * ev[0]);
    }
}

#[test]
fn diagonal_input_is_exact_for_any_gamma() {
    let d: Vec<f64> = (0..20).map(|i| 1.0 + i as f64 * 0.3).collect();
    let k = SymMatrix::from_diag(&d);
    for gamma in [0.25, 0.5, 0.75] {
        let f = mka_factorize(&k, &cfg(gamma, 6, 5)).unwrap();
        assert!(max_abs_diff(&f.reconstruct(), &k) <= 1e-12);
    }
}

#[test]
fn spectral_identity_and_exp_zero() {
    let f = mka_factorize(&rbf_kernel(24, 8, 0.9), &cfg(0.5, 3, 6)).unwrap();
    let z = rand_vec(24, 1);
    let same = f.spectral(SpectralFn::Identity).unwrap();
    assert_eq!(same.apply(&z).unwrap(), f.apply(&z).unwrap());
    let e0 = f.spectral(SpectralFn::Exp(0.0)).unwrap();
    assert!(max_abs_diff(&e0.reconstruct(), &SymMatrix::identity(24)) <= 1e-12);
}

#[test]
fn spectral_square_matches_dense_square() {
    let f = mka_factorize(&rbf_kernel(28, 5, 0.6), &cfg(0.5, 4, 7)).unwrap();
    let dense = f.reconstruct().to_matrix();
    let sq = dense.matmul(&dense).unwrap();
    let got = f.spectral(SpectralFn::Power(2.0)).unwrap().reconstruct().to_matrix();
    assert!(got.sub(&sq).unwrap().frobenius_norm() <= 1e-8 * sq.frobenius_norm());
}

#[test]
fn spectral_exp_matches_dense_evd() {
    let f = mka_factorize(&rbf_kernel(20, 6, 0.6), &cfg(0.5, 3, 5)).unwrap();
    let want = sym_evd(&f.reconstruct()).unwrap().reassemble(|l| (0.3 * l).exp());
    let got = f.spectral(SpectralFn::Exp(0.3)).unwrap().reconstruct();
    assert!(max_abs_diff(&got, &want) <= 1e-8 * want.frobenius_norm());
}

#[test]
fn solve_diag_example() {
    let k = SymMatrix::from_diag(&[2.0, 4.0]);
    let f = mka_factorize(&k, &MkaConfig::exact()).unwrap();
    let x = f.solve(&[2.0, 4.0]).unwrap();
    assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    assert!((f.logdet().unwrap() - 8f64.ln()).abs() < 1e-15);
}

#[test]
fn solve_matches_dense_cholesky() {
    for seed in 0..5 {
        let mut k = rbf_kernel(32, 40 + seed, 0.7);
        k.add_diag(0.1);
        let f = mka_factorize(&k, &cfg(0.5, 4, 8)).unwrap();
        let b = rand_vec(32, seed);
        let x = f.solve(&b).unwrap();
        let dense = f.reconstruct();
        let want = Cholesky::new(&dense).unwrap().solve_vec(&b).unwrap();
        let diff: Vec<f64> = x.iter().zip(&want).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) <= 1e-8 * norm(&want));
        let kx = f.apply(&x).unwrap();
        let res: Vec<f64> = kx.iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(norm(&res) <= 1e-8 * norm(&b));
    }
}

#[test]
fn logdet_matches_dense() {
    for seed in 0..5 {
        let mut k = rbf_kernel(32, 60 + seed, 0.7);
        k.add_diag(0.1);
        let f = mka_factorize(&k, &cfg(0.5, 4, 8)).unwrap();
        let want: f64 = sym_evd(&f.reconstruct()).unwrap().eigvals.iter().map(|l| l.ln()).sum();
        let got = f.logdet().unwrap();
        assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0));
    }
}

#[test]
fn singular_spectrum_is_reported() {
    let k = SymMatrix::from_diag(&[1.0, 0.0, 2.0]);
    let f = mka_factorize(&k, &MkaConfig::exact()).unwrap();
    assert!(matches!(f.solve(&[1.0, 1.0, 1.0]), Err(Error::Singular { .. })));
    assert!(matches!(f.logdet(), Err(Error::Singular { .. })));
    assert!(f.spectral(SpectralFn::Power(0.5)).is_ok());
    let neg = mka_factorize(&SymMatrix::from_diag(&[1.0, -1.0]), &MkaConfig::exact()).unwrap();
    assert!(neg.spectral(SpectralFn::Power(0.5)).is_err());
    assert!(neg.spectral(SpectralFn::Power(-1.0)).is_ok());
}

#[test]
fn storage_examples() {
    let f = mka_factorize(&SymMatrix::identity(4), &MkaConfig::exact()).unwrap();
    let r = f.storage();
    assert_eq!((r.total, r.bound), (16, 28));

    let k = random_spsd(8, 3);
    let f = mka_factorize(&k, &cfg(0.5, 4, 8)).unwrap();
    let r = f.storage();
    assert_eq!(r.stages, 1);
    assert_eq!(r.rotations, 4);
    assert_eq!((r.total, r.bound), (28, 40));

    let k = random_spsd(64, 3);
    let f = mka_factorize(&k, &cfg(0.5, 8, 8)).unwrap();
    let r = f.storage();
    assert_eq!(r.stages, 3);
    assert_eq!(r.rotations, 32 + 16 + 8);
    assert_eq!(r.total, 2 * 56 + 56 + 64);
    assert!(r.total <= r.bound && r.bound == 7 * 64 + 64);
}

#[test]
fn rejects_invalid_config() {
    let k = SymMatrix::identity(4);
    assert!(mka_factorize(&k, &cfg(0.0, 1, 2)).is_err());
    assert!(mka_factorize(&k, &cfg(0.5, 0, 2)).is_err());
    assert!(mka_factorize(&k, &cfg(0.5, 1, 0)).is_err());
    assert!(mka_factorize(&k, &cfg(1.0, 1, 2)).is_err());
    assert!(mka_factorize(&SymMatrix::zeros(0), &MkaConfig::default()).is_err());
}

#[test]
fn reports_stalled_stage() {
    // clusters of one column cannot rotate
    let k = rbf_kernel(6, 0, 1.0);
    assert!(matches!(
        mka_factorize(&k, &cfg(0.5, 1, 1)),
        Err(Error::NoProgress { stage: 1, .. })
    ));
}

#[test]
fn deterministic_for_seed() {
    let k = rbf_kernel(40, 9, 0.5);
    let a = mka_factorize(&k, &cfg(0.5, 4, 8)).unwrap();
    let b = mka_factorize(&k, &cfg(0.5, 4, 8)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn json_round_trip_is_bit_exact() {
    let f = mka_factorize(&rbf_kernel(30, 2, 0.5), &cfg(0.5, 4, 6)).unwrap();
    let json = f.to_json().unwrap();
    let back = MkaFactorization::from_json(&json).unwrap();
    assert_eq!(back, f);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["n"], 30);
    assert!(v["stages"][0]["per_cluster"][0]["rotations"][0].as_array().unwrap().len() == 4);
}

#[test]
fn json_rejects_inconsistent_documents() {
    let f = mka_factorize(&rbf_kernel(12, 2, 0.5), &cfg(0.5, 3, 4)).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&f.to_json().unwrap()).unwrap();
    v["core"].as_array_mut().unwrap().pop();
    assert!(MkaFactorization::from_json(&v.to_string()).is_err());
    let mut v: serde_json::Value = serde_json::from_str(&f.to_json().unwrap()).unwrap();
    v["stages"][0]["n_in"] = 11.into();
    assert!(MkaFactorization::from_json(&v.to_string()).is_err());
}
