//! Dataset handling and the SMSE/MNLP benchmark sweep over predictors and
//! core sizes.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{
    full_gp_predict, kernel_sym, mka_gp_predict, mnlp, select_landmarks, smse, sor_predict, Dataset,
    GpHyper, PredictionResult,
};
use crate::linalg::{parse_cell, Cholesky, Matrix};
use crate::mka::MkaConfig;

/// Interval on which toy inputs are placed.
pub const TOY_DOMAIN: [f64; 2] = [0.0, 6.0];

/// Reads a numeric CSV into a matrix. A first line that does not parse as
/// numbers is treated as a header and skipped.
pub fn load_table(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: Result<Vec<f64>> = record
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(path, r + 1, c + 1, cell))
            .collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if r == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Error::invalid(format!("{} has no data rows", path.display())));
    }
    Matrix::from_rows(&rows)
}

/// Reads a dataset whose last column is the target (see [`load_table`]).
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let t = load_table(path)?;
    if t.cols() < 2 {
        return Err(Error::invalid(format!(
            "{} needs at least two columns (inputs and target), found {}",
            path.display(),
            t.cols()
        )));
    }
    let d = t.cols() - 1;
    Dataset::new(t.select_cols(&(0..d).collect::<Vec<_>>()), t.column(d))
}

/// Writes inputs then target, one point per line, no header.
pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for i in 0..ds.len() {
        let mut cells: Vec<String> = ds.x().row(i).iter().map(f64::to_string).collect();
        cells.push(ds.y()[i].to_string());
        writeln!(out, "{}", cells.join(",")).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Per-column means and population variances recorded by [`normalize`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub x_mean: Vec<f64>,
    pub x_var: Vec<f64>,
    pub y_mean: f64,
    pub y_var: f64,
}

fn mean_var(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let var = v.map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

fn standardize(x: f64, mean: f64, var: f64) -> f64 {
    if var > 0.0 {
        (x - mean) / var.sqrt()
    } else {
        0.0
    }
}

impl NormStats {
    /// Maps normalized targets back to the original scale.
    pub fn unscale_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| v * self.y_var.sqrt() + self.y_mean).collect()
    }

    /// Inverse of the normalization. Constant columns come back as their mean.
    pub fn invert(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.dim() != self.x_mean.len() {
            return Err(Error::dim(format!(
                "statistics cover {} columns, dataset has {}",
                self.x_mean.len(),
                ds.dim()
            )));
        }
        let x = Matrix::from_fn(ds.len(), ds.dim(), |i, j| {
            ds.x()[(i, j)] * self.x_var[j].sqrt() + self.x_mean[j]
        });
        Dataset::new(x, self.unscale_y(ds.y()))
    }
}

/// Shifts and scales every input column and the target to mean 0 and
/// population variance 1. Constant columns become all zeros.
pub fn normalize(ds: &Dataset) -> Result<(Dataset, NormStats)> {
    if ds.len() < 2 {
        return Err(Error::invalid("normalization needs at least two points"));
    }
    let (n, d) = (ds.len(), ds.dim());
    let (x_mean, x_var): (Vec<f64>, Vec<f64>) =
        (0..d).map(|j| mean_var((0..n).map(|i| ds.x()[(i, j)]))).unzip();
    let (y_mean, y_var) = mean_var(ds.y().iter().copied());
    let x = Matrix::from_fn(n, d, |i, j| standardize(ds.x()[(i, j)], x_mean[j], x_var[j]));
    let y = ds.y().iter().map(|&v| standardize(v, y_mean, y_var)).collect();
    Ok((
        Dataset::new(x, y)?,
        NormStats {
            x_mean,
            x_var,
            y_mean,
            y_var,
        },
    ))
}

/// Test set of `round(fraction·n)` points (at least one, at most `n-1`)
/// drawn uniformly; both parts keep the original row order.
pub fn split_train_test(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = ds.len();
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("test fraction must be in (0, 1), got {fraction}")));
    }
    if n < 2 {
        return Err(Error::invalid("splitting needs at least two points"));
    }
    let t = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, t) {
        in_test[i] = true;
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_test[i]);
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}

/// Shuffled `0..n` cut into `folds` contiguous parts whose sizes differ by
/// at most one; each part is sorted.
pub fn fold_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || folds > n {
        return Err(Error::invalid(format!(
            "cannot cut {n} points into {folds} folds"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = n / folds + usize::from(f < n % folds);
        let mut fold = perm[start..start + size].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += size;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Full,
    Sor,
    Mka,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Sor => "sor",
            Method::Mka => "mka",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Method::Full),
            "sor" => Ok(Method::Sor),
            "mka" => Ok(Method::Mka),
            _ => Err(Error::invalid(format!("unknown method {s:?} (expected full, sor or mka)"))),
        }
    }
}

/// A predictor with everything except the kernel hyperparameters fixed.
/// `d_core` is the landmark count for SOR and the core target for MKA.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Predictor {
    pub method: Method,
    pub d_core: usize,
    pub gamma: f64,
    pub m_max: usize,
    pub seed: u64,
}

impl Predictor {
    pub fn full() -> Self {
        Predictor {
            method: Method::Full,
            d_core: 0,
            gamma: 0.5,
            m_max: MkaConfig::default().m_max,
            seed: 0,
        }
    }

    pub fn mka_config(&self) -> MkaConfig {
        MkaConfig {
            gamma: self.gamma,
            d_core_target: self.d_core,
            m_max: self.m_max,
            rng_seed: self.seed,
            ..MkaConfig::default()
        }
    }

    pub fn predict(&self, train: &Dataset, test_x: &Matrix, hyper: &GpHyper) -> Result<PredictionResult> {
        match self.method {
            Method::Full => full_gp_predict(train, test_x, hyper),
            Method::Sor => {
                let landmarks = select_landmarks(train.len(), self.d_core, self.seed);
                sor_predict(train, test_x, &landmarks, hyper)
            }
            Method::Mka => mka_gp_predict(train, test_x, hyper, &self.mka_config()),
        }
    }
}

/// Candidate hyperparameters, searched as lengthscale-major pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub lengthscales: Vec<f64>,
    pub noises: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            lengthscales: vec![0.1, 0.25, 0.5, 1.0, 2.0, 4.0],
            noises: vec![0.01, 0.1, 0.5, 1.0],
        }
    }
}

impl HyperGrid {
    pub fn single(h: GpHyper) -> Self {
        HyperGrid {
            lengthscales: vec![h.lengthscale],
            noises: vec![h.noise],
        }
    }

    pub fn points(&self) -> Result<Vec<GpHyper>> {
        if self.lengthscales.is_empty() || self.noises.is_empty() {
            return Err(Error::invalid("hyperparameter grids must be nonempty"));
        }
        self.lengthscales
            .iter()
            .flat_map(|&l| self.noises.iter().map(move |&s| GpHyper::new(l, s)))
            .collect()
    }
}

fn fold_scores(train: &Dataset, folds: &[Vec<usize>], pred: &Predictor, h: &GpHyper) -> Result<(f64, f64)> {
    let n = train.len();
    let scores = folds
        .par_iter()
        .map(|held| {
            let mut out = vec![false; n];
            held.iter().for_each(|&i| out[i] = true);
            let keep: Vec<usize> = (0..n).filter(|&i| !out[i]).collect();
            let fit = train.subset(&keep)?;
            let val = train.subset(held)?;
            let p = pred.predict(&fit, val.x(), h)?;
            // an undefined MNLP (non-positive variance) only loses tie-breaks
            let m = mnlp(&p, val.y()).unwrap_or(f64::INFINITY);
            Ok((smse(&p.mean, val.y())?, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = scores.len() as f64;
    let s = scores.iter().map(|x| x.0).sum::<f64>() / k;
    let m = scores.iter().map(|x| x.1).sum::<f64>() / k;
    if s.is_finite() {
        Ok((s, m))
    } else {
        Err(Error::invalid(format!("non-finite mean fold SMSE {s}")))
    }
}

/// Grid point with the lowest mean held-out SMSE, MNLP breaking ties and
/// grid order breaking those. Points whose folds fail are skipped.
pub fn cross_validate(
    train: &Dataset,
    pred: &Predictor,
    grid: &HyperGrid,
    folds: usize,
    seed: u64,
) -> Result<GpHyper> {
    let points = grid.points()?;
    let parts = fold_indices(train.len(), folds, seed)?;
    let scored: Vec<Result<(f64, f64)>> = points
        .par_iter()
        .map(|h| fold_scores(train, &parts, pred, h))
        .collect();

    let mut best: Option<(usize, f64, f64)> = None;
    let mut last_err = None;
    for (k, r) in scored.into_iter().enumerate() {
        match r {
            Ok((s, m)) => {
                if best.is_none_or(|(_, bs, bm)| s < bs || (s == bs && m < bm)) {
                    best = Some((k, s, m));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some((k, _, _)), _) => Ok(points[k]),
        (None, Some(e)) => Err(Error::invalid(format!("every grid point failed; last error: {e}"))),
        (None, None) => unreachable!("grid is nonempty"),
    }
}

/// `n` equally spaced inputs on [`TOY_DOMAIN`] with targets drawn from the
/// GP prior plus observation noise of variance `hyper.noise`.
pub fn toy_generate(n: usize, hyper: &GpHyper, seed: u64) -> Result<Dataset> {
    hyper.validate()?;
    if n < 2 {
        return Err(Error::invalid("toy data needs at least two points"));
    }
    let [lo, hi] = TOY_DOMAIN;
    let x = Matrix::from_fn(n, 1, |i, _| lo + (hi - lo) * i as f64 / (n - 1) as f64);
    let mut k = kernel_sym(&x, hyper);
    k.add_diag(1e-10);
    let chol = Cholesky::new(&k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let f = chol.lower_mul_vec(&z)?;
    let sd = hyper.noise.sqrt();
    let y = f
        .iter()
        .map(|v| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + sd * e
        })
        .collect();
    Dataset::new(x, y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySpec {
    pub n: usize,
    pub lengthscale: f64,
    pub noise: f64,
    #[serde(default = "toy_domain")]
    pub domain: [f64; 2],
}

fn toy_domain() -> [f64; 2] {
    TOY_DOMAIN
}

/// Benchmark design. Either `dataset` or `toy` names the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub dataset: Option<PathBuf>,
    pub toy: Option<ToySpec>,
    pub methods: Vec<Method>,
    pub d_core_list: Vec<usize>,
    pub gamma: f64,
    pub m_max: usize,
    pub cv_folds: usize,
    pub lengthscale_grid: Vec<f64>,
    pub noise_grid: Vec<f64>,
    pub test_fraction: f64,
    pub seed: u64,
    pub normalize: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let grid = HyperGrid::default();
        BenchConfig {
            dataset: None,
            toy: None,
            methods: vec![Method::Full, Method::Sor, Method::Mka],
            d_core_list: vec![10],
            gamma: 0.5,
            m_max: MkaConfig::default().m_max,
            cv_folds: 5,
            lengthscale_grid: grid.lengthscales,
            noise_grid: grid.noises,
            test_fraction: 0.1,
            seed: 0,
            normalize: true,
        }
    }
}

impl BenchConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BenchConfig::from_json(&s)
    }

    pub fn grid(&self) -> HyperGrid {
        HyperGrid {
            lengthscales: self.lengthscale_grid.clone(),
            noises: self.noise_grid.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset, &self.toy) {
            (Some(_), Some(_)) => return Err(Error::invalid("give either a dataset path or a toy spec, not both")),
            (None, None) => return Err(Error::invalid("a dataset path or a toy spec is required")),
            (None, Some(t)) if t.domain != TOY_DOMAIN => {
                return Err(Error::invalid(format!(
                    "toy domain is fixed at {TOY_DOMAIN:?}, got {:?}",
                    t.domain
                )))
            }
            _ => {}
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("at least one method is required"));
        }
        let needs_dcore = self.methods.iter().any(|&m| m != Method::Full);
        if needs_dcore && self.d_core_list.is_empty() {
            return Err(Error::invalid("d_core_list must be nonempty for sor and mka"));
        }
        if self.d_core_list.contains(&0) {
            return Err(Error::invalid("d_core values must be positive"));
        }
        if self.cv_folds < 2 {
            return Err(Error::invalid(format!("cv_folds must be at least 2, got {}", self.cv_folds)));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        self.grid().points()?;
        MkaConfig {
            gamma: self.gamma,
            m_max: self.m_max,
            d_core_target: 1,
            ..MkaConfig::default()
        }
        .validate()
    }

    /// The (method, d_core) design in report order; `None` for full.
    pub fn design(&self) -> Vec<(Method, Option<usize>)> {
        let mut out = Vec::new();
        for &m in &self.methods {
            if m == Method::Full {
                out.push((m, None));
            } else {
                out.extend(self.d_core_list.iter().map(|&d| (m, Some(d))));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub d_core: usize,
    pub lengthscale: Option<f64>,
    pub noise: Option<f64>,
    pub smse: Option<f64>,
    pub mnlp: Option<f64>,
    pub wall_ms: f64,
    pub seed: u64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl BenchReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Same columns as the JSON rows; missing values are empty cells.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["method", "d_core", "lengthscale", "noise", "smse", "mnlp", "wall_ms", "seed", "error"])?;
        for r in &self.rows {
            w.write_record([
                r.method.name().to_string(),
                r.d_core.to_string(),
                opt_cell(r.lengthscale),
                opt_cell(r.noise),
                opt_cell(r.smse),
                opt_cell(r.mnlp),
                r.wall_ms.to_string(),
                r.seed.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))
    }

    /// Metric-versus-d_core curve data, one row per (method, d_core).
    pub fn write_plot_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["method", "d_core", "smse", "mnlp"])?;
        for r in &self.rows {
            w.write_record([
                r.method.name().to_string(),
                r.d_core.to_string(),
                opt_cell(r.smse),
                opt_cell(r.mnlp),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))
    }
}

fn bench_data(cfg: &BenchConfig) -> Result<Dataset> {
    let ds = match (&cfg.dataset, &cfg.toy) {
        (Some(p), _) => load_dataset(p)?,
        (None, Some(t)) => toy_generate(t.n, &GpHyper::new(t.lengthscale, t.noise)?, cfg.seed)?,
        (None, None) => unreachable!("validated"),
    };
    if cfg.normalize {
        Ok(normalize(&ds)?.0)
    } else {
        Ok(ds)
    }
}

struct RowOutcome {
    hyper: GpHyper,
    smse: f64,
    mnlp: Result<f64>,
}

fn run_row(train: &Dataset, test: &Dataset, pred: &Predictor, cfg: &BenchConfig) -> Result<RowOutcome> {
    let hyper = cross_validate(train, pred, &cfg.grid(), cfg.cv_folds, cfg.seed)?;
    let p = pred.predict(train, test.x(), &hyper)?;
    Ok(RowOutcome {
        hyper,
        smse: smse(&p.mean, test.y())?,
        mnlp: mnlp(&p, test.y()),
    })
}

/// Splits the data, tunes each predictor by cross-validation on the
/// training part and scores it on the test part. A failing row records its
/// error and the sweep continues.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let ds = bench_data(cfg)?;
    let (train, test) = split_train_test(&ds, cfg.test_fraction, cfg.seed)?;

    let rows = cfg
        .design()
        .into_iter()
        .map(|(method, d_core)| {
            let pred = Predictor {
                method,
                d_core: d_core.unwrap_or(train.len()),
                gamma: cfg.gamma,
                m_max: cfg.m_max,
                seed: cfg.seed,
            };
            let start = Instant::now();
            let outcome = run_row(&train, &test, &pred, cfg);
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let mut row = BenchRow {
                method,
                d_core: pred.d_core,
                lengthscale: None,
                noise: None,
                smse: None,
                mnlp: None,
                wall_ms,
                seed: cfg.seed,
                error: None,
            };
            match outcome {
                Ok(out) => {
                    row.lengthscale = Some(out.hyper.lengthscale);
                    row.noise = Some(out.hyper.noise);
                    row.smse = Some(out.smse);
                    match out.mnlp {
                        Ok(m) => row.mnlp = Some(m),
                        Err(e) => row.error = Some(e.to_string()),
                    }
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    Ok(BenchReport { rows })
}
