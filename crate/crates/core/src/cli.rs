//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
//! or numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{
    load_dataset, load_table, run_benchmark, toy_generate, write_dataset, BenchConfig, Method, Predictor,
};
use crate::error::Error;
use crate::gp::{mnlp_with, smse, GpHyper, MnlpVariance};
use crate::linalg::{read_matrix_csv, SymMatrix};
use crate::mka::{mka_factorize, MkaConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "mka", version, about = "Multiresolution kernel approximation and GP regression")]
struct Cli {
    /// Worker threads (0 = one per core). Falls back to MKA_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Factorize a kernel matrix and print its storage report.
    Compress(CompressArgs),
    /// Predict at test inputs with a full, SOR or MKA Gaussian process.
    Gp(GpArgs),
    /// Sample a 1-d toy dataset from a GP prior.
    Toy(ToyArgs),
    /// Run a benchmark sweep described by a JSON config.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct CompressArgs {
    /// Symmetric matrix as headerless CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long = "d-core", default_value_t = 16)]
    d_core: usize,
    #[arg(long = "m-max", default_value_t = 32)]
    m_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "stage-cap", default_value_t = 64)]
    stage_cap: usize,
    /// Write the factorization as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliMethod {
    Full,
    Sor,
    Mka,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliMnlp {
    Predictive,
    TestOutputs,
}

#[derive(Args, Debug)]
struct GpArgs {
    /// Training CSV, last column is the target.
    #[arg(long)]
    train: PathBuf,
    /// Test CSV with the same input columns, optionally followed by targets.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum)]
    method: CliMethod,
    #[arg(long)]
    lengthscale: f64,
    /// Observation noise variance.
    #[arg(long)]
    noise: f64,
    /// Landmarks for sor, core size target for mka.
    #[arg(long = "d-core", default_value_t = 10)]
    d_core: usize,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long = "m-max", default_value_t = 32)]
    m_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "mnlp-variance", value_enum, default_value = "predictive")]
    mnlp_variance: CliMnlp,
    /// Predictions CSV (mean, variance).
    #[arg(long, default_value = "predictions.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ToyArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    lengthscale: f64,
    #[arg(long)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// JSON file with BenchConfig fields; flags below override it.
    #[arg(long)]
    config: PathBuf,
    /// Directory for bench_report.json, bench_report.csv and bench_plot.csv.
    #[arg(long = "out-dir", default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long = "m-max")]
    m_max: Option<usize>,
    #[arg(long = "cv-folds")]
    cv_folds: Option<usize>,
    #[arg(long = "test-fraction")]
    test_fraction: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long = "d-core-list", value_delimiter = ',')]
    d_core_list: Option<Vec<usize>>,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

type CliResult = std::result::Result<(), Failure>;

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };

    let threads = match cli.threads {
        Some(t) => t,
        None => match std::env::var("MKA_THREADS") {
            Ok(v) => match v.trim().parse() {
                Ok(t) => t,
                Err(_) => {
                    eprintln!("error: MKA_THREADS must be a non-negative integer, got {v:?}");
                    return EXIT_USAGE;
                }
            },
            Err(_) => 0,
        },
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return EXIT_FAILURE;
        }
    };

    match pool.install(|| dispatch(cli.cmd)) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Compress(a) => compress(a),
        Command::Gp(a) => gp(a),
        Command::Toy(a) => toy(a),
        Command::Bench(a) => bench(a),
    }
}

fn echo_seed(seed: u64) {
    eprintln!("seed: {seed}");
}

fn compress(a: CompressArgs) -> CliResult {
    echo_seed(a.seed);
    let cfg = MkaConfig {
        gamma: a.gamma,
        d_core_target: a.d_core,
        m_max: a.m_max,
        rng_seed: a.seed,
        stage_cap: a.stage_cap,
    };
    cfg.validate().map_err(usage)?;
    let k = SymMatrix::from_dense(&read_matrix_csv(&a.input)?, 1e-10)?;
    let f = mka_factorize(&k, &cfg)?;
    let r = f.storage();
    println!("stages: {}", r.stages);
    println!("n: {}", r.n);
    println!("d_core: {}", r.d_core);
    println!("rotations: {}", r.rotations);
    println!("rotation_values: {}", r.rotation_values);
    println!("d_values: {}", r.d_values);
    println!("core_values: {}", r.core_values);
    println!("total: {}", r.total);
    println!("bound: {}", r.bound);
    if let Some(out) = &a.out {
        f.save(out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn gp(a: GpArgs) -> CliResult {
    echo_seed(a.seed);
    let hyper = GpHyper::new(a.lengthscale, a.noise).map_err(usage)?;
    let pred = Predictor {
        method: match a.method {
            CliMethod::Full => Method::Full,
            CliMethod::Sor => Method::Sor,
            CliMethod::Mka => Method::Mka,
        },
        d_core: a.d_core,
        gamma: a.gamma,
        m_max: a.m_max,
        seed: a.seed,
    };
    if pred.method == Method::Mka {
        pred.mka_config().validate().map_err(usage)?;
    }

    let train = load_dataset(&a.train)?;
    let table = load_table(&a.test)?;
    let d = train.dim();
    let (test_x, test_y) = if table.cols() == d {
        (table, None)
    } else if table.cols() == d + 1 {
        (table.select_cols(&(0..d).collect::<Vec<_>>()), Some(table.column(d)))
    } else {
        return Err(Failure::Runtime(Error::Dimension(format!(
            "test file has {} columns; expected {d} inputs, optionally plus a target",
            table.cols()
        ))));
    };

    let p = pred.predict(&train, &test_x, &hyper)?;
    write_predictions(&a.out, &p.mean, &p.variance)?;
    println!("wrote {} predictions to {}", p.mean.len(), a.out.display());
    if let Some(y) = test_y {
        let which = match a.mnlp_variance {
            CliMnlp::Predictive => MnlpVariance::Predictive,
            CliMnlp::TestOutputs => MnlpVariance::TestOutputs,
        };
        println!("smse: {}", smse(&p.mean, &y)?);
        match mnlp_with(&p, &y, which) {
            Ok(m) => println!("mnlp: {m}"),
            Err(e) => println!("mnlp: undefined ({e})"),
        }
    }
    Ok(())
}

fn write_predictions(path: &Path, mean: &[f64], var: &[f64]) -> crate::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["mean", "variance"])?;
    for (m, v) in mean.iter().zip(var) {
        w.write_record([m.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn toy(a: ToyArgs) -> CliResult {
    echo_seed(a.seed);
    if a.n < 2 {
        return Err(Failure::Usage(format!("--n must be at least 2, got {}", a.n)));
    }
    let hyper = GpHyper::new(a.lengthscale, a.noise).map_err(usage)?;
    let ds = toy_generate(a.n, &hyper, a.seed)?;
    write_dataset(&a.out, &ds)?;
    println!("wrote {} points to {}", ds.len(), a.out.display());
    Ok(())
}

fn bench(a: BenchArgs) -> CliResult {
    let mut cfg = BenchConfig::load(&a.config).map_err(|e| match e {
        Error::Io { .. } => Failure::Runtime(e),
        e => usage(e),
    })?;
    if let Some(ds) = &cfg.dataset {
        if ds.is_relative() {
            let base = a.config.parent().unwrap_or(Path::new(""));
            cfg.dataset = Some(base.join(ds));
        }
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(g) = a.gamma {
        cfg.gamma = g;
    }
    if let Some(m) = a.m_max {
        cfg.m_max = m;
    }
    if let Some(f) = a.cv_folds {
        cfg.cv_folds = f;
    }
    if let Some(t) = a.test_fraction {
        cfg.test_fraction = t;
    }
    if let Some(ms) = &a.methods {
        cfg.methods = ms.iter().map(|m| m.parse()).collect::<crate::Result<_>>().map_err(usage)?;
    }
    if let Some(d) = a.d_core_list {
        cfg.d_core_list = d;
    }
    echo_seed(cfg.seed);
    cfg.validate().map_err(usage)?;

    let report = run_benchmark(&cfg)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    report.write_json(a.out_dir.join("bench_report.json"))?;
    report.write_csv(a.out_dir.join("bench_report.csv"))?;
    report.write_plot_csv(a.out_dir.join("bench_plot.csv"))?;

    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{:<6} {:>7} {:>12} {:>12} {:>10}", "method", "d_core", "smse", "mnlp", "wall_ms");
    for r in &report.rows {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        let _ = writeln!(
            out,
            "{:<6} {:>7} {:>12} {:>12} {:>10.1}{}",
            r.method.name(),
            r.d_core,
            f(r.smse),
            f(r.mnlp),
            r.wall_ms,
            r.error.as_deref().map(|e| format!("  error: {e}")).unwrap_or_default()
        );
    }
    Ok(())
}
