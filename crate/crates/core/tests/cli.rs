use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mka(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mka"))
        .args(args)
        .current_dir(dir)
        .env_remove("MKA_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn toy_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = mka(&["toy", "--n", "200", "--lengthscale", "0.5", "--noise", "0.1", "--seed", "1", "--out", "t.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("seed: 1"));
    assert_eq!(fs::read_to_string(dir.path().join("t.csv")).unwrap().lines().count(), 200);
}

#[test]
fn missing_required_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mka(&["compress"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--input"));
    assert!(stderr(&o).to_lowercase().contains("usage"));
}

#[test]
fn unknown_flags_and_bad_values_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mka(&["toy", "--n", "5", "--lengthscale", "1", "--noise", "0", "--out", "x.csv", "--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(mka(&["toy", "--n", "5", "--lengthscale", "-1", "--noise", "0", "--out", "x.csv"], dir.path()).status.code(), Some(1));
    assert_eq!(mka(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(mka(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn compress_prints_storage_and_serializes() {
    let dir = tempfile::tempdir().unwrap();
    let n = 16;
    let rows: Vec<String> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = i as f64 - j as f64;
                    (-d * d / 8.0).exp().to_string()
                })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    fs::write(dir.path().join("k.csv"), rows.join("\n")).unwrap();
    let o = mka(
        &["compress", "--input", "k.csv", "--gamma", "0.5", "--d-core", "4", "--m-max", "8", "--out", "f.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let field = |name: &str| -> usize {
        out.lines()
            .find_map(|l| l.strip_prefix(&format!("{name}: ")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert_eq!(field("n"), 16);
    assert!(field("total") <= field("bound"));
    assert!(stderr(&o).contains("seed: 0"));
    let f = mka::MkaFactorization::load(dir.path().join("f.json")).unwrap();
    assert_eq!(f.n(), 16);
    assert_eq!(f.d_core(), field("d_core"));
}

#[test]
fn compress_runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = mka(&["compress", "--input", "absent.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.csv"));

    fs::write(dir.path().join("a.csv"), "1,2\n3,4\n").unwrap();
    let o = mka(&["compress", "--input", "a.csv", "--d-core", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn gp_writes_predictions_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(mka(&["toy", "--n", "60", "--lengthscale", "0.5", "--noise", "0.01", "--seed", "2", "--out", "all.csv"], p).status.code(), Some(0));
    let all = fs::read_to_string(p.join("all.csv")).unwrap();
    let lines: Vec<&str> = all.lines().collect();
    let test: Vec<&str> = lines.iter().step_by(6).copied().collect();
    let train: Vec<&str> = lines.iter().enumerate().filter(|(i, _)| i % 6 != 0).map(|(_, l)| *l).collect();
    fs::write(p.join("train.csv"), train.join("\n")).unwrap();
    fs::write(p.join("test.csv"), test.join("\n")).unwrap();
    let inputs: Vec<&str> = test.iter().map(|l| l.split(',').next().unwrap()).collect();
    fs::write(p.join("inputs.csv"), inputs.join("\n")).unwrap();

    for method in ["full", "sor", "mka"] {
        let o = mka(
            &["gp", "--train", "train.csv", "--test", "test.csv", "--method", method, "--lengthscale", "0.5", "--noise", "0.01", "--d-core", "8", "--m-max", "8", "--out", "pred.csv"],
            p,
        );
        assert_eq!(o.status.code(), Some(0), "{method}: {}", stderr(&o));
        assert!(stdout(&o).contains("smse: "));
        let pred = fs::read_to_string(p.join("pred.csv")).unwrap();
        assert_eq!(pred.lines().next().unwrap(), "mean,variance");
        assert_eq!(pred.lines().count(), 11);
    }

    let o = mka(&["gp", "--train", "train.csv", "--test", "inputs.csv", "--method", "full", "--lengthscale", "0.5", "--noise", "0.01", "--out", "pred.csv"], p);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!stdout(&o).contains("smse"));
}

fn write_bench_config(dir: &Path) {
    fs::write(
        dir.join("c.json"),
        r#"{
            "toy": {"n": 50, "lengthscale": 0.5, "noise": 0.05},
            "methods": ["full", "sor", "mka"],
            "d_core_list": [4, 8],
            "m_max": 8,
            "lengthscale_grid": [0.25, 0.5],
            "noise_grid": [0.01, 0.1],
            "seed": 5
        }"#,
    )
    .unwrap();
}

fn strip_wall_ms(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .map(|l| {
            let mut cells: Vec<String> = l.split(',').map(String::from).collect();
            cells.remove(6);
            cells
        })
        .collect()
}

#[test]
fn bench_is_reproducible_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    write_bench_config(dir.path());
    let run = |out: &str| {
        let o = mka(&["bench", "--config", "c.json", "--out-dir", out], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stderr(&o).contains("seed: 5"));
        fs::read_to_string(dir.path().join(out).join("bench_report.csv")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a.lines().count(), 6);
    assert_eq!(strip_wall_ms(&a), strip_wall_ms(&b));
    assert!(dir.path().join("a/bench_report.json").exists());
    assert!(dir.path().join("a/bench_plot.csv").exists());
}

#[test]
fn bench_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    write_bench_config(dir.path());
    let o = mka(&["bench", "--config", "c.json", "--methods", "sor", "--d-core-list", "3,6,9", "--seed", "8"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("seed: 8"));
    let csv = fs::read_to_string(dir.path().join("bench_report.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.starts_with("sor,") && r.ends_with(",8,")));

    let bad = mka(&["bench", "--config", "c.json", "--cv-folds", "1"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    let bad = mka(&["bench", "--config", "c.json", "--methods", "fitc"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn threads_flag_and_env_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--threads", "2", "toy", "--n", "10", "--lengthscale", "1", "--noise", "0.1", "--out", "a.csv"];
    assert_eq!(mka(&args, dir.path()).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_mka"))
        .args(["toy", "--n", "10", "--lengthscale", "1", "--noise", "0.1", "--out", "b.csv"])
        .env("MKA_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b.csv")).unwrap());
}
