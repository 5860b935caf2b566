use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sphere-descent"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn note(csv: &str, key: &str) -> String {
    let prefix = format!("# {key}=");
    csv.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("missing note {key}"))
        .to_string()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn critical_probe_lists_all_points() {
    let out = run(&["probe-critical", "--n", "3"]);
    assert!(out.status.success());
    let csv = stdout(&out);
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, 26);
    assert_eq!(note(&csv, "minimizer"), "6");
    assert_eq!(note(&csv, "saddle"), "12");
    assert_eq!(note(&csv, "maximizer"), "8");
}

#[test]
fn volume_probe_matches_symmetry() {
    let out = run(&["probe-volume", "--n", "3", "--zeta", "0", "--samples", "1000000"]);
    assert!(out.status.success());
    let csv = stdout(&out);
    let row: Vec<f64> = csv
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    assert!((row[2] - 1.0 / 6.0).abs() <= 3.0 * row[3], "{row:?}");
}

#[test]
fn pr_identity_probe_is_exact() {
    let out = run(&["probe-pr-identities", "--n", "4", "--steps", "1000"]);
    assert!(out.status.success());
    let max: f64 = note(&stdout(&out), "max_relative_deviation").parse().unwrap();
    assert!(max <= 1e-10, "{max}");
}

#[test]
fn repeated_batches_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sep.toml",
        "n = 6\nnum_seeds = 4\nseed_base = 9\nzeta0 = 0.1\n",
    );
    let dirs: Vec<_> = [("a", "1"), ("b", "1"), ("c", "2")]
        .iter()
        .map(|(name, jobs)| {
            let out = tmp.path().join(name);
            let status = run(&[
                "run-sep",
                "--config",
                &cfg,
                "--out",
                out.to_str().unwrap(),
                "--jobs",
                jobs,
                "--save-traces",
                "--check",
            ]);
            assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
            out
        })
        .collect();
    for file in ["summary.json", "traces/seed_9.csv", "traces/seed_12.csv"] {
        let a = fs::read(dirs[0].join(file)).unwrap();
        assert_eq!(a, fs::read(dirs[1].join(file)).unwrap(), "{file}");
        assert_eq!(a, fs::read(dirs[2].join(file)).unwrap(), "{file}");
    }
    let trace = fs::read_to_string(dirs[0].join("traces/seed_9.csv")).unwrap();
    assert!(trace.starts_with("# config_hash="));
    assert!(trace.contains("\n# seed_base=9\n"));
}

#[test]
fn seed_flag_overrides_seed_base() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "pr.toml", "n = 3\nnum_seeds = 2\n");
    let out = tmp.path().join("out");
    let status = run(&[
        "run-pr",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "77",
    ]);
    assert!(status.status.success());
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"seed_base\": 77"));
    assert!(summary.contains("\"seed\": 78"));
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    let typo = write_config(tmp.path(), "typo.toml", "n = 6\nnum_seed = 4\n");
    assert_eq!(
        run(&["run-sep", "--config", &typo, "--out", out]).status.code(),
        Some(1)
    );
    let wrong = write_config(tmp.path(), "wrong.toml", "problem = \"dictionary\"\nn = 6\n");
    assert_eq!(
        run(&["run-sep", "--config", &wrong, "--out", out]).status.code(),
        Some(1)
    );
    let missing = write_config(tmp.path(), "dl.toml", "n = 6\ntheta = 0.2\n");
    assert_eq!(
        run(&["run-dl", "--config", &missing, "--out", out]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["probe-volume"]).status.code(), Some(1));
}

#[test]
fn failed_gate_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "dl.toml",
        "n = 6\np = 200\ntheta = 0.25\nmax_iters = 1\nnum_seeds = 3\n",
    );
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(run(&["run-dl", "--config", &cfg, "--out", out]).status.code(), Some(0));
    assert_eq!(
        run(&["run-dl", "--config", &cfg, "--out", out, "--check"])
            .status
            .code(),
        Some(3)
    );
}
