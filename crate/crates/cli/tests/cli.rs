use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_coarsequant"));
    c.env_remove("COARSEQUANT_THREADS");
    c
}

fn write_config(dir: &Path, file: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(file);
    std::fs::write(&p, body).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const CURVED_JACOBI: &str = r#"{
    "name": "curved",
    "manifold": {"model": "torus", "n": 32, "metric": {"kind": "perturbed", "amplitude": 0.1}},
    "symbol": "dirac1d",
    "verb": "jacobi",
    "ladder": [{"grid_n": 32, "radius": 0.5}, {"grid_n": 64, "radius": 0.25}],
    "seed": 11
}"#;

#[test]
fn index_of_winding_one_is_minus_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("index.csv");
    let o = bin().args(["index", "--winding", "1", "--grid", "512", "--emit-csv"]).arg(&csv).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("grid_n,analytic,rounded,residual,topological"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "512");
    assert_eq!(row[2], "-1");
    assert_eq!(row[4], "-1");
}

#[test]
fn index_ladder_emits_one_row_per_level() {
    let o = bin().args(["index", "--symbol", "winding_-2", "--grid", "256", "--ladder-levels", "3"]).output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).filter(|l| l.starts_with(char::is_numeric)).collect();
    assert_eq!(rows.iter().map(|r| r.split(',').next().unwrap()).collect::<Vec<_>>(), ["64", "128", "256"]);
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("2")));
}

#[test]
fn jacobi_on_the_flat_torus_is_a_table_of_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "flat.json",
        r#"{"name": "flat", "manifold": {"model": "torus", "n": 16}, "symbol": "dirac1d", "verb": "jacobi",
            "ladder": [{"grid_n": 16, "radius": 0.5}, {"grid_n": 32, "radius": 0.5}], "seed": 3}"#,
    );
    let out = dir.path().join("out");
    let o = bin().arg("jacobi").arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("flat.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r.split(',').nth(3) == Some("0.0000000000e0")));
    assert!(out.join("flat.svg").exists());
}

#[test]
fn malformed_json_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{\"name\": \"x\", ");
    let o = bin().arg("run").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid config"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let coarsening = CURVED_JACOBI.replace(r#""grid_n": 64"#, r#""grid_n": 16"#);
    let cfg = write_config(dir.path(), "c.json", &coarsening);
    assert_eq!(code(&bin().arg("run").arg("--config").arg(&cfg).output().unwrap()), 2);
    let cfg = write_config(dir.path(), "ok.json", CURVED_JACOBI);
    assert_eq!(code(&bin().arg("quantize").arg("--config").arg(&cfg).output().unwrap()), 2);
    assert_eq!(code(&bin().arg("jacobi").output().unwrap()), 2);
    assert_eq!(code(&bin().args(["index", "--symbol", "no_such_symbol"]).output().unwrap()), 2);
}

#[test]
fn numerical_failures_exit_three() {
    let o = bin().args(["index", "--symbol", "constant:0", "--grid", "64"]).output().unwrap();
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "h.json",
        r#"{"name": "h", "manifold": {"model": "heis3", "n": 8}, "symbol": "dirac1d", "verb": "quantize",
            "ladder": [{"grid_n": 8, "radius": 0.5}], "seed": 1}"#,
    );
    assert_eq!(code(&bin().arg("run").arg("--config").arg(&cfg).output().unwrap()), 3);
}

#[test]
fn acceptance_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.json",
        r#"{"name": "r", "manifold": {"model": "circle", "n": 128}, "symbol": "dirac1d", "verb": "recover",
            "ladder": [{"grid_n": 128, "radius": 0.5}, {"grid_n": 256, "radius": 0.25}], "seed": 1}"#,
    );
    let o = bin().arg("run").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "j.json", CURVED_JACOBI);
    let run = |sub: &str, threads: Option<&str>| {
        let out = dir.path().join(sub);
        let mut c = bin();
        c.arg("run").arg("--config").arg(&cfg).arg("--out").arg(&out);
        if let Some(t) = threads {
            c.env("COARSEQUANT_THREADS", t);
        }
        assert_eq!(code(&c.output().unwrap()), 0);
        (std::fs::read(out.join("curved.csv")).unwrap(), std::fs::read(out.join("curved.svg")).unwrap())
    };
    let a = run("a", None);
    let b = run("b", Some("1"));
    let c = run("c", Some("3"));
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(!a.0.contains(&b'\r'));
    let other = dir.path().join("d");
    let o = bin().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&other).args(["--seed", "12"]).output().unwrap();
    assert_eq!(code(&o), 0);
    assert_ne!(std::fs::read(other.join("curved.csv")).unwrap(), a.0);
}

#[test]
fn configured_output_paths_are_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let body = CURVED_JACOBI.replace(r#""seed": 11"#, r#""seed": 11, "outputs": {"csv": "tables/j.csv", "svg": "plots/j.svg"}"#);
    let cfg = write_config(dir.path(), "j.json", &body);
    let o = bin().arg("run").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("tables/j.csv").exists());
    assert!(dir.path().join("plots/j.svg").exists());
}

#[test]
fn suite_runs_a_single_criterion() {
    let o = bin().args(["suite", "--criterion", "12"]).output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("criterion 12 PASS"));
    assert_eq!(code(&bin().args(["suite", "--criterion", "99"]).output().unwrap()), 2);
}
