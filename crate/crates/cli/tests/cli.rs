use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
reps = 40
n_grid = [24, 48, 96]
master_seed = 5
[d_rule]
kind = "fixed"
d = 2
[model]
kind = "gaussian_location"
theta = "unit"
[functional]
kind = "smooth_sqrt"
[estimator]
m = 2
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_splitfun"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", CONFIG);
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env_remove("SPLITFUN_SEED")
        .env_remove("SPLITFUN_OUT")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("# splitfun-csv v1\n"));
    assert_eq!(csv.lines().count(), 2 + 9);
    assert!(out.join("results.csv.summary.txt").exists());
    assert!(String::from_utf8_lossy(&status.stdout).contains("slope="));
}

#[test]
fn seed_from_environment_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", CONFIG);
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let st = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .env("SPLITFUN_SEED", seed)
            .env("SPLITFUN_OUT", &out)
            .status()
            .unwrap();
        assert!(st.success());
        std::fs::read(out.join("results.csv")).unwrap()
    };
    let a = run("1", "a");
    let b = run("1", "b");
    let c = run("2", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", &CONFIG.replace("[24, 48, 96]", "[3]").replace("m = 2", "m = 3"));
    let out = bin().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("n_grid") && err.contains("minimum n"), "{err}");

    let missing = bin().args(["run", "--config", "/nonexistent/x.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn failing_cells_exit_with_three() {
    // A cubic of a mean near 1e120 overflows in every replication.
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG
        .replace("kind = \"smooth_sqrt\"", "kind = \"monomial\"\ndegree = 3")
        .replace("theta = \"unit\"", "theta = 1e120");
    let cfg = write(dir.path(), "overflow.toml", &text);
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_and_diag() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "first.toml", CONFIG);
    let b = write(dir.path(), "second.toml", &CONFIG.replace("smooth_sqrt", "squared_norm"));
    let out = dir.path().join("sweep");
    let st = bin().arg("sweep").arg(&a).arg(&b).arg("--out").arg(&out).status().unwrap();
    assert!(st.success());
    assert!(out.join("first.csv").exists() && out.join("second.csv").exists());

    let model = write(dir.path(), "model.toml", &CONFIG.replace("reps = 40", "reps = 200"));
    for what in ["ap_dp", "wass", "tail"] {
        let st = bin()
            .args(["diag", "--model"])
            .arg(&model)
            .args(["--what", what])
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success(), "{what}");
    }
    let diag = std::fs::read_to_string(out.join("diag.csv")).unwrap();
    assert!(diag.starts_with("# splitfun-diag v1\n"));
    assert!(diag.contains("lower_estimate"));

    let bad = bin().args(["diag", "--config"]).arg(&a).args(["--what", "nope"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = splitfun::harness::ExperimentConfig::from_file(&path);
            assert!(cfg.is_ok(), "{}: {:?}", path.display(), cfg.err());
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
