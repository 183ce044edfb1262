use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_entroflow"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

const FLAT_LAMBDA: &str = r#"
kind = "lambda"
[metric]
n = 3
grid = { x_max = 20.0, cells = 1000 }
profile = { name = "flat" }
"#;

const BUMP_FLOW: &str = r#"
kind = "flow"
[metric]
grid = { x_max = 12.0, cells = 120 }
profile = { name = "gaussian-bump", mass = 0.3, width = 1.5 }
[flow]
t_end = 0.05
"#;

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn flat_lambda_ends_near_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "flat.toml", FLAT_LAMBDA);
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("stages.csv"));
    let last = rows.last().unwrap();
    assert_eq!(last[0].parse::<f64>().unwrap(), 1.0);
    let lambda: f64 = last[2].parse().unwrap();
    assert!(lambda.abs() < 1e-3, "lambda = {lambda}");
    let profile = csv_rows(&out.join("minimizer.csv"));
    assert_eq!(profile.len(), 1001);
}

#[test]
fn malformed_config_is_a_usage_error_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for (name, body) in [
        ("syntax.toml", "kind = \"lambda\"\n[metric\n"),
        ("kind.toml", "kind = \"teleport\"\n[metric]\nprofile = { name = \"flat\" }\n"),
        ("unknown_key.toml", "kind = \"lambda\"\ncolour = 3\n[metric]\nprofile = { name = \"flat\" }\n"),
        ("missing_profile.toml", "kind = \"lambda\"\n[metric]\ngrid = { x_max = 10.0, cells = 100 }\n"),
        ("bad_tol.toml", "kind = \"lambda\"\n[metric]\ngrid = { x_max = 10.0, cells = 100 }\nprofile = { name = \"flat\" }\n[schedule]\nalphas = [1.5, 1.0]\ntolerances = [1e-5, -1.0]\n"),
    ] {
        let cfg = write_config(tmp.path(), name, body);
        let o = run(&cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{name} left partial outputs");
    }
}

#[test]
fn module_failure_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let body = BUMP_FLOW.replace("t_end = 0.05", "t_end = 0.05\ndt = 0.5");
    let cfg = write_config(tmp.path(), "unstable.toml", &body);
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stability bound"));
    assert!(!out.exists());
}

#[test]
fn identical_runs_give_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "flow.toml", BUMP_FLOW);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&cfg, &a, &["--checkpoint-every", "10"]).status.success());
    assert!(run(&cfg, &b, &["--checkpoint-every", "10"]).status.success());
    let mut names = Vec::new();
    for entry in walk(&a) {
        let rel = entry.strip_prefix(&a).unwrap().to_path_buf();
        if rel.extension().is_some_and(|e| e == "csv") {
            assert_eq!(std::fs::read(&entry).unwrap(), std::fs::read(b.join(&rel)).unwrap(), "{rel:?}");
            names.push(rel);
        }
    }
    assert!(names.len() > 3);
    assert!(names.iter().any(|p| p.starts_with("snapshots")));
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn manifest_hashes_every_csv() {
    use sha2::{Digest, Sha256};
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "flow.toml", BUMP_FLOW);
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out, &["--seed", "5"]).status.success());
    let manifest: toml::Value = toml::from_str(&std::fs::read_to_string(out.join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(manifest["seed"].as_integer(), Some(5));
    assert_eq!(manifest["version"].as_str(), Some(env!("CARGO_PKG_VERSION")));
    let config_hash = format!("{:x}", Sha256::digest(BUMP_FLOW.as_bytes()));
    assert_eq!(manifest["config_sha256"].as_str(), Some(config_hash.as_str()));
    let files = manifest["files"].as_array().unwrap();
    for p in walk(&out) {
        let rel = p.strip_prefix(&out).unwrap().to_string_lossy().replace('\\', "/");
        if !rel.ends_with(".csv") {
            continue;
        }
        let entry = files.iter().find(|f| f["path"].as_str() == Some(rel.as_str())).expect(&rel);
        let digest = format!("{:x}", Sha256::digest(std::fs::read(&p).unwrap()));
        assert_eq!(entry["sha256"].as_str(), Some(digest.as_str()));
    }
    let plot = std::fs::read_to_string(out.join("plot.py")).unwrap();
    assert!(plot.contains("\"flow.csv\""));
    let flow = std::fs::read_to_string(out.join("flow.csv")).unwrap();
    assert!(flow.starts_with("t,max_curvature,min_R,max_R\n"));
    assert!(!flow.contains('\r'));
}

fn validate(body: &str) -> String {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", body);
    let o = bin().arg("validate").arg("--config").arg(&cfg).output().unwrap();
    assert!(o.status.success());
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn validate_reports_steps_bounds_and_errors() {
    let ok = validate(BUMP_FLOW);
    assert!(ok.starts_with("ok\n"), "{ok}");
    assert!(ok.contains("estimated steps:"), "{ok}");

    let fast = validate(&BUMP_FLOW.replace("t_end = 0.05", "t_end = 0.05\ndt = 0.01"));
    let line = fast.lines().find(|l| l.starts_with("warning:")).expect("warning");
    // the bound is 0.3 min(Δs)² of the initial metric
    let bound: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(bound > 0.0 && bound < 0.01 && bound < 0.3 * 0.1 * 0.1 * 1.01, "{line}");

    let missing = validate("kind = \"flow\"\n[metric]\ngrid = { x_max = 1.0, cells = 20 }\n[flow]\nt_end = 1.0\n");
    assert!(missing.lines().any(|l| l.starts_with("error: missing metric profile")), "{missing}");
    assert!(!missing.starts_with("ok"));
}

#[test]
fn batch_runs_each_config_into_its_own_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_config(tmp.path(), "first.toml", BUMP_FLOW);
    let b = write_config(tmp.path(), "second.toml", &BUMP_FLOW.replace("0.05", "0.02"));
    let out = tmp.path().join("batch");
    let o = bin()
        .env("ENTROFLOW_THREADS", "2")
        .args(["batch", "--out"])
        .arg(&out)
        .arg("--config")
        .arg(&a)
        .arg("--config")
        .arg(&b)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("first/flow.csv").exists());
    assert!(out.join("second/manifest.toml").exists());
}
