use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn levy_tc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levy-tc")).args(args).output().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(task: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![task, cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    levy_tc(&args)
}

fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

const TCE: &str = r#"
[process]
preset = "brownian"
[g]
expr = "min(abs(x),1)"
[sim]
dt = 0.01
horizon = 1.0
n_paths = 20
master_seed = 4
"#;

#[test]
fn index_of_brownian_is_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", "[process]\npreset = \"brownian\"\n");
    let out = dir.path().join("out");
    assert_eq!(run("index", &cfg, &out, &[]).status.code(), Some(0));
    let beta = csv_column(&fs::read_to_string(out.join("index.csv")).unwrap(), "beta_infinity");
    assert!((beta[0] - 2.0).abs() < 1e-9);
    assert!(out.join("index_grid.csv").exists());
}

#[test]
fn ivp_demo_square_root() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", "[ivp]\nprofile = \"sqrt(t)\"\ndt = 1e-4\nhorizon = 1.0\n");
    let out = dir.path().join("out");
    assert_eq!(run("ivp-demo", &cfg, &out, &[]).status.code(), Some(0));
    let text = fs::read_to_string(out.join("ivp.csv")).unwrap();
    let t = csv_column(&text, "t");
    assert!(csv_column(&text, "alpha1").iter().all(|a| *a == 0.0));
    let a2 = csv_column(&text, "alpha2");
    let err = t.iter().zip(&a2).map(|(t, a)| (a - t * t / 4.0).abs()).fold(0.0, f64::max);
    assert!(err < 1e-3, "{err}");
    let summary = fs::read_to_string(out.join("ivp_summary.toml")).unwrap();
    assert!(summary.contains("unique = false"));
}

#[test]
fn malformed_expression_exits_2_without_files() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", &TCE.replace("min(abs(x),1)", "min(x,"));
    let out = dir.path().join("out");
    let o = run("tce", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let toml_error = write(&dir, "a.toml", "[process\n");
    assert_eq!(run("index", &toml_error, &out, &[]).status.code(), Some(2));
    let unknown = write(&dir, "b.toml", "[process]\npreset = \"brownian\"\ncolour = 1\n");
    assert_eq!(run("index", &unknown, &out, &[]).status.code(), Some(2));
    let negative = write(&dir, "c.toml", &TCE.replace("min(abs(x),1)", "x - 2"));
    assert_eq!(run("tce", &negative, &out, &[]).status.code(), Some(3));
    let no_sim = write(&dir, "d.toml", "[process]\npreset = \"brownian\"\n");
    assert_eq!(run("simulate", &no_sim, &out, &[]).status.code(), Some(3));
    let wrong_task = write(&dir, "e.toml", "task = \"tce\"\n[process]\npreset = \"brownian\"\n");
    assert_eq!(run("index", &wrong_task, &out, &[]).status.code(), Some(3));
    assert_eq!(levy_tc(&["index", "/nonexistent.toml", "--out", "x"]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn verify_exit_status() {
    let dir = TempDir::new().unwrap();
    let ok = write(
        &dir,
        "ok.toml",
        "[process]\npreset = \"brownian\"\n[g]\nexpr = \"min(abs(x),1)+0.5\"\n\
         [sim]\ndt = 0.001\nhorizon = 1.0\nn_paths = 1000\nmaster_seed = 3\n",
    );
    let out = dir.path().join("ok");
    let o = run("verify", &ok, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("verify.csv")).unwrap();
    for test in ["martingale", "small_time", "maximal", "holder", "time_changed"] {
        assert!(csv.lines().any(|l| l.starts_with(&format!("{test},"))), "{test}");
    }

    // paths frozen at the edge of a small box no longer have the Brownian symbol
    let frozen = write(
        &dir,
        "frozen.toml",
        "[process]\npreset = \"brownian\"\nlower = [-0.1]\nupper = [0.1]\n\
         [sim]\ndt = 0.001\nhorizon = 1.0\nn_paths = 500\nmaster_seed = 3\nabsorb_outside = true\n",
    );
    let out = dir.path().join("frozen");
    let o = run("verify", &frozen, &out, &[]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("verify_summary.toml")).unwrap();
    assert!(summary.contains("pass = false"));
}

#[test]
fn reruns_and_manifest_replay_are_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", TCE);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(run("tce", &cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(run("tce", &cfg, &b, &[]).status.code(), Some(0));
    for f in ["tce.csv", "report.toml", "manifest.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest = a.join("manifest.toml");
    assert_eq!(run("tce", &manifest, &c, &[]).status.code(), Some(0));
    assert_eq!(fs::read(a.join("tce.csv")).unwrap(), fs::read(c.join("tce.csv")).unwrap());
    assert_eq!(fs::read(&manifest).unwrap(), fs::read(c.join("manifest.toml")).unwrap());

    let text = fs::read_to_string(&manifest).unwrap();
    let doc: toml::Table = toml::from_str(&text).unwrap();
    let files = doc["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        let name = f["name"].as_str().unwrap();
        let bytes = fs::read(a.join(name)).unwrap();
        use sha2::Digest;
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(sha2::Sha256::digest(&bytes)));
    }
}

#[test]
fn seed_override_changes_paths() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.toml",
        "[process]\npreset = \"cauchy\"\n[sim]\ndt = 0.1\nhorizon = 1.0\nn_paths = 3\nmaster_seed = 1\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("simulate", &cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(run("simulate", &cfg, &b, &["--seed", "2"]).status.code(), Some(0));
    assert_ne!(fs::read(a.join("paths.csv")).unwrap(), fs::read(b.join("paths.csv")).unwrap());
    let m = fs::read_to_string(b.join("manifest.toml")).unwrap();
    assert!(m.contains("master_seed = 2"));
}

#[test]
fn explicit_triplet() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.toml",
        r#"
[process]
dim = 2
x0 = [0.0, 1.0]
[process.triplet]
drift = ["-x1", "0.5"]
diffusion = [[1.0, 0.0], [0.0, 0.25]]
jumps = { kind = "cpp", rate = 2.0, jump = [0.1, -0.1] }
[sim]
dt = 0.01
horizon = 0.5
n_paths = 4
master_seed = 7
binary = true
"#,
    );
    let out = dir.path().join("out");
    let o = run("simulate", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("paths.csv")).unwrap();
    assert!(text.starts_with("path_id,t,x_1,x_2\n0,0,0,1\n"));
    assert!(out.join("paths.bin").exists());
}
