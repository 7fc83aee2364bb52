use std::path::{Path, PathBuf};

use clap::Parser;
use sha2::{Digest, Sha256};
use tempfile::TempDir;
use tweezer::cli::{run, Cli, RunManifest, EXIT_OK, EXIT_VALIDATION, MANIFEST_NAME};
use tweezer::config::RunConfig;

const TINY: &str = r#"{
  "grid": {"x_max": 10.0, "n_points": 61},
  "trajectory": {"d_max": 8.0, "d_min": 0.0, "hold_time": 0.1},
  "numerics": {"d_step": 0.5, "d_sweep_max": 8.0, "phase_nodes": 8, "dt": 0.1, "leakage_limit": 1.0},
  "output": {"eigenfunction_d": [0.0]},
  "evolve": {"speeds": [1.0]},
  "channels": ["c00", "cPsiMinus"],
  "gate": {"hold_times": [0.0]}
}"#;

struct Fixture {
    dir: TempDir,
    config: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, TINY).unwrap();
    Fixture { dir, config }
}

impl Fixture {
    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, cmd: &str, out: &str, extra: &[&str]) -> i32 {
        let out = self.out(out);
        let mut args = vec!["tweezer", cmd, "--config", self.config.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        run(Cli::try_parse_from(args).unwrap())
    }
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_NAME)).unwrap()).unwrap()
}

fn files_under(dir: &Path, prefix: &str, out: &mut Vec<String>) {
    for e in std::fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        let name = format!("{prefix}{}", e.file_name().to_string_lossy());
        if e.file_type().unwrap().is_dir() {
            files_under(&e.path(), &format!("{name}/"), out);
        } else {
            out.push(name);
        }
    }
}

#[test]
fn validation_failures_exit_early_without_output() {
    let f = fixture();
    for (name, extra) in [
        ("empty", &["--override", "channels=[]"][..]),
        ("unknown", &["--override", "grid.spacing=3"][..]),
        ("malformed", &["--override", "grid.n_points"][..]),
        ("narrow", &["--override", "grid.x_max=5"][..]),
    ] {
        assert_eq!(f.run("spectrum", name, extra), EXIT_VALIDATION, "{name}");
        assert!(!f.out(name).join(MANIFEST_NAME).exists(), "{name}");
    }
}

#[test]
fn gate_needs_every_channel() {
    let f = fixture();
    assert_eq!(f.run("gate", "gate", &[]), EXIT_VALIDATION);
    let m = manifest(&f.out("gate"));
    assert_eq!(m.exit_code, EXIT_VALIDATION);
    assert!(m.tasks.iter().any(|t| !t.ok && t.error.as_deref().unwrap_or("").contains("channel")));
}

#[test]
fn manifest_accounts_for_every_file() {
    let f = fixture();
    assert_eq!(f.run("spectrum", "listing", &["--workers", "1"]), EXIT_OK);
    let dir = f.out("listing");
    let m = manifest(&dir);
    assert_eq!(m.command, "spectrum");
    assert_eq!(m.exit_code, EXIT_OK);
    assert!(m.tasks.iter().all(|t| t.ok));
    let mut listed: Vec<String> = m.outputs.iter().map(|o| o.path.clone()).collect();
    listed.sort();
    let mut on_disk = Vec::new();
    files_under(&dir, "", &mut on_disk);
    on_disk.retain(|p| p != MANIFEST_NAME);
    on_disk.sort();
    assert_eq!(listed, on_disk);
    for o in &m.outputs {
        let bytes = std::fs::read(dir.join(&o.path)).unwrap();
        assert_eq!(bytes.len(), o.bytes, "{}", o.path);
        assert_eq!(hex::encode(Sha256::digest(&bytes)), o.sha256, "{}", o.path);
    }
    // The echoed configuration reproduces the run's settings.
    let echoed = serde_json::to_string(&m.config).unwrap();
    let back = RunConfig::from_json(&echoed).unwrap();
    assert_eq!(back, m.config);
    assert_eq!(back.grid.n_points, 61);
}

#[test]
fn snapshots_do_not_change_results() {
    let f = fixture();
    assert_eq!(f.run("evolve", "plain", &["--override", "output.snapshot_every=0"]), EXIT_OK);
    assert_eq!(f.run("evolve", "snap", &["--override", "output.snapshot_every=40"]), EXIT_OK);
    let count = |d: &str| {
        std::fs::read_dir(f.out(d))
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("snapshot_"))
            .count()
    };
    assert_eq!(count("plain"), 0);
    assert!(count("snap") > 0);
    let table = |d: &str| std::fs::read_to_string(f.out(d).join("evolve.csv")).unwrap();
    assert_eq!(table("plain"), table("snap"));
}
