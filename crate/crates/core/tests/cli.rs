use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn oue(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oue")).args(args).env_remove("OUE_THREADS").output().expect("binary runs")
}

fn run_dirs(parent: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(parent).unwrap().map(|e| e.unwrap().path()).collect();
    dirs.sort();
    dirs
}

#[test]
fn verify_hermite_passes_and_writes_manifest() {
    let out = tempfile::tempdir().unwrap();
    let o = oue(&["verify-hermite", "--N", "12", "--c", "0.5", "--output-dir", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let dirs = run_dirs(out.path());
    assert_eq!(dirs.len(), 1);
    let name = dirs[0].file_name().unwrap().to_str().unwrap();
    assert!(name.starts_with("verify-hermite-") && name.ends_with("-s0"), "{name}");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dirs[0].join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], true);
    assert_eq!(manifest["config"]["N"], 12);
    let gram = manifest["checks"].as_array().unwrap().iter().find(|c| c["name"] == "orthonormality").unwrap();
    assert!(gram["value"].as_f64().unwrap() < 1e-10);
}

#[test]
fn unwritable_output_dir_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let target = blocker.join("runs");
    let o = oue(&["verify-hermite", "--N", "2", "--output-dir", target.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(target.to_str().unwrap()));
}

#[test]
fn bad_arguments_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for args in [
        vec!["no-such-command"],
        vec!["sample", "--c", "1.5", "--output-dir", d],
        vec!["sample", "--bogus"],
        vec!["kernel-bounds", "--vorticity", "square", "--output-dir", d],
    ] {
        assert_eq!(oue(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn same_seed_gives_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for _ in 0..2 {
        let o = oue(&["sample", "--N", "3", "--M", "50", "--seed", "7", "--threads", "2", "--output-dir", d]);
        assert_eq!(o.status.code(), Some(0));
    }
    let dirs = run_dirs(dir.path());
    assert_eq!(dirs.len(), 2);
    let csvs = |p: &Path| {
        let mut files: Vec<PathBuf> =
            fs::read_dir(p).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "csv")).collect();
        files.sort();
        files.iter().map(|f| (f.file_name().unwrap().to_owned(), fs::read(f).unwrap())).collect::<Vec<_>>()
    };
    let (a, b) = (csvs(&dirs[0]), csvs(&dirs[1]));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let runs = dir.path().join("runs");
    fs::write(&cfg, format!("N = 2\nseed = 3\nc = 0.3\noutput_dir = {:?}\n", runs.to_str().unwrap())).unwrap();
    let o = oue(&["verify-hermite", "--config", cfg.to_str().unwrap(), "--c", "0.7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dirs = run_dirs(&runs);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dirs[0].join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["N"], 2);
    assert_eq!(manifest["config"]["seed"], 3);
    assert_eq!(manifest["config"]["c"], 0.7);
}
