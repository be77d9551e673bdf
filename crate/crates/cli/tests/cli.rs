use std::path::Path;
use std::process::{Command, Output};

fn prodform(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prodform")).args(args).output().unwrap()
}

fn small_toy(out: &Path) -> Vec<String> {
    ["toy-gaussian", "--K", "3", "--N", "20", "--R", "10", "--out"]
        .iter()
        .map(|s| s.to_string())
        .chain([out.to_string_lossy().into_owned()])
        .collect()
}

fn run(args: &[String]) -> Output {
    prodform(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn every_subcommand_parses() {
    for sub in ["toy-gaussian", "tail", "scaling", "taylor", "hierarchical", "mixture", "run", "replay"] {
        let out = prodform(&[sub, "--help"]);
        assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn writes_manifest_and_refuses_to_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("toy");
    let args = small_toy(&dir);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), dir.to_string_lossy());
    for f in ["manifest.json", "variances.csv", "ratio.csv", "replicates.ndjson"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    assert_eq!(run(&args).status.code(), Some(2));
    let mut forced = args.clone();
    forced.push("--force".into());
    assert!(run(&forced).status.success());
}

#[test]
fn bad_configs_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"experiment": {"tail": {"bogus": 1}}}"#).unwrap();
    let out = tmp.path().join("out").to_string_lossy().into_owned();
    assert_eq!(prodform(&["run", "--config", cfg.to_str().unwrap(), "--out", &out]).status.code(), Some(2));
    // a single replicate has no sample variance
    let r1 = prodform(&["toy-gaussian", "--K", "2", "--N", "5", "--R", "1", "--out", &out]);
    assert_eq!(r1.status.code(), Some(2));
}

#[test]
fn config_file_round_trips_through_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("mixture.json");
    std::fs::write(&cfg, r#"{"experiment": {"mixture": {"N": 12, "R": 5}}, "seed": 3}"#).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(prodform(&["run", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]).status.success());
    let manifest = a.join("manifest.json");
    assert!(prodform(&["replay", "--manifest", manifest.to_str().unwrap(), "--out", b.to_str().unwrap()])
        .status
        .success());
    for f in ["allocations.csv", "components.csv", "replicates.ndjson", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}
