use std::path::PathBuf;
use std::process::{Command, Output};

const SUBCOMMANDS: [&str; 6] = ["basis", "verify", "gen", "train", "eval", "report"];

fn eqtensor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eqtensor")).args(args).output().expect("binary runs")
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.txt"))
}

fn check_golden(name: &str, args: &[&str]) {
    let out = eqtensor(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}");
    let actual = String::from_utf8(out.stdout).unwrap();
    let path = golden(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
    assert_eq!(actual, expected, "help text for {name} changed; rerun with UPDATE_GOLDEN=1");
}

#[test]
fn help_matches_golden() {
    check_golden("eqtensor", &["--help"]);
    for sub in SUBCOMMANDS {
        check_golden(sub, &[sub, "--help"]);
    }
}

#[test]
fn basis_lists_fifteen_elements() {
    let out = eqtensor(&["basis", "--order", "6", "--metric", "o3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("15 elements"));
}

#[test]
fn verify_succeeds() {
    let out = eqtensor(&["verify", "--group", "o3", "--group", "lorentz", "--trials", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(eqtensor(&["basis", "--order", "x"]).status.code(), Some(1));
    assert_eq!(eqtensor(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(eqtensor(&["gen", "--set", "no_such_key=3"]).status.code(), Some(1));
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/stress.cfg");
    let mut files = Vec::new();
    for name in ["a.eqd", "b.eqd"] {
        let path = dir.path().join(name);
        let p = path.to_str().unwrap();
        let out = eqtensor(&["--seed", "3", "--config", config, "--out", p, "gen", "--set", "train=20", "--set", "val=5", "--set", "test=5"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        files.push(std::fs::read(path).unwrap());
    }
    assert!(!files[0].is_empty());
    assert_eq!(files[0], files[1]);
}
