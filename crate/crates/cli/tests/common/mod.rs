#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bsr() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bsr"));
    cmd.env("RUST_LOG", "error");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bsr().args(args).output().expect("spawn bsr")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

pub fn bundled_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/default_config.json")
}

/// The bundled config shrunk to `pairs` pairs per identity type.
pub fn small_config(dir: &Path, pairs: usize) -> PathBuf {
    let src = std::fs::read_to_string(bundled_config_path()).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&src).unwrap();
    v["pairs_per_type"] = pairs.into();
    v["test_pairs_per_type"] = pairs.into();
    let p = dir.join("small_config.json");
    std::fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
