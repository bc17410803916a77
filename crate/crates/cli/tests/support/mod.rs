#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rlframe_cli::RunManifest;

pub const BIN: &str = env!("CARGO_BIN_EXE_rlframe");

pub fn manifests_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifests")
}

/// Shipped manifest with paths resolved and output redirected to `out`.
pub fn shipped(name: &str, out: &Path) -> RunManifest {
    let mut m = RunManifest::load(&manifests_dir().join(name)).unwrap();
    m.output_dir = Some(out.to_path_buf());
    m
}

pub fn write_manifest(dir: &Path, name: &str, m: &RunManifest) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, m.to_toml()).unwrap();
    path
}

/// Registry pointing at the mirror plugin built into the binary.
pub fn write_registry(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut command = vec![format!("{BIN:?}"), "\"mirror-plugin\"".to_string()];
    command.extend(extra.iter().map(|a| format!("{a:?}")));
    let text = format!(
        "[plugins.mirror]\ncommand = [{}]\ncapabilities = [\"environment\", \"learner\", \"configuration\"]\ntimeout_ms = 5000\n",
        command.join(", ")
    );
    let path = dir.join("plugins.toml");
    fs::write(&path, text).unwrap();
    path
}

pub fn rlframe(args: &[&str], registry: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("RLFRAME_PLUGIN_REGISTRY");
    if let Some(r) = registry {
        cmd.env("RLFRAME_PLUGIN_REGISTRY", r);
    }
    cmd.output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Value after `key=` on the last line starting with `prefix`.
pub fn field<'a>(text: &'a str, prefix: &str, key: &str) -> Option<&'a str> {
    let line = text.lines().rev().find(|l| l.starts_with(prefix))?;
    let start = line.find(&format!("{key}="))? + key.len() + 1;
    let rest = &line[start..];
    let end = if rest.starts_with('[') {
        rest.find(']').map_or(rest.len(), |i| i + 1)
    } else {
        rest.find(' ').unwrap_or(rest.len())
    };
    Some(&rest[..end])
}
