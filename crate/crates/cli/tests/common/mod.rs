#![allow(dead_code)]

use std::path::{Path, PathBuf};

use cci_cli::RunConfig;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/twelve")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/twelve")
}

/// Full-run configuration for the twelve-municipality fixture.
pub fn fixture_config(out: &Path) -> RunConfig {
    let dir = fixture_dir();
    RunConfig {
        features: Some(dir.join("features.geojson")),
        boundaries: Some(dir.join("boundaries.geojson")),
        ..RunConfig::new(dir.join("manifest.csv"), dir.join("roster.csv"), out)
    }
}

/// Relative paths of every file under `root`, sorted.
pub fn files_under(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    out.sort();
    out
}
