use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use soundmask::evaluation::sha256_hex;

use crate::config::RunConfig;

pub const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Serialize)]
struct Artifact {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Block<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: serde_json::Value,
    seeds: crate::config::SeedConfig,
    details: serde_json::Value,
    artifacts: Vec<Artifact>,
}

/// Writes `provenance.json` into `dir`, hashing each listed artifact
/// (paths relative to `dir`).
pub fn write(
    dir: &Path,
    command: &str,
    config: &RunConfig,
    details: serde_json::Value,
    files: &[String],
) -> Result<()> {
    write_named(dir, PROVENANCE_FILE, command, config, details, files)
}

pub fn write_named(
    dir: &Path,
    name: &str,
    command: &str,
    config: &RunConfig,
    details: serde_json::Value,
    files: &[String],
) -> Result<()> {
    let mut artifacts = Vec::with_capacity(files.len());
    let mut sorted = files.to_vec();
    sorted.sort();
    sorted.dedup();
    for file in sorted {
        let bytes = std::fs::read(dir.join(&file)).with_context(|| format!("hashing {file}"))?;
        artifacts.push(Artifact {
            file,
            sha256: sha256_hex(&bytes),
        });
    }
    let block = Block {
        tool: "soundmask",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: config.recorded(),
        seeds: config.seeds,
        details,
        artifacts,
    };
    let text = serde_json::to_string_pretty(&block)? + "\n";
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
