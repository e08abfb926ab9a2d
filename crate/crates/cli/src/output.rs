//! Output directory layout: the data files, `config.toml` (the input as
//! given), `resolved.json` (the configuration after defaults and resonance
//! resolution) and `manifest.json` describing all of them.

use std::fs;
use std::path::Path;

use serde_json::json;

use crate::commands::CommandOutput;
use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const RESOLVED_SNAPSHOT: &str = "resolved.json";

pub fn manifest(loaded: &LoadedConfig, out: &CommandOutput) -> serde_json::Value {
    let files: Vec<_> = out
        .artifacts
        .iter()
        .map(|a| {
            json!({
                "path": a.path,
                "kind": a.kind,
                "columns": a.columns,
                "rows": a.rows,
            })
        })
        .collect();
    json!({
        "command": out.command,
        "figure": loaded.file.figure,
        "seed": loaded.seed,
        "config": CONFIG_SNAPSHOT,
        "resolved_config": RESOLVED_SNAPSHOT,
        "files": files,
        "summary": out.summary,
        "instability_only": out.instability_only,
    })
}

/// Writes every file of a finished command into `dir`, creating it if needed.
pub fn write(dir: &Path, loaded: &LoadedConfig, out: &CommandOutput) -> CliResult<()> {
    let io = |what: &str, e| CliError::io(format!("writing {}", dir.join(what).display()), e);
    fs::create_dir_all(dir).map_err(|e| io("", e))?;
    for a in &out.artifacts {
        fs::write(dir.join(&a.path), &a.bytes).map_err(|e| io(&a.path, e))?;
    }
    fs::write(dir.join(CONFIG_SNAPSHOT), &loaded.text).map_err(|e| io(CONFIG_SNAPSHOT, e))?;
    let pretty = |v: &serde_json::Value| {
        let mut s = serde_json::to_string_pretty(v).unwrap_or_default();
        s.push('\n');
        s
    };
    fs::write(dir.join(RESOLVED_SNAPSHOT), pretty(&out.resolved)).map_err(|e| io(RESOLVED_SNAPSHOT, e))?;
    fs::write(dir.join(MANIFEST), pretty(&manifest(loaded, out))).map_err(|e| io(MANIFEST, e))?;
    Ok(())
}
