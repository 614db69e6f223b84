//! File helpers shared by the commands.

use crate::error::{invalid, CliError, Result};
use lumbarkit::manifest::{Manifest, Stage};
use std::fs;
use std::path::{Path, PathBuf};

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes through a sibling temp file so a crash never leaves half a manifest.
pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    write_file(&tmp, manifest.to_jsonl().as_bytes())?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Manifest::from_jsonl(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Refuses to run a command whose prerequisite stage has not been reached.
pub fn require_stage(manifest: &Manifest, needed: Stage, command: &str, force: bool) -> Result<()> {
    if manifest.header.stage < needed && !force {
        return Err(invalid(format!(
            "{command} needs a manifest at stage {needed:?} or later, found {:?}; pass --force to override",
            manifest.header.stage
        )));
    }
    Ok(())
}

/// Sorted `*.<ext>` file stems in `dir`.
pub fn stems_with_extension(dir: &Path, ext: &str) -> Result<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut stems = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

pub fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("worker pool: {e}")))
}

/// Reference stored in the manifest for a file under the output directory.
pub fn rel_ref(dir: &str, name: &str) -> String {
    format!("{dir}/{name}")
}

pub fn resolve(root: &Path, reference: &str) -> PathBuf {
    root.join(reference)
}
