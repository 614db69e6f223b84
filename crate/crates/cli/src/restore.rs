//! `restore`: runs the pixel transformation on every extracted mask.

use crate::config::PipelineConfig;
use crate::error::{invalid, Result};
use crate::workspace::{pool, read_manifest, rel_ref, resolve, write_file, write_manifest};
use lumbarkit::filter::{class_census, class_weights, Verdict};
use lumbarkit::manifest::{ManifestEntry, RestoreInfo, Stage};
use lumbarkit::raster::{encode_label_raster, Raster2D};
use lumbarkit::restore::{restore, RestoreError, RgbMask};
use rayon::prelude::*;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestoreOutcome {
    pub restored: usize,
    pub not_converged: usize,
    pub failed: usize,
}

pub fn cmd_restore(cfg: &PipelineConfig) -> Result<RestoreOutcome> {
    let output = cfg.output_dir()?;
    let manifest_path = cfg.manifest_path()?;
    let mut manifest = read_manifest(&manifest_path)?;
    if manifest.header.stage > Stage::Extracted && !cfg.run.force {
        return Err(invalid(format!(
            "manifest is already at stage {:?}; restoring again clears filter verdicts, pass --force",
            manifest.header.stage
        )));
    }

    // every reference is checked before anything is written
    for e in manifest.entries.iter().filter(|e| e.verdict != Verdict::Failed) {
        if e.mask_ref.trim().is_empty() {
            return Err(invalid(format!("entry {} has no mask reference", e.id)));
        }
        let path = resolve(output, &e.mask_ref);
        if !path.is_file() {
            return Err(invalid(format!("entry {}: mask {} not found", e.id, path.display())));
        }
    }

    let updated: Vec<Result<ManifestEntry>> = pool(cfg.run.workers)?.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|e| restore_entry(e, cfg, output))
            .collect()
    });
    manifest.entries = updated.into_iter().collect::<Result<_>>()?;
    manifest.header.stage = Stage::Restored;
    manifest.header.filter = None;
    write_manifest(&manifest_path, &manifest)?;

    let count = |f: &dyn Fn(&ManifestEntry) -> bool| manifest.entries.iter().filter(|e| f(e)).count();
    Ok(RestoreOutcome {
        restored: count(&|e| e.restore.is_some()),
        not_converged: count(&|e| e.restore.is_some_and(|r| !r.converged)),
        failed: count(&|e| e.verdict == Verdict::Failed),
    })
}

fn restore_entry(entry: &ManifestEntry, cfg: &PipelineConfig, output: &Path) -> Result<ManifestEntry> {
    let mut e = entry.clone();
    if e.verdict == Verdict::Failed {
        return Ok(e);
    }
    e.verdict = Verdict::Pending;
    e.imbalance_ratio = None;
    e.error = None;

    let mask_path = resolve(output, &e.mask_ref);
    let rgb = Raster2D::load_png(&mask_path)
        .map_err(|err| err.to_string())
        .and_then(|r| RgbMask::from_raster(&r).map_err(|err| err.to_string()));
    let rgb = match rgb {
        Ok(m) => m,
        Err(reason) => {
            e.fail(format!("{}: {reason}", e.mask_ref));
            return Ok(e);
        }
    };
    let (labels, info) = match restore(&rgb, &cfg.restore) {
        Ok(r) => (r.mask, RestoreInfo { converged: true, rounds: r.rounds }),
        Err(RestoreError::NoConvergence { rounds, last }) => (*last, RestoreInfo { converged: false, rounds }),
        Err(err) => {
            e.fail(format!("restore: {err}"));
            return Ok(e);
        }
    };

    let reference = rel_ref("restored", &format!("{}.png", e.id));
    let path = resolve(output, &reference);
    let png = encode_label_raster(&labels)
        .to_png_bytes()
        .map_err(|err| invalid(format!("{}: {err}", path.display())))?;
    write_file(&path, &png)?;

    let stats = class_census(&labels);
    e.weights = Some(class_weights(&stats).expect("restored masks are non-empty"));
    e.stats = Some(stats);
    e.restored_ref = Some(reference);
    e.restore = Some(info);
    Ok(e)
}
