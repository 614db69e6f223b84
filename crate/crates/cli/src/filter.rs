//! `filter`: assigns verdicts (missing classes first, then imbalance) and
//! writes a per-series summary.

use crate::config::PipelineConfig;
use crate::error::{invalid, Result};
use crate::workspace::{read_manifest, require_stage, write_file, write_manifest};
use lumbarkit::filter::{filter_imbalanced, filter_redundant, reset_verdicts, summarize, DatasetSummary};
use lumbarkit::manifest::{FilterSettings, Stage};

pub fn cmd_filter(cfg: &PipelineConfig) -> Result<DatasetSummary> {
    let output = cfg.output_dir()?;
    let manifest_path = cfg.manifest_path()?;
    let mut manifest = read_manifest(&manifest_path)?;
    require_stage(&manifest, Stage::Restored, "filter", cfg.run.force)?;

    let settings = FilterSettings {
        threshold: cfg.filter.threshold,
        mode: cfg.filter.imbalance_mode,
    };
    let mut entries = manifest.entries.clone();
    reset_verdicts(&mut entries);
    filter_redundant(&mut entries);
    filter_imbalanced(&mut entries, settings.threshold, settings.mode);

    if manifest.header.stage == Stage::Filtered && !cfg.run.force {
        let changed = entries
            .iter()
            .zip(&manifest.entries)
            .filter(|(a, b)| a.verdict != b.verdict)
            .count();
        if changed > 0 || manifest.header.filter != Some(settings) {
            return Err(invalid(format!(
                "refusing to overwrite existing verdicts ({changed} would change, previous settings {:?}); pass --force",
                manifest.header.filter
            )));
        }
    }

    manifest.entries = entries;
    manifest.header.stage = Stage::Filtered;
    manifest.header.filter = Some(settings);
    write_manifest(&manifest_path, &manifest)?;

    let summary = summarize(&manifest.entries, cfg.filter.target_per_series);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&output.join("summary.json"), format!("{json}\n").as_bytes())?;
    write_file(&output.join("summary.txt"), summary.render_table().as_bytes())?;
    Ok(summary)
}
