//! `report`: one plain-text overview of the manifest and any evaluation.

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::workspace::{read_manifest, write_file};
use lumbarkit::filter::{summarize, Verdict};
use std::fmt::Write as _;

pub fn cmd_report(cfg: &PipelineConfig) -> Result<String> {
    let output = cfg.output_dir()?;
    let manifest = read_manifest(&cfg.manifest_path()?)?;
    let entries = &manifest.entries;

    let mut out = String::new();
    let _ = writeln!(out, "stage: {:?}", manifest.header.stage);
    if let Some(f) = manifest.header.filter {
        let _ = writeln!(out, "filter: threshold {} ({:?})", f.threshold, f.mode);
    }
    let _ = writeln!(out, "entries: {}", entries.len());

    let restored: Vec<_> = entries.iter().filter_map(|e| e.restore).collect();
    if !restored.is_empty() {
        let converged = restored.iter().filter(|r| r.converged).count();
        let max_rounds = restored.iter().map(|r| r.rounds).max().unwrap_or(0);
        let _ = writeln!(
            out,
            "restored: {} ({} converged, {} not converged, max rounds {})",
            restored.len(),
            converged,
            restored.len() - converged,
            max_rounds
        );
    }

    let failed: Vec<_> = entries.iter().filter(|e| e.verdict == Verdict::Failed).collect();
    if !failed.is_empty() {
        let _ = writeln!(out, "failed entries:");
        for e in failed {
            let _ = writeln!(out, "  {}: {}", e.id, e.error.as_deref().unwrap_or("unknown error"));
        }
    }

    out.push('\n');
    out.push_str(&summarize(entries, cfg.filter.target_per_series).render_table());

    let eval = output.join("evaluation").join("report.txt");
    if eval.is_file() {
        let text = std::fs::read_to_string(&eval).map_err(|e| CliError::io(&eval, e))?;
        out.push_str("\nevaluation\n");
        out.push_str(&text);
    }
    write_file(&output.join("report.txt"), out.as_bytes())?;
    Ok(out)
}
