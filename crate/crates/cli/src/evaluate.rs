//! `evaluate`: scores predicted masks against the restored ground truth.
//!
//! Predictions are gray PNGs in the class-level encoding, named `<entry id>.png`.
//! Once a manifest is filtered only kept entries are scored.

use crate::config::PipelineConfig;
use crate::error::{invalid, CliError, Result};
use crate::workspace::{pool, read_manifest, require_stage, resolve, write_file};
use lumbarkit::filter::Verdict;
use lumbarkit::manifest::{ManifestEntry, Series, Stage};
use lumbarkit::metrics::{aggregate, evaluate_pair, Aggregate, MetricError, MetricReport};
use lumbarkit::raster::{decode_label_raster, Raster2D};
use lumbarkit::LabelMask;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    pub series: Series,
    pub report: Option<MetricReport>,
    /// Why the pair was skipped.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub evaluated: usize,
    pub skipped: usize,
    pub series: BTreeMap<Series, Aggregate>,
}

impl EvaluationReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "pairs evaluated: {}, skipped: {}", self.evaluated, self.skipped);
        for (series, agg) in &self.series {
            out.push('\n');
            out.push_str(&agg.render_table(&series.to_string()));
        }
        out
    }
}

fn load_labels(path: &Path, name: &str) -> std::result::Result<LabelMask, String> {
    let raster = Raster2D::load_png(path).map_err(|e| format!("{name}: {e}"))?;
    decode_label_raster(&raster).map_err(|e| format!("{name}: {e}"))
}

fn score(entry: &ManifestEntry, predictions: &Path, output: &Path, cfg: &PipelineConfig) -> PairRecord {
    let mut record = PairRecord {
        id: entry.id.clone(),
        series: entry.series,
        report: None,
        error: None,
    };
    let gt_ref = entry.restored_ref.as_deref().expect("candidates carry a restored mask");
    let pred_path = predictions.join(format!("{}.png", entry.id));
    if !pred_path.is_file() {
        record.error = Some("missing prediction".into());
        return record;
    }
    let result = load_labels(&pred_path, "prediction").and_then(|pred| {
        let gt = load_labels(&resolve(output, gt_ref), gt_ref)?;
        let metric_cfg = cfg.metrics.metric_config(entry.pixel_spacing);
        evaluate_pair(&pred, &gt, &metric_cfg).map_err(|e| match e {
            MetricError::ShapeMismatch { pred, gt } => {
                format!("shape mismatch: prediction {}x{}, ground truth {}x{}", pred.0, pred.1, gt.0, gt.1)
            }
            other => other.to_string(),
        })
    });
    match result {
        Ok(r) => record.report = Some(r),
        Err(e) => record.error = Some(e),
    }
    record
}

pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<EvaluationReport> {
    let output = cfg.output_dir()?;
    let predictions = cfg
        .paths
        .predictions
        .as_deref()
        .ok_or_else(|| invalid("no predictions directory; pass --predictions or set paths.predictions"))?;
    if !predictions.is_dir() {
        return Err(CliError::io(
            predictions,
            std::io::Error::new(std::io::ErrorKind::NotFound, "predictions directory not found"),
        ));
    }
    let manifest = read_manifest(&cfg.manifest_path()?)?;
    require_stage(&manifest, Stage::Restored, "evaluate", cfg.run.force)?;

    let wanted = if manifest.header.stage == Stage::Filtered {
        Verdict::Kept
    } else {
        Verdict::Pending
    };
    let candidates: Vec<&ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| e.verdict == wanted && e.restored_ref.is_some())
        .collect();

    let records: Vec<PairRecord> = pool(cfg.run.workers)?.install(|| {
        candidates
            .par_iter()
            .map(|e| score(e, predictions, output, cfg))
            .collect()
    });

    let mut by_series: BTreeMap<Series, Vec<MetricReport>> = BTreeMap::new();
    for r in &records {
        if let Some(report) = &r.report {
            by_series.entry(r.series).or_default().push(report.clone());
        }
    }
    let evaluated = by_series.values().map(Vec::len).sum();
    let report = EvaluationReport {
        evaluated,
        skipped: records.len() - evaluated,
        series: by_series
            .iter()
            .filter_map(|(s, reports)| aggregate(reports).map(|a| (*s, a)))
            .collect(),
    };

    let dir = output.join("evaluation");
    let mut lines = String::new();
    for r in &records {
        lines.push_str(&serde_json::to_string(r).expect("record serializes"));
        lines.push('\n');
    }
    write_file(&dir.join("pairs.jsonl"), lines.as_bytes())?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&dir.join("report.json"), format!("{json}\n").as_bytes())?;
    write_file(&dir.join("report.txt"), report.render().as_bytes())?;
    Ok(report)
}
