//! `extract`: MHA image/mask volume pairs to PNG slices plus a fresh manifest.
//!
//! Input layout: `images/<stem>.mha`, `masks/<stem>.mha`, and an optional
//! `overrides.toml` keyed by volume stem.

use crate::config::PipelineConfig;
use crate::error::{invalid, CliError, Result};
use crate::workspace::{pool, read_manifest, rel_ref, stems_with_extension, write_file, write_manifest};
use lumbarkit::manifest::{Manifest, ManifestEntry, Series, Stage};
use lumbarkit::volume::{extract_slices, read_volume, SliceMode, SliceSpec, Volume};
use rayon::prelude::*;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default)]
pub struct VolumeOverride {
    #[serde(flatten)]
    pub slice_spec: SliceSpec,
    pub series: Option<Series>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverrideFile {
    pub volumes: BTreeMap<String, VolumeOverride>,
}

impl OverrideFile {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let parsed: Self = toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        for (stem, o) in &parsed.volumes {
            o.slice_spec
                .validate()
                .map_err(|e| invalid(format!("{}: volume {stem}: {e}", path.display())))?;
        }
        Ok(parsed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractOutcome {
    pub volumes: usize,
    pub slices: usize,
    pub failed: usize,
}

struct Job {
    stem: String,
    series: Series,
    spec: SliceSpec,
    has_image: bool,
    has_mask: bool,
}

pub fn cmd_extract(cfg: &PipelineConfig) -> Result<ExtractOutcome> {
    let input = cfg.input_dir()?;
    let output = cfg.output_dir()?;
    let manifest_path = cfg.manifest_path()?;
    if manifest_path.exists() && !cfg.run.force {
        let stage = read_manifest(&manifest_path).map(|m| m.header.stage);
        return Err(invalid(format!(
            "{} already exists (stage {:?}); pass --force to extract again",
            manifest_path.display(),
            stage.ok()
        )));
    }

    let image_dir = input.join("images");
    let mask_dir = input.join("masks");
    let image_stems = stems_with_extension(&image_dir, "mha")?;
    let mask_stems = stems_with_extension(&mask_dir, "mha")?;
    let overrides = OverrideFile::load(&input.join("overrides.toml"))?;

    let mut stems: Vec<String> = image_stems.iter().chain(&mask_stems).cloned().collect();
    stems.sort();
    stems.dedup();
    if let Some(unknown) = overrides.volumes.keys().find(|k| !stems.contains(k)) {
        return Err(invalid(format!("overrides.toml names unknown volume {unknown:?}")));
    }

    let jobs = stems
        .iter()
        .map(|stem| {
            let o = overrides.volumes.get(stem).cloned().unwrap_or_default();
            let series = o.series.or_else(|| Series::from_volume_name(stem)).ok_or_else(|| {
                invalid(format!(
                    "cannot infer the series of volume {stem:?}; add `series` for it in overrides.toml"
                ))
            })?;
            Ok(Job {
                stem: stem.clone(),
                series,
                spec: o.slice_spec,
                has_image: image_stems.binary_search(stem).is_ok(),
                has_mask: mask_stems.binary_search(stem).is_ok(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let per_volume: Vec<Result<Vec<ManifestEntry>>> = pool(cfg.run.workers)?.install(|| {
        jobs.par_iter()
            .map(|job| extract_volume(job, &image_dir, &mask_dir, output))
            .collect()
    });

    let mut entries = Vec::new();
    for r in per_volume {
        entries.extend(r?);
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let failed = entries.iter().filter(|e| e.error.is_some()).count();
    let outcome = ExtractOutcome {
        volumes: jobs.len(),
        slices: entries.len() - failed,
        failed,
    };
    write_manifest(&manifest_path, &Manifest::new(Stage::Extracted, entries))?;
    Ok(outcome)
}

fn failed_entry(job: &Job, reason: String) -> ManifestEntry {
    let mut e = ManifestEntry::new(
        rel_ref("images", &format!("{}.mha", job.stem)),
        rel_ref("masks", &format!("{}.mha", job.stem)),
        job.series,
    );
    e.id = job.stem.clone();
    e.volume = job.stem.clone();
    e.slice_spec = job.spec;
    e.fail(reason);
    e
}

/// Errors name the file relative to the input directory so manifests do not
/// depend on where the input lives.
fn load(dir: &Path, file: &str) -> std::result::Result<Volume, String> {
    let name = format!("{}/{file}", dir.file_name().unwrap_or_default().to_string_lossy());
    let bytes = fs::read(dir.join(file)).map_err(|e| format!("{name}: {e}"))?;
    read_volume(&bytes).map_err(|e| format!("{name}: {e}"))
}

/// Parse problems become a failed entry; only output write errors abort.
fn extract_volume(job: &Job, image_dir: &Path, mask_dir: &Path, output: &Path) -> Result<Vec<ManifestEntry>> {
    if !job.has_image {
        return Ok(vec![failed_entry(job, "no image volume for this mask".into())]);
    }
    if !job.has_mask {
        return Ok(vec![failed_entry(job, "no mask volume for this image".into())]);
    }
    let file = format!("{}.mha", job.stem);
    let slices = load(image_dir, &file).and_then(|image| {
        let mask = load(mask_dir, &file)?;
        if image.header.dim_size != mask.header.dim_size {
            return Err(format!(
                "image dimensions {:?} differ from mask dimensions {:?}",
                image.header.dim_size, mask.header.dim_size
            ));
        }
        let imgs = extract_slices(&image, &job.spec, SliceMode::Image).map_err(|e| format!("image: {e}"))?;
        let masks = extract_slices(&mask, &job.spec, SliceMode::Mask).map_err(|e| format!("mask: {e}"))?;
        Ok((imgs, masks, job.spec.slice_spacing(image.header.element_spacing)))
    });
    let (imgs, masks, spacing) = match slices {
        Ok(s) => s,
        Err(reason) => return Ok(vec![failed_entry(job, reason)]),
    };

    let mut entries = Vec::with_capacity(imgs.len());
    for (k, (img, mask)) in imgs.iter().zip(&masks).enumerate() {
        let id = format!("{}_s{k:03}", job.stem);
        let name = format!("{id}.png");
        let image_ref = rel_ref("images", &name);
        let mask_ref = rel_ref("masks", &name);
        for (raster, reference) in [(img, &image_ref), (mask, &mask_ref)] {
            let path = output.join(reference);
            let bytes = raster.to_png_bytes().map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            write_file(&path, &bytes)?;
        }
        let mut e = ManifestEntry::new(image_ref, mask_ref, job.series);
        e.id = id;
        e.volume = job.stem.clone();
        e.slice_index = Some(k);
        e.slice_spec = job.spec;
        e.pixel_spacing = spacing;
        entries.push(e);
    }
    Ok(entries)
}
