//! Class census, class weights and the two filtration steps.
//!
//! Step 1 drops slices whose mask lacks any of the four classes. Step 2
//! drops slices whose class imbalance ratio lies strictly above a threshold.
//! Dropped entries stay in the manifest with their verdict.

use crate::label::{ClassId, LabelMask};
use crate::manifest::{ManifestEntry, Series};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("mask has no pixels")]
    EmptyMask,
    #[error("class {0} has zero weight; max/min ratio is undefined")]
    ZeroWeight(ClassId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStats {
    pub counts: [u64; 4],
    pub total: u64,
}

impl ClassStats {
    pub fn from_counts(counts: [u64; 4]) -> Self {
        Self {
            counts,
            total: counts.iter().sum(),
        }
    }

    pub fn present_classes(&self) -> Vec<ClassId> {
        ClassId::ALL
            .into_iter()
            .filter(|c| self.counts[c.index()] > 0)
            .collect()
    }
}

pub fn class_census(mask: &LabelMask) -> ClassStats {
    let mut counts = [0u64; 4];
    for &c in mask.labels() {
        counts[c.index()] += 1;
    }
    ClassStats::from_counts(counts)
}

/// Fraction of the image's pixels belonging to each class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(pub [f64; 4]);

pub fn class_weights(stats: &ClassStats) -> Result<ClassWeights, FilterError> {
    if stats.total == 0 {
        return Err(FilterError::EmptyMask);
    }
    let total = stats.total as f64;
    Ok(ClassWeights(stats.counts.map(|n| n as f64 / total)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImbalanceMode {
    /// Largest class weight, a fraction in [0, 1].
    #[default]
    DominantFraction,
    /// Largest class weight divided by the smallest.
    MaxOverMin,
}

pub fn imbalance_ratio(weights: &ClassWeights, mode: ImbalanceMode) -> Result<f64, FilterError> {
    let w = &weights.0;
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match mode {
        ImbalanceMode::DominantFraction => Ok(max),
        ImbalanceMode::MaxOverMin => {
            if let Some(i) = w.iter().position(|&x| x <= 0.0) {
                return Err(FilterError::ZeroWeight(ClassId::ALL[i]));
            }
            let min = w.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(max / min)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Not yet filtered.
    #[default]
    Pending,
    Kept,
    DroppedRedundant,
    DroppedImbalanced,
    /// Extraction or restoration failed; never filtered.
    Failed,
}

/// Step 1. Entries with fewer than four classes are dropped; surviving
/// pending entries become kept. Other verdicts are left alone.
pub fn filter_redundant(entries: &mut [ManifestEntry]) {
    for entry in entries.iter_mut() {
        if entry.verdict == Verdict::Failed {
            continue;
        }
        let Some(stats) = entry.stats else { continue };
        if stats.present_classes().len() < 4 {
            entry.verdict = Verdict::DroppedRedundant;
        } else if entry.verdict == Verdict::Pending {
            entry.verdict = Verdict::Kept;
        }
    }
}

/// Step 2. Kept entries whose ratio is strictly above `threshold` are dropped.
/// Records the ratio of every entry that survived step 1.
pub fn filter_imbalanced(entries: &mut [ManifestEntry], threshold: f64, mode: ImbalanceMode) {
    for entry in entries.iter_mut() {
        if !matches!(entry.verdict, Verdict::Kept | Verdict::DroppedImbalanced) {
            continue;
        }
        let Some(weights) = entry.weights else { continue };
        let ratio = match imbalance_ratio(&weights, mode) {
            Ok(r) => r,
            // all four classes are present after step 1, so this is unreachable
            // for well-formed entries; treat it as infinitely imbalanced
            Err(_) => f64::INFINITY,
        };
        entry.imbalance_ratio = Some(ratio);
        if entry.verdict == Verdict::Kept && ratio > threshold {
            entry.verdict = Verdict::DroppedImbalanced;
        }
    }
}

/// Clears verdicts so both steps can be re-evaluated from scratch.
pub fn reset_verdicts(entries: &mut [ManifestEntry]) {
    for entry in entries.iter_mut() {
        if entry.verdict != Verdict::Failed {
            entry.verdict = Verdict::Pending;
            entry.imbalance_ratio = None;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub entries: usize,
    pub kept: usize,
    pub dropped_redundant: usize,
    pub dropped_imbalanced: usize,
    pub pending: usize,
    pub failed: usize,
    /// Highest ratio among entries that passed step 1, before step 2.
    pub max_ratio_before: Option<f64>,
    /// Highest ratio among kept entries.
    pub max_ratio_kept: Option<f64>,
    /// `max_ratio_before - max_ratio_kept`.
    pub ratio_reduction: Option<f64>,
}

impl SeriesSummary {
    fn add(&mut self, entry: &ManifestEntry) {
        self.entries += 1;
        match entry.verdict {
            Verdict::Pending => self.pending += 1,
            Verdict::Kept => self.kept += 1,
            Verdict::DroppedRedundant => self.dropped_redundant += 1,
            Verdict::DroppedImbalanced => self.dropped_imbalanced += 1,
            Verdict::Failed => self.failed += 1,
        }
        if let Some(ratio) = entry.imbalance_ratio {
            if matches!(entry.verdict, Verdict::Kept | Verdict::DroppedImbalanced) {
                self.max_ratio_before = Some(self.max_ratio_before.map_or(ratio, |m| m.max(ratio)));
            }
            if entry.verdict == Verdict::Kept {
                self.max_ratio_kept = Some(self.max_ratio_kept.map_or(ratio, |m| m.max(ratio)));
            }
        }
    }

    fn finish(&mut self) {
        self.ratio_reduction = match (self.max_ratio_before, self.max_ratio_kept) {
            (Some(before), Some(kept)) => Some(before - kept),
            _ => None,
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub series: BTreeMap<Series, SeriesSummary>,
    pub total: SeriesSummary,
    /// Reported kept-count goal per series; not enforced.
    pub target_per_series: usize,
}

pub const DEFAULT_SERIES_TARGET: usize = 1000;

pub fn summarize(entries: &[ManifestEntry], target_per_series: usize) -> DatasetSummary {
    let mut series: BTreeMap<Series, SeriesSummary> = BTreeMap::new();
    let mut total = SeriesSummary::default();
    for entry in entries {
        series.entry(entry.series).or_default().add(entry);
        total.add(entry);
    }
    series.values_mut().for_each(SeriesSummary::finish);
    total.finish();
    DatasetSummary {
        series,
        total,
        target_per_series,
    }
}

impl DatasetSummary {
    /// Fixed-width text table, one row per series plus a total row.
    pub fn render_table(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |r| format!("{:.2}%", r * 100.0));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>6} {:>7} {:>10} {:>11} {:>7} {:>13} {:>11} {:>10}",
            "series", "entries", "kept", "target", "redundant", "imbalanced", "failed",
            "ratio_before", "ratio_kept", "reduction"
        );
        let rows = self
            .series
            .iter()
            .map(|(s, row)| (s.to_string(), row))
            .chain(std::iter::once(("total".to_string(), &self.total)));
        for (name, row) in rows {
            let _ = writeln!(
                out,
                "{:<10} {:>8} {:>6} {:>7} {:>10} {:>11} {:>7} {:>13} {:>11} {:>10}",
                name,
                row.entries,
                row.kept,
                self.target_per_series,
                row.dropped_redundant,
                row.dropped_imbalanced,
                row.failed,
                pct(row.max_ratio_before),
                pct(row.max_ratio_kept),
                pct(row.ratio_reduction),
            );
        }
        out
    }
}
