//! Line-delimited JSON manifest: one header record, then one record per slice.

use crate::filter::{ClassStats, ClassWeights, ImbalanceMode, Verdict};
use crate::volume::SliceSpec;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const MANIFEST_FORMAT: &str = "lumbarkit-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest is empty")]
    Empty,
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("not a {MANIFEST_FORMAT} file (format {0:?})")]
    WrongFormat(String),
    #[error("unsupported manifest version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Series {
    T1,
    T2,
    #[serde(rename = "T2_SPACE")]
    T2Space,
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Series::T1 => "T1",
            Series::T2 => "T2",
            Series::T2Space => "T2_SPACE",
        })
    }
}

impl FromStr for Series {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "T1" => Ok(Series::T1),
            "T2" => Ok(Series::T2),
            "T2_SPACE" | "T2SPACE" => Ok(Series::T2Space),
            _ => Err(format!("unknown series {s:?}")),
        }
    }
}

impl Series {
    /// Infers the series from a volume stem such as `12_t2_SPACE` or `3_t1`.
    pub fn from_volume_name(stem: &str) -> Option<Series> {
        let lower = stem.to_ascii_lowercase();
        if lower.ends_with("t2_space") || lower.ends_with("t2space") {
            Some(Series::T2Space)
        } else if lower.ends_with("t2") {
            Some(Series::T2)
        } else if lower.ends_with("t1") {
            Some(Series::T1)
        } else {
            None
        }
    }
}

/// Pipeline stage reached by the manifest as a whole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Extracted,
    Restored,
    Filtered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSettings {
    pub threshold: f64,
    pub mode: ImbalanceMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub version: u32,
    pub stage: Stage,
    /// Settings of the filter run that produced the current verdicts.
    pub filter: Option<FilterSettings>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestoreInfo {
    pub converged: bool,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub volume: String,
    pub series: Series,
    pub slice_index: Option<usize>,
    pub image_ref: String,
    pub mask_ref: String,
    pub restored_ref: Option<String>,
    pub slice_spec: SliceSpec,
    /// Row and column spacing of the slice in volume units.
    pub pixel_spacing: [f64; 2],
    pub stats: Option<ClassStats>,
    pub weights: Option<ClassWeights>,
    pub imbalance_ratio: Option<f64>,
    pub verdict: Verdict,
    pub restore: Option<RestoreInfo>,
    pub split: Option<String>,
    pub error: Option<String>,
}

impl ManifestEntry {
    pub fn new(image_ref: impl Into<String>, mask_ref: impl Into<String>, series: Series) -> Self {
        let image_ref = image_ref.into();
        Self {
            id: image_ref.clone(),
            volume: String::new(),
            series,
            slice_index: None,
            image_ref,
            mask_ref: mask_ref.into(),
            restored_ref: None,
            slice_spec: SliceSpec::default(),
            pixel_spacing: [1.0, 1.0],
            stats: None,
            weights: None,
            imbalance_ratio: None,
            verdict: Verdict::Pending,
            restore: None,
            split: None,
            error: None,
        }
    }

    pub fn fail(&mut self, reason: impl Into<String>) {
        self.verdict = Verdict::Failed;
        self.error = Some(reason.into());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(stage: Stage, entries: Vec<ManifestEntry>) -> Self {
        Self {
            header: ManifestHeader {
                format: MANIFEST_FORMAT.to_string(),
                version: MANIFEST_VERSION,
                stage,
                filter: None,
            },
            entries,
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, ManifestError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(ManifestError::Empty)?;
        let header: ManifestHeader =
            serde_json::from_str(first).map_err(|source| ManifestError::Json { line: 1, source })?;
        if header.format != MANIFEST_FORMAT {
            return Err(ManifestError::WrongFormat(header.format));
        }
        if header.version != MANIFEST_VERSION {
            return Err(ManifestError::Version(header.version));
        }
        let entries = lines
            .map(|(i, line)| {
                serde_json::from_str(line).map_err(|source| ManifestError::Json {
                    line: i + 1,
                    source,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { header, entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_from_names() {
        assert_eq!(Series::from_volume_name("1_t1"), Some(Series::T1));
        assert_eq!(Series::from_volume_name("7_t2"), Some(Series::T2));
        assert_eq!(Series::from_volume_name("7_t2_SPACE"), Some(Series::T2Space));
        assert_eq!(Series::from_volume_name("scan"), None);
        assert_eq!("t2_space".parse::<Series>(), Ok(Series::T2Space));
    }

    #[test]
    fn jsonl_round_trip() {
        let mut entry = ManifestEntry::new("images/a.png", "masks/a.png", Series::T2Space);
        entry.stats = Some(ClassStats::from_counts([1, 2, 3, 4]));
        entry.imbalance_ratio = Some(0.4);
        let mut failed = ManifestEntry::new("images/b.mha", "masks/b.mha", Series::T1);
        failed.fail("truncated payload");
        let manifest = Manifest::new(Stage::Extracted, vec![entry, failed]);
        let text = manifest.to_jsonl();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("\"T2_SPACE\""));
        assert_eq!(Manifest::from_jsonl(&text).unwrap(), manifest);
    }

    #[test]
    fn foreign_header_is_rejected() {
        let text = "{\"format\":\"other\",\"version\":1,\"stage\":\"extracted\",\"filter\":null}\n";
        assert!(matches!(
            Manifest::from_jsonl(text),
            Err(ManifestError::WrongFormat(_))
        ));
        assert!(matches!(Manifest::from_jsonl(""), Err(ManifestError::Empty)));
    }
}
