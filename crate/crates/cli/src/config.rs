//! Pipeline settings: TOML file sections mirror the command-line flags.
//!
//! ```toml
//! [paths]
//! input = "data"
//! output = "work"
//!
//! [restore]
//! dark = [1, 84]
//! connectivity = "eight"
//!
//! [filter]
//! threshold = 0.55
//! imbalance_mode = "dominant_fraction"
//!
//! [metrics]
//! tau = 1.0
//!
//! [loss]
//! gamma = 4.0
//! alpha_mix = 0.6
//!
//! [run]
//! workers = 4
//! ```

use crate::error::{invalid, CliError, Result};
use lumbarkit::filter::{ImbalanceMode, DEFAULT_SERIES_TARGET};
use lumbarkit::loss::LossParams;
use lumbarkit::metrics::MetricConfig;
use lumbarkit::restore::{Neighborhood, RestoreConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Defaults to `manifest.jsonl` inside the output directory.
    pub manifest: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub threshold: f64,
    pub imbalance_mode: ImbalanceMode,
    pub target_per_series: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            threshold: 0.55,
            imbalance_mode: ImbalanceMode::DominantFraction,
            target_per_series: DEFAULT_SERIES_TARGET,
        }
    }
}

/// Where evaluation takes pixel spacing from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacingSource {
    /// Spacing recorded in the manifest at extraction.
    #[default]
    Manifest,
    /// One unit per pixel on both axes.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub tau: f64,
    pub include_background_in_means: bool,
    pub connectivity: Neighborhood,
    pub spacing: SpacingSource,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        let m = MetricConfig::default();
        Self {
            tau: m.tau,
            include_background_in_means: m.include_background_in_means,
            connectivity: m.connectivity,
            spacing: SpacingSource::Manifest,
        }
    }
}

impl MetricsConfig {
    pub fn metric_config(&self, pixel_spacing: [f64; 2]) -> MetricConfig {
        MetricConfig {
            tau: self.tau,
            include_background_in_means: self.include_background_in_means,
            connectivity: self.connectivity,
            spacing: match self.spacing {
                SpacingSource::Manifest => pixel_spacing,
                SpacingSource::Unit => [1.0, 1.0],
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    #[serde(flatten)]
    pub params: LossParams,
    pub seed: u64,
    pub count: usize,
    /// Allowed absolute deviation when verifying a vector file.
    pub tolerance: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            params: LossParams::default(),
            seed: 0,
            count: 16,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
    pub force: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub restore: RestoreConfig,
    pub filter: FilterConfig,
    pub metrics: MetricsConfig,
    pub loss: LossConfig,
    pub run: RunConfig,
}

/// Values given on the command line or through the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub imbalance_mode: Option<ImbalanceMode>,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha_mix: Option<f64>,
    pub workers: Option<usize>,
    pub force: bool,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub tolerance: Option<f64>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    /// Flags win over file values.
    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *slot = v.clone();
            }
        }
        let wrap = |p: &Option<PathBuf>| p.clone().map(Some);
        set(&mut self.paths.input, &wrap(&o.input));
        set(&mut self.paths.output, &wrap(&o.output));
        set(&mut self.paths.manifest, &wrap(&o.manifest));
        set(&mut self.paths.predictions, &wrap(&o.predictions));
        set(&mut self.filter.threshold, &o.threshold);
        set(&mut self.filter.imbalance_mode, &o.imbalance_mode);
        set(&mut self.metrics.tau, &o.tau);
        set(&mut self.loss.params.gamma, &o.gamma);
        set(&mut self.loss.params.alpha_mix, &o.alpha_mix);
        set(&mut self.run.workers, &o.workers);
        set(&mut self.loss.seed, &o.seed);
        set(&mut self.loss.count, &o.count);
        set(&mut self.loss.tolerance, &o.tolerance);
        self.run.force |= o.force;
    }

    pub fn validate(&self) -> Result<()> {
        self.restore.validate().map_err(|e| invalid(e.to_string()))?;
        let t = self.filter.threshold;
        if !(t.is_finite() && t >= 0.0) {
            return Err(invalid(format!("threshold must be a finite value >= 0, got {t}")));
        }
        self.metrics
            .metric_config([1.0, 1.0])
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        self.loss.params.validate().map_err(|e| invalid(e.to_string()))?;
        if !(self.loss.tolerance >= 0.0) {
            return Err(invalid(format!("tolerance must be >= 0, got {}", self.loss.tolerance)));
        }
        Ok(())
    }

    pub fn output_dir(&self) -> Result<&Path> {
        self.paths
            .output
            .as_deref()
            .ok_or_else(|| invalid("no output directory; pass --output or set paths.output"))
    }

    pub fn input_dir(&self) -> Result<&Path> {
        self.paths
            .input
            .as_deref()
            .ok_or_else(|| invalid("no input directory; pass --input or set paths.input"))
    }

    pub fn manifest_path(&self) -> Result<PathBuf> {
        match &self.paths.manifest {
            Some(p) => Ok(p.clone()),
            None => Ok(self.output_dir()?.join("manifest.jsonl")),
        }
    }
}
