//! Curation and evaluation toolkit for lumbar-spine MRI segmentation datasets.
//!
//! - [`volume`]: MetaImage volumes and orientation-corrected slice extraction
//! - [`raster`]: 8-bit rasters, PNG I/O, grayscale label encoding
//! - [`restore`]: six-step repair of defective color masks
//! - [`filter`]: class census, class weights and imbalance filtering
//! - [`metrics`]: IoU, Dice, ASD, NSD, precision, recall, F1
//! - [`loss`]: focal, dice and combined losses with gradient checks
//! - [`manifest`]: the per-slice dataset ledger

pub mod filter;
pub mod label;
pub mod loss;
pub mod manifest;
pub mod metrics;
pub mod raster;
pub mod restore;
pub mod synthetic;
pub mod volume;

pub use label::{ClassId, LabelMask};
