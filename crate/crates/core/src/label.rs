//! Canonical four-class label grids.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Segmentation class of a single pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum ClassId {
    Background = 0,
    Vertebrae = 1,
    SpinalCanal = 2,
    Ivd = 3,
}

impl ClassId {
    pub const ALL: [ClassId; 4] = [
        ClassId::Background,
        ClassId::Vertebrae,
        ClassId::SpinalCanal,
        ClassId::Ivd,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<ClassId> {
        Self::ALL.get(index).copied()
    }

    pub const fn name(self) -> &'static str {
        match self {
            ClassId::Background => "background",
            ClassId::Vertebrae => "vertebrae",
            ClassId::SpinalCanal => "spinal_canal",
            ClassId::Ivd => "ivd",
        }
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("mask dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("expected {expected} labels for the given dimensions, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("label value {0} is not a class index (0..=3)")]
    InvalidLabel(u8),
}

/// Row-major grid of class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    labels: Vec<ClassId>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, labels: Vec<ClassId>) -> Result<Self, LabelError> {
        if width == 0 || height == 0 {
            return Err(LabelError::EmptyDimensions { width, height });
        }
        if labels.len() != width * height {
            return Err(LabelError::LengthMismatch {
                expected: width * height,
                actual: labels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, class: ClassId) -> Result<Self, LabelError> {
        Self::new(width, height, vec![class; width * height])
    }

    /// Builds a mask from raw class indices.
    pub fn from_indices(width: usize, height: usize, indices: &[u8]) -> Result<Self, LabelError> {
        let labels = indices
            .iter()
            .map(|&v| ClassId::from_index(v as usize).ok_or(LabelError::InvalidLabel(v)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(width, height, labels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> ClassId {
        self.labels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, class: ClassId) {
        self.labels[row * self.width + col] = class;
    }

    pub fn same_shape(&self, other: &LabelMask) -> bool {
        self.width == other.width && self.height == other.height
    }
}
