//! Seeded synthetic spine-like fixtures.
//!
//! A sagittal slice is modeled as a vertical column of vertebral bodies
//! separated by discs, with the spinal canal running alongside. From a layout
//! we can render the clean label mask, a defective 16-color mask of the kind
//! produced by naive slice export, or raw label/intensity volumes.

use crate::label::{ClassId, LabelMask};
use crate::restore::{Rgb, RgbMask, BLACK};
use crate::volume::{Volume, VoxelData};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpineLayout {
    pub width: usize,
    pub height: usize,
    /// Column span of the vertebral column, `[start, end)`.
    pub body_cols: (usize, usize),
    /// Column span of the spinal canal.
    pub canal_cols: (usize, usize),
    pub first_row: usize,
    pub vertebra_rows: usize,
    pub disc_rows: usize,
    /// Vertebra/disc pairs to draw.
    pub levels: usize,
}

impl SpineLayout {
    /// Random layout whose structures cover most of the frame.
    pub fn random(rng: &mut impl Rng, width: usize, height: usize) -> Self {
        let margin = rng.random_range(1..=3);
        let body_w = width * rng.random_range(45..60) / 100;
        let canal_gap = rng.random_range(1..=2);
        let canal_w = (width / 6).max(3) + rng.random_range(0..=2);
        let body_start = margin;
        let canal_start = (body_start + body_w + canal_gap).min(width - canal_w - 1);
        let vertebra_rows = rng.random_range(7..=10);
        let disc_rows = rng.random_range(4..=5);
        let first_row = rng.random_range(1..=3);
        // keep a background margin below the last disc
        let levels = height.saturating_sub(first_row + 3) / (vertebra_rows + disc_rows);
        Self {
            width,
            height,
            body_cols: (body_start, body_start + body_w),
            canal_cols: (canal_start, canal_start + canal_w),
            first_row,
            vertebra_rows,
            disc_rows,
            levels: levels.max(1),
        }
    }

    /// Class at a pixel; also returns the vertebral level for per-instance shading.
    pub fn class_at(&self, row: usize, col: usize) -> (ClassId, usize) {
        if (self.canal_cols.0..self.canal_cols.1).contains(&col) {
            return (ClassId::SpinalCanal, 0);
        }
        if !(self.body_cols.0..self.body_cols.1).contains(&col) || row < self.first_row {
            return (ClassId::Background, 0);
        }
        let period = self.vertebra_rows + self.disc_rows;
        let level = (row - self.first_row) / period;
        if level >= self.levels {
            return (ClassId::Background, 0);
        }
        let offset = (row - self.first_row) % period;
        if offset < self.vertebra_rows {
            (ClassId::Vertebrae, level)
        } else {
            (ClassId::Ivd, level)
        }
    }

    pub fn labels(&self) -> LabelMask {
        let labels = (0..self.height)
            .flat_map(|r| (0..self.width).map(move |c| (r, c)))
            .map(|(r, c)| self.class_at(r, c).0)
            .collect();
        LabelMask::new(self.width, self.height, labels).expect("layout dimensions are positive")
    }
}

/// Fifteen non-black shades: five dark (vertebrae), five mid (canal), five light (discs).
pub const DARK_SHADES: [Rgb; 5] = [[40, 40, 40], [70, 20, 10], [20, 60, 30], [84, 84, 0], [10, 10, 55]];
pub const MID_SHADES: [Rgb; 5] = [[100, 100, 100], [0, 140, 60], [120, 90, 160], [169, 0, 0], [90, 150, 90]];
pub const LIGHT_SHADES: [Rgb; 5] = [[200, 200, 200], [180, 220, 250], [255, 255, 255], [230, 170, 30], [170, 170, 255]];

fn shade_for(class: ClassId, level: usize, extra: usize) -> Rgb {
    match class {
        ClassId::Background => BLACK,
        ClassId::Vertebrae => DARK_SHADES[(level + extra) % 5],
        ClassId::SpinalCanal => MID_SHADES[(level + extra) % 5],
        ClassId::Ivd => LIGHT_SHADES[(level + extra) % 5],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Defect {
    /// Vertebrae drawn in dark shades instead of red.
    DarkVertebrae,
    /// Vertebrae missing entirely; only canal and discs remain.
    MissingVertebrae,
}

/// Renders a defective mask: per-instance shades, one-pixel outlines around
/// discs, and scattered singleton noise. Every one of the sixteen colors appears.
pub fn defective_mask(layout: &SpineLayout, defect: Defect, rng: &mut impl Rng) -> RgbMask {
    let (w, h) = (layout.width, layout.height);
    let labels = layout.labels();
    let mut mask = RgbMask::filled(w, h, BLACK).expect("positive dimensions");
    let canal_shift = rng.random_range(0..5);
    for r in 0..h {
        for c in 0..w {
            let (class, level) = layout.class_at(r, c);
            let color = match (class, defect) {
                (ClassId::Vertebrae, Defect::MissingVertebrae) => BLACK,
                (ClassId::SpinalCanal, _) => shade_for(class, r * 5 / h, canal_shift),
                _ => shade_for(class, level, 0),
            };
            mask.set(r, c, color);
        }
    }

    // outline ring just outside each disc, in a mid shade
    let outline = MID_SHADES[rng.random_range(0..5)];
    for r in 0..h {
        for c in 0..w {
            if labels.get(r, c) == ClassId::Ivd {
                continue;
            }
            let touches_disc = [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)].iter().any(|&(dr, dc)| {
                match (r.checked_add_signed(dr), c.checked_add_signed(dc)) {
                    (Some(rr), Some(cc)) if rr < h && cc < w => labels.get(rr, cc) == ClassId::Ivd,
                    _ => false,
                }
            });
            if touches_disc && rng.random_bool(0.7) {
                mask.set(r, c, outline);
            }
        }
    }

    // singleton noise, guaranteeing every shade shows up at least once
    let all: Vec<Rgb> = DARK_SHADES
        .iter()
        .chain(&MID_SHADES)
        .chain(&LIGHT_SHADES)
        .copied()
        .collect();
    let noise = (w * h / 80).max(all.len());
    for k in 0..noise {
        let color = if k < all.len() {
            all[k]
        } else {
            all[rng.random_range(0..all.len())]
        };
        let r = rng.random_range(0..h);
        let c = rng.random_range(0..w);
        mask.set(r, c, color);
    }
    mask
}

/// `count` defective masks alternating the two defect kinds.
pub fn defective_fixture_set(rng: &mut impl Rng, count: usize, width: usize, height: usize) -> Vec<(SpineLayout, Defect, RgbMask)> {
    (0..count)
        .map(|k| {
            let layout = SpineLayout::random(rng, width, height);
            let defect = if k % 2 == 0 {
                Defect::DarkVertebrae
            } else {
                Defect::MissingVertebrae
            };
            let mask = defective_mask(&layout, defect, rng);
            (layout, defect, mask)
        })
        .collect()
}

/// Raw label codes in the style of public lumbar-spine datasets: vertebrae
/// 1..=25, canal 100, discs 201..=225.
pub fn label_code(class: ClassId, level: usize) -> u8 {
    match class {
        ClassId::Background => 0,
        ClassId::Vertebrae => 1 + (level % 25) as u8,
        ClassId::SpinalCanal => 100,
        ClassId::Ivd => 201 + (level % 25) as u8,
    }
}

/// Mask volume whose z-slices are the given layouts, rendered as raw label codes.
/// All layouts must share the same size.
pub fn label_volume(layouts: &[SpineLayout]) -> Volume {
    let (w, h) = (layouts[0].width, layouts[0].height);
    let voxels = layouts
        .iter()
        .flat_map(|l| {
            (0..h).flat_map(move |r| {
                (0..w).map(move |c| {
                    let (class, level) = l.class_at(r, c);
                    label_code(class, level)
                })
            })
        })
        .collect();
    Volume::new([w, h, layouts.len()], VoxelData::U8(voxels)).expect("voxel count matches layouts")
}

/// MR-like intensity volume matching the layouts, with seeded noise.
pub fn intensity_volume(layouts: &[SpineLayout], rng: &mut impl Rng) -> Volume {
    let (w, h) = (layouts[0].width, layouts[0].height);
    let mut voxels = Vec::with_capacity(w * h * layouts.len());
    for l in layouts {
        for r in 0..h {
            for c in 0..w {
                let base = match l.class_at(r, c).0 {
                    ClassId::Background => 80,
                    ClassId::Vertebrae => 600,
                    ClassId::SpinalCanal => 1400,
                    ClassId::Ivd => 1000,
                };
                voxels.push(base + rng.random_range(-40i16..=40));
            }
        }
    }
    Volume::new([w, h, layouts.len()], VoxelData::I16(voxels)).expect("voxel count matches layouts")
}
