//! Adaptive pixel transformation: repairs extracted color masks into the
//! four canonical classes.
//!
//! The six steps are exposed individually and composed by [`apta`]. Every
//! step reads from an immutable snapshot of its input and writes a fresh
//! mask, so results do not depend on scan order.

use crate::label::{ClassId, LabelMask};
use crate::raster::{PixelFormat, Raster2D};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rgb = [u8; 3];

pub const BLACK: Rgb = [0, 0, 0];
pub const RED: Rgb = [255, 0, 0];
pub const GREEN: Rgb = [0, 255, 0];
pub const BLUE: Rgb = [0, 0, 255];

/// Canonical colors in tie-break order (background < vertebrae < spinal canal < IVD
/// under the default color map).
pub const CANONICAL: [Rgb; 4] = [BLACK, RED, GREEN, BLUE];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RestoreError {
    #[error("pixel ({row}, {col}) with max channel {intensity} falls in no palette range")]
    UncoveredIntensity { row: usize, col: usize, intensity: u8 },
    #[error("invalid palette: {0}")]
    InvalidPalette(String),
    #[error("pixel ({row}, {col}) has non-canonical color {color:?}")]
    NonCanonical { row: usize, col: usize, color: Rgb },
    #[error("no fixed point within {rounds} rounds")]
    NoConvergence { rounds: usize, last: Box<LabelMask> },
    #[error("max_rounds must be at least 1")]
    ZeroRounds,
    #[error("invalid restore configuration: {0}")]
    Config(String),
    #[error("mask dimensions must be positive and match the pixel buffer")]
    BadDimensions,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbMask {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl RgbMask {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self, RestoreError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(RestoreError::BadDimensions);
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self, RestoreError> {
        Self::new(width, height, vec![color; width * height])
    }

    /// Gray rasters become (v, v, v) pixels.
    pub fn from_raster(raster: &Raster2D) -> Result<Self, RestoreError> {
        let pixels = match raster.format() {
            PixelFormat::Gray8 => raster.pixels().iter().map(|&v| [v, v, v]).collect(),
            PixelFormat::Rgb8 => raster
                .pixels()
                .chunks_exact(3)
                .map(|c| [c[0], c[1], c[2]])
                .collect(),
        };
        Self::new(raster.width(), raster.height(), pixels)
    }

    pub fn to_raster(&self) -> Raster2D {
        Raster2D::new(
            self.width,
            self.height,
            PixelFormat::Rgb8,
            self.pixels.iter().flatten().copied().collect(),
        )
        .expect("three bytes per pixel")
    }

    /// Paints a label mask with the palette's canonical colors.
    pub fn from_labels(mask: &LabelMask, palette: &PaletteRules) -> Self {
        let pixels = mask.labels().iter().map(|&c| palette.color_of(c)).collect();
        Self {
            width: mask.width(),
            height: mask.height(),
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> Rgb {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, color: Rgb) {
        self.pixels[row * self.width + col] = color;
    }

    fn map_pixels(&self, mut f: impl FnMut(usize, usize, Rgb) -> Rgb) -> RgbMask {
        let pixels = (0..self.height)
            .flat_map(|row| (0..self.width).map(move |col| (row, col)))
            .map(|(row, col)| f(row, col, self.get(row, col)))
            .collect();
        RgbMask {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// In-bounds neighbor colors in fixed raster order.
    pub fn neighbors(&self, row: usize, col: usize, nb: Neighborhood) -> Vec<Rgb> {
        nb.offsets()
            .iter()
            .filter_map(|&(dr, dc)| {
                let r = row.checked_add_signed(dr)?;
                let c = col.checked_add_signed(dc)?;
                (r < self.height && c < self.width).then(|| self.get(r, c))
            })
            .collect()
    }

    pub fn distinct_colors(&self) -> Vec<Rgb> {
        let mut colors = self.pixels.clone();
        colors.sort_unstable();
        colors.dedup();
        colors
    }
}

/// Which pixels count as neighbors for majority votes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    Four,
    #[default]
    Eight,
}

impl Neighborhood {
    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Neighborhood::Four => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Neighborhood::Eight => &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        }
    }
}

/// Inclusive intensity interval on the maximum RGB channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[u8; 2]", into = "[u8; 2]")]
pub struct IntensityRange {
    pub lo: u8,
    pub hi: u8,
}

impl IntensityRange {
    pub const fn new(lo: u8, hi: u8) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: u8) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn overlaps(&self, other: &IntensityRange) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

impl From<[u8; 2]> for IntensityRange {
    fn from([lo, hi]: [u8; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<IntensityRange> for [u8; 2] {
    fn from(r: IntensityRange) -> Self {
        [r.lo, r.hi]
    }
}

/// Shade ranges for the initial recoloring and the color-to-class map.
///
/// Dark shades become red, mid-range shades green and light shades blue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PaletteRules {
    pub dark: IntensityRange,
    pub mid: IntensityRange,
    pub light: IntensityRange,
    pub green_class: ClassId,
    pub blue_class: ClassId,
}

impl Default for PaletteRules {
    fn default() -> Self {
        Self {
            dark: IntensityRange::new(1, 84),
            mid: IntensityRange::new(85, 169),
            light: IntensityRange::new(170, 255),
            green_class: ClassId::SpinalCanal,
            blue_class: ClassId::Ivd,
        }
    }
}

impl PaletteRules {
    pub fn validate(&self) -> Result<(), RestoreError> {
        let ranges = [("dark", self.dark), ("mid", self.mid), ("light", self.light)];
        for (name, r) in ranges {
            if r.lo > r.hi {
                return Err(RestoreError::InvalidPalette(format!("{name} range is empty")));
            }
            if r.contains(0) {
                return Err(RestoreError::InvalidPalette(format!(
                    "{name} range includes 0, which is reserved for background"
                )));
            }
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if ranges[i].1.overlaps(&ranges[j].1) {
                    return Err(RestoreError::InvalidPalette(format!(
                        "{} and {} ranges overlap",
                        ranges[i].0, ranges[j].0
                    )));
                }
            }
        }
        let allowed = [ClassId::SpinalCanal, ClassId::Ivd];
        if !allowed.contains(&self.green_class)
            || !allowed.contains(&self.blue_class)
            || self.green_class == self.blue_class
        {
            return Err(RestoreError::InvalidPalette(
                "green and blue must map to distinct classes among spinal_canal and ivd".into(),
            ));
        }
        Ok(())
    }

    pub fn class_of(&self, color: Rgb) -> Option<ClassId> {
        match color {
            BLACK => Some(ClassId::Background),
            RED => Some(ClassId::Vertebrae),
            GREEN => Some(self.green_class),
            BLUE => Some(self.blue_class),
            _ => None,
        }
    }

    pub fn color_of(&self, class: ClassId) -> Rgb {
        match class {
            ClassId::Background => BLACK,
            ClassId::Vertebrae => RED,
            c if c == self.green_class => GREEN,
            _ => BLUE,
        }
    }

    fn recolor(&self, intensity: u8) -> Option<Rgb> {
        [(self.dark, RED), (self.mid, GREEN), (self.light, BLUE)]
            .into_iter()
            .find(|(range, _)| range.contains(intensity))
            .map(|(_, color)| color)
    }
}

fn is_canonical(color: Rgb) -> bool {
    CANONICAL.contains(&color)
}

/// Most frequent color; ties go to the earliest canonical color, then to the
/// smallest RGB value for anything non-canonical.
fn most_common(colors: &[Rgb]) -> Option<Rgb> {
    let rank = |c: &Rgb| {
        (
            CANONICAL.iter().position(|k| k == c).unwrap_or(CANONICAL.len()),
            *c,
        )
    };
    let mut tally: Vec<(Rgb, usize)> = Vec::with_capacity(4);
    for &c in colors {
        match tally.iter_mut().find(|(k, _)| *k == c) {
            Some((_, n)) => *n += 1,
            None => tally.push((c, 1)),
        }
    }
    tally
        .into_iter()
        .max_by(|(a, na), (b, nb)| na.cmp(nb).then_with(|| rank(b).cmp(&rank(a))))
        .map(|(c, _)| c)
}

/// Step 1: recolor non-canonical pixels by the shade range of their maximum channel.
pub fn replace_color_ranges(mask: &RgbMask, rules: &PaletteRules) -> Result<RgbMask, RestoreError> {
    let mut uncovered = None;
    let out = mask.map_pixels(|row, col, px| {
        if is_canonical(px) {
            return px;
        }
        let intensity = px.into_iter().max().unwrap_or(0);
        rules.recolor(intensity).unwrap_or_else(|| {
            uncovered.get_or_insert(RestoreError::UncoveredIntensity { row, col, intensity });
            px
        })
    });
    match uncovered {
        Some(err) => Err(err),
        None => Ok(out),
    }
}

/// Step 2: a pixel takes the color of the first adjacent pixel whose color
/// matches its own.
///
/// Matching is exact equality, so on canonical masks this pass never changes
/// a color; it is kept as an explicit stage of the pipeline.
pub fn propagate_neighbor_colors(mask: &RgbMask, nb: Neighborhood) -> RgbMask {
    mask.map_pixels(|row, col, px| {
        mask.neighbors(row, col, nb)
            .into_iter()
            .find(|&n| n == px)
            .unwrap_or(px)
    })
}

/// Step 3: a pixel whose color is outvoted by its neighbors takes the most
/// common neighboring color. A pixel tied with the winning count keeps its color.
pub fn remove_outlines(mask: &RgbMask, nb: Neighborhood) -> RgbMask {
    mask.map_pixels(|row, col, px| {
        let neighbors = mask.neighbors(row, col, nb);
        let Some(winner) = most_common(&neighbors) else {
            return px;
        };
        let count = |c: Rgb| neighbors.iter().filter(|&&n| n == c).count();
        if count(px) < count(winner) {
            winner
        } else {
            px
        }
    })
}

/// Step 4: a pixel whose two adjacent pixels both differ from it takes the
/// most common color of its `nb` neighborhood.
///
/// The adjacent pair is the left and right neighbor. Pixels on the left or
/// right image edge have no such pair and use their in-bounds four-neighbors
/// instead; the rule needs at least two adjacent pixels to fire.
pub fn fix_disagreeing_borders(mask: &RgbMask, nb: Neighborhood) -> RgbMask {
    mask.map_pixels(|row, col, px| {
        let adjacent = mask.adjacent_pair(row, col);
        if adjacent.len() < 2 || adjacent.contains(&px) {
            return px;
        }
        most_common(&mask.neighbors(row, col, nb)).unwrap_or(px)
    })
}

impl RgbMask {
    fn adjacent_pair(&self, row: usize, col: usize) -> Vec<Rgb> {
        if col > 0 && col + 1 < self.width {
            vec![self.get(row, col - 1), self.get(row, col + 1)]
        } else {
            self.neighbors(row, col, Neighborhood::Four)
        }
    }
}

/// Step 5: a pixel sharing its color with no neighbor takes the most common
/// neighboring color.
pub fn replace_singletons(mask: &RgbMask, nb: Neighborhood) -> RgbMask {
    mask.map_pixels(|row, col, px| {
        let neighbors = mask.neighbors(row, col, nb);
        if neighbors.is_empty() || neighbors.contains(&px) {
            return px;
        }
        most_common(&neighbors).unwrap_or(px)
    })
}

/// True when the pixel has neighbors and none of them shares its color.
pub fn is_singleton(mask: &RgbMask, row: usize, col: usize, nb: Neighborhood) -> bool {
    let neighbors = mask.neighbors(row, col, nb);
    !neighbors.is_empty() && !neighbors.contains(&mask.get(row, col))
}

/// Step 6: if green or blue is present but red is not, green and blue become red.
pub fn ensure_red_presence(mask: &RgbMask) -> RgbMask {
    let has = |c: Rgb| mask.pixels.contains(&c);
    if has(RED) || !(has(GREEN) || has(BLUE)) {
        return mask.clone();
    }
    mask.map_pixels(|_, _, px| if px == GREEN || px == BLUE { RED } else { px })
}

/// Full restoration settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RestoreConfig {
    #[serde(flatten)]
    pub palette: PaletteRules,
    pub connectivity: Neighborhood,
    pub max_rounds: usize,
}

impl Default for RestoreConfig {
    fn default() -> Self {
        Self {
            palette: PaletteRules::default(),
            connectivity: Neighborhood::Eight,
            max_rounds: 16,
        }
    }
}

impl RestoreConfig {
    /// Parses `key = value` text; absent keys keep their defaults.
    ///
    /// ```text
    /// dark = [1, 84]
    /// connectivity = "four"
    /// max_rounds = 8
    /// ```
    pub fn from_kv_text(text: &str) -> Result<Self, RestoreError> {
        let config: RestoreConfig =
            toml::from_str(text).map_err(|e| RestoreError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), RestoreError> {
        self.palette.validate()?;
        if self.max_rounds == 0 {
            return Err(RestoreError::ZeroRounds);
        }
        Ok(())
    }
}

/// Converts a fully canonical mask to class labels.
pub fn to_label_mask(mask: &RgbMask, palette: &PaletteRules) -> Result<LabelMask, RestoreError> {
    let labels = mask
        .pixels
        .iter()
        .enumerate()
        .map(|(i, &color)| {
            palette.class_of(color).ok_or(RestoreError::NonCanonical {
                row: i / mask.width,
                col: i % mask.width,
                color,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LabelMask::new(mask.width, mask.height, labels).expect("mask dimensions already validated"))
}

/// Result of a converged restoration.
#[derive(Debug, Clone, PartialEq)]
pub struct Restored {
    pub mask: LabelMask,
    /// Repeat rounds run, including the one that confirmed the fixed point.
    pub rounds: usize,
}

fn cleanup_round(mask: &RgbMask, nb: Neighborhood) -> RgbMask {
    let mask = propagate_neighbor_colors(mask, nb);
    let mask = remove_outlines(&mask, nb);
    let mask = fix_disagreeing_borders(&mask, nb);
    let mask = replace_singletons(&mask, nb);
    ensure_red_presence(&mask)
}

/// Runs steps 1 through 6 once, then repeats steps 2 through 6 until a round
/// changes nothing or `max_rounds` repeats have run.
///
/// On [`RestoreError::NoConvergence`] the error carries the last iterate.
pub fn apta(
    mask: &RgbMask,
    rules: &PaletteRules,
    nb: Neighborhood,
    max_rounds: usize,
) -> Result<Restored, RestoreError> {
    if max_rounds == 0 {
        return Err(RestoreError::ZeroRounds);
    }
    rules.validate()?;
    let recolored = replace_color_ranges(mask, rules)?;
    let mut current = cleanup_round(&recolored, nb);
    for round in 1..=max_rounds {
        let next = cleanup_round(&current, nb);
        if next == current {
            return Ok(Restored {
                mask: to_label_mask(&current, rules)?,
                rounds: round,
            });
        }
        current = next;
    }
    Err(RestoreError::NoConvergence {
        rounds: max_rounds,
        last: Box::new(to_label_mask(&current, rules)?),
    })
}

/// [`apta`] with settings taken from a [`RestoreConfig`].
pub fn restore(mask: &RgbMask, config: &RestoreConfig) -> Result<Restored, RestoreError> {
    apta(mask, &config.palette, config.connectivity, config.max_rounds)
}
