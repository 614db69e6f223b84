//! 2D 8-bit rasters, PNG I/O and the canonical grayscale label encoding.

use crate::label::{ClassId, LabelMask};
use image::{ColorType, ImageFormat};
use std::io::Cursor;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("raster {width}x{height} {format:?} needs {expected} bytes, got {actual}")]
    LengthMismatch {
        width: usize,
        height: usize,
        format: PixelFormat,
        expected: usize,
        actual: usize,
    },
    #[error("gray level {level} at pixel {index} is not a class level")]
    UnknownLevel { index: usize, level: u8 },
    #[error("expected a {expected:?} raster, got {actual:?}")]
    WrongFormat {
        expected: PixelFormat,
        actual: PixelFormat,
    },
    #[error("unsupported image color type {0:?}")]
    UnsupportedColor(ColorType),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelFormat {
    Gray8,
    Rgb8,
}

impl PixelFormat {
    pub const fn channels(self) -> usize {
        match self {
            PixelFormat::Gray8 => 1,
            PixelFormat::Rgb8 => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster2D {
    width: usize,
    height: usize,
    format: PixelFormat,
    pixels: Vec<u8>,
}

impl Raster2D {
    pub fn new(
        width: usize,
        height: usize,
        format: PixelFormat,
        pixels: Vec<u8>,
    ) -> Result<Self, RasterError> {
        let expected = width * height * format.channels();
        if pixels.len() != expected {
            return Err(RasterError::LengthMismatch {
                width,
                height,
                format,
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            format,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn format(&self) -> PixelFormat {
        self.format
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    fn remap(&self, width: usize, height: usize, source: impl Fn(usize, usize) -> (usize, usize)) -> Raster2D {
        let ch = self.format.channels();
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in 0..height {
            for col in 0..width {
                let (sr, sc) = source(row, col);
                let at = (sr * self.width + sc) * ch;
                pixels.extend_from_slice(&self.pixels[at..at + ch]);
            }
        }
        Raster2D {
            width,
            height,
            format: self.format,
            pixels,
        }
    }

    pub fn rotate_clockwise(&self) -> Raster2D {
        let h = self.height;
        self.remap(self.height, self.width, |row, col| (h - 1 - col, row))
    }

    pub fn flip_horizontal(&self) -> Raster2D {
        let w = self.width;
        self.remap(self.width, self.height, |row, col| (row, w - 1 - col))
    }

    pub fn flip_vertical(&self) -> Raster2D {
        let h = self.height;
        self.remap(self.width, self.height, |row, col| (h - 1 - row, col))
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>, RasterError> {
        let color = match self.format {
            PixelFormat::Gray8 => image::ExtendedColorType::L8,
            PixelFormat::Rgb8 => image::ExtendedColorType::Rgb8,
        };
        let mut out = Cursor::new(Vec::new());
        image::write_buffer_with_format(
            &mut out,
            &self.pixels,
            self.width as u32,
            self.height as u32,
            color,
            ImageFormat::Png,
        )?;
        Ok(out.into_inner())
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
        let (width, height) = (img.width() as usize, img.height() as usize);
        match img.color() {
            ColorType::L8 => Raster2D::new(width, height, PixelFormat::Gray8, img.into_luma8().into_raw()),
            ColorType::Rgb8 => Raster2D::new(width, height, PixelFormat::Rgb8, img.into_rgb8().into_raw()),
            other => Err(RasterError::UnsupportedColor(other)),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        std::fs::write(path, self.to_png_bytes()?)?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self, RasterError> {
        Self::from_png_bytes(&std::fs::read(path)?)
    }
}

/// Gray level of each class in the canonical encoding.
pub const CLASS_LEVELS: [u8; 4] = [0, 85, 170, 255];

pub fn class_level(class: ClassId) -> u8 {
    CLASS_LEVELS[class.index()]
}

pub fn encode_label_raster(mask: &LabelMask) -> Raster2D {
    let pixels = mask.labels().iter().map(|&c| class_level(c)).collect();
    Raster2D::new(mask.width(), mask.height(), PixelFormat::Gray8, pixels)
        .expect("one byte per label")
}

pub fn decode_label_raster(raster: &Raster2D) -> Result<LabelMask, RasterError> {
    if raster.format != PixelFormat::Gray8 {
        return Err(RasterError::WrongFormat {
            expected: PixelFormat::Gray8,
            actual: raster.format,
        });
    }
    let labels = raster
        .pixels
        .iter()
        .enumerate()
        .map(|(index, &level)| {
            CLASS_LEVELS
                .iter()
                .position(|&l| l == level)
                .and_then(ClassId::from_index)
                .ok_or(RasterError::UnknownLevel { index, level })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LabelMask::new(raster.width, raster.height, labels).expect("raster dimensions are positive"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn background_encodes_to_zero() {
        let mask = LabelMask::filled(3, 2, ClassId::Background).unwrap();
        assert!(encode_label_raster(&mask).pixels().iter().all(|&p| p == 0));
    }

    #[test]
    fn unknown_level_is_rejected() {
        let raster = Raster2D::new(2, 1, PixelFormat::Gray8, vec![0, 100]).unwrap();
        assert!(matches!(
            decode_label_raster(&raster),
            Err(RasterError::UnknownLevel { index: 1, level: 100 })
        ));
    }

    #[test]
    fn rgb_raster_is_not_a_label_raster() {
        let raster = Raster2D::new(1, 1, PixelFormat::Rgb8, vec![0, 0, 0]).unwrap();
        assert!(matches!(
            decode_label_raster(&raster),
            Err(RasterError::WrongFormat { .. })
        ));
    }

    #[test]
    fn png_round_trip_keeps_format() {
        let gray = Raster2D::new(3, 2, PixelFormat::Gray8, vec![0, 1, 2, 3, 4, 255]).unwrap();
        assert_eq!(Raster2D::from_png_bytes(&gray.to_png_bytes().unwrap()).unwrap(), gray);
        let rgb = Raster2D::new(2, 1, PixelFormat::Rgb8, vec![255, 0, 0, 0, 0, 255]).unwrap();
        assert_eq!(Raster2D::from_png_bytes(&rgb.to_png_bytes().unwrap()).unwrap(), rgb);
    }

    proptest! {
        #[test]
        fn label_encoding_is_invertible(indices in proptest::collection::vec(0u8..4, 64)) {
            let mask = LabelMask::from_indices(8, 8, &indices).unwrap();
            prop_assert_eq!(decode_label_raster(&encode_label_raster(&mask)).unwrap(), mask);
        }

        #[test]
        fn opposite_orientation_restores_slice(
            w in 1usize..6, h in 1usize..6, turns in 0u8..4,
            fh: bool, fv: bool, seed: u8,
        ) {
            let pixels = (0..w * h).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
            let raster = Raster2D::new(w, h, PixelFormat::Gray8, pixels).unwrap();
            let flips = crate::volume::SliceSpec { flip_horizontal: fh, flip_vertical: fv, ..Default::default() };
            prop_assert_eq!(flips.orient(&flips.orient(&raster)), raster.clone());
            let mut rotated = raster.clone();
            for _ in 0..turns { rotated = rotated.rotate_clockwise(); }
            for _ in 0..(4 - turns) % 4 { rotated = rotated.rotate_clockwise(); }
            prop_assert_eq!(rotated, raster);
        }
    }
}
