//! Minimal MetaImage (`.mha`) reader/writer and 2D slice extraction.
//!
//! Only single-file volumes (`ElementDataFile = LOCAL`) with three dimensions
//! and uncompressed binary payloads are accepted. The payload starts right
//! after the newline that terminates the `ElementDataFile` line and is stored
//! x-fastest.

use crate::raster::{PixelFormat, Raster2D};
use byteorder::{BigEndian, ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VolumeError {
    #[error("missing required header key `{0}`")]
    MissingKey(&'static str),
    #[error("unsupported value for `{key}`: {value}")]
    UnsupportedValue { key: String, value: String },
    #[error("malformed header line {line}: {text:?}")]
    MalformedLine { line: usize, text: String },
    #[error("payload truncated: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("payload has {excess} unexpected trailing bytes")]
    ExcessPayload { excess: usize },
    #[error("voxel value {value} at index {index} does not fit an 8-bit mask")]
    MaskValueOutOfRange { index: usize, value: f64 },
    #[error("voxel buffer holds {actual} values, header expects {expected}")]
    VoxelCountMismatch { expected: usize, actual: usize },
    #[error("rotation must be 0..=3 quarter turns, got {0}")]
    InvalidRotation(u8),
}

pub type Result<T> = std::result::Result<T, VolumeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementType {
    U8,
    I16,
    U16,
    F32,
}

impl ElementType {
    pub const fn met_name(self) -> &'static str {
        match self {
            ElementType::U8 => "MET_UCHAR",
            ElementType::I16 => "MET_SHORT",
            ElementType::U16 => "MET_USHORT",
            ElementType::F32 => "MET_FLOAT",
        }
    }

    pub fn from_met_name(name: &str) -> Option<Self> {
        match name {
            "MET_UCHAR" => Some(ElementType::U8),
            "MET_SHORT" => Some(ElementType::I16),
            "MET_USHORT" => Some(ElementType::U16),
            "MET_FLOAT" => Some(ElementType::F32),
            _ => None,
        }
    }

    pub const fn byte_width(self) -> usize {
        match self {
            ElementType::U8 => 1,
            ElementType::I16 | ElementType::U16 => 2,
            ElementType::F32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHeader {
    pub ndims: usize,
    /// Voxels per axis, x first.
    pub dim_size: [usize; 3],
    pub element_type: ElementType,
    /// Millimetres per voxel along x, y, z.
    pub element_spacing: [f64; 3],
    /// Offset of the first payload byte.
    pub header_byte_length: usize,
    pub binary_data: bool,
    pub byte_order_msb: bool,
    /// Header keys this reader does not interpret, in file order.
    pub extra: Vec<(String, String)>,
}

impl VolumeHeader {
    pub fn new(dim_size: [usize; 3], element_type: ElementType) -> Self {
        let mut header = Self {
            ndims: 3,
            dim_size,
            element_type,
            element_spacing: [1.0; 3],
            header_byte_length: 0,
            binary_data: true,
            byte_order_msb: false,
            extra: Vec::new(),
        };
        header.header_byte_length = header.render().len();
        header
    }

    pub fn voxel_count(&self) -> usize {
        self.dim_size.iter().product()
    }

    pub fn payload_len(&self) -> usize {
        self.voxel_count() * self.element_type.byte_width()
    }

    /// Canonical header text as emitted by [`write_volume`].
    pub fn render(&self) -> String {
        let mut out = String::new();
        let bool_text = |b: bool| if b { "True" } else { "False" };
        let _ = writeln!(out, "ObjectType = Image");
        let _ = writeln!(out, "NDims = {}", self.ndims);
        let _ = writeln!(out, "BinaryData = {}", bool_text(self.binary_data));
        let _ = writeln!(
            out,
            "BinaryDataByteOrderMSB = {}",
            bool_text(self.byte_order_msb)
        );
        let [x, y, z] = self.dim_size;
        let _ = writeln!(out, "DimSize = {x} {y} {z}");
        let [sx, sy, sz] = self.element_spacing;
        let _ = writeln!(out, "ElementSpacing = {sx} {sy} {sz}");
        for (key, value) in &self.extra {
            let _ = writeln!(out, "{key} = {value}");
        }
        let _ = writeln!(out, "ElementType = {}", self.element_type.met_name());
        let _ = writeln!(out, "ElementDataFile = LOCAL");
        out
    }
}

/// Voxel storage, one variant per supported element type.
#[derive(Debug, Clone, PartialEq)]
pub enum VoxelData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl VoxelData {
    pub fn len(&self) -> usize {
        match self {
            VoxelData::U8(v) => v.len(),
            VoxelData::I16(v) => v.len(),
            VoxelData::U16(v) => v.len(),
            VoxelData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn element_type(&self) -> ElementType {
        match self {
            VoxelData::U8(_) => ElementType::U8,
            VoxelData::I16(_) => ElementType::I16,
            VoxelData::U16(_) => ElementType::U16,
            VoxelData::F32(_) => ElementType::F32,
        }
    }

    pub fn value(&self, index: usize) -> f64 {
        match self {
            VoxelData::U8(v) => v[index] as f64,
            VoxelData::I16(v) => v[index] as f64,
            VoxelData::U16(v) => v[index] as f64,
            VoxelData::F32(v) => v[index] as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub header: VolumeHeader,
    pub voxels: VoxelData,
}

impl Volume {
    /// Builds a volume, taking the element type from the voxel buffer.
    pub fn new(dim_size: [usize; 3], voxels: VoxelData) -> Result<Self> {
        let header = VolumeHeader::new(dim_size, voxels.element_type());
        Self::with_header(header, voxels)
    }

    pub fn with_header(mut header: VolumeHeader, voxels: VoxelData) -> Result<Self> {
        if header.voxel_count() != voxels.len() {
            return Err(VolumeError::VoxelCountMismatch {
                expected: header.voxel_count(),
                actual: voxels.len(),
            });
        }
        header.element_type = voxels.element_type();
        header.header_byte_length = header.render().len();
        Ok(Self { header, voxels })
    }

    fn index(&self, x: usize, y: usize, z: usize) -> usize {
        let [nx, ny, _] = self.header.dim_size;
        (z * ny + y) * nx + x
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(unsupported(key, value)),
    }
}

fn unsupported(key: &str, value: &str) -> VolumeError {
    VolumeError::UnsupportedValue {
        key: key.to_string(),
        value: value.to_string(),
    }
}

fn parse_triple<T: std::str::FromStr>(key: &str, value: &str) -> Result<[T; 3]> {
    let parts: Vec<T> = value
        .split_whitespace()
        .map(|p| p.parse::<T>().map_err(|_| unsupported(key, value)))
        .collect::<Result<_>>()?;
    <[T; 3]>::try_from(parts).map_err(|_| unsupported(key, value))
}

/// Parses the ASCII header up to and including the `ElementDataFile` line.
pub fn parse_mha_header(bytes: &[u8]) -> Result<VolumeHeader> {
    let mut ndims = None;
    let mut dim_size = None;
    let mut element_type = None;
    let mut element_spacing = [1.0; 3];
    let mut binary_data = true;
    let mut byte_order_msb = false;
    let mut extra = Vec::new();
    let mut header_byte_length = None;

    let mut offset = 0;
    let mut line_no = 0;
    while offset < bytes.len() {
        line_no += 1;
        let end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |p| offset + p + 1);
        let raw = &bytes[offset..end];
        offset = end;

        let text = std::str::from_utf8(raw)
            .ok()
            .filter(|t| t.is_ascii())
            .ok_or_else(|| VolumeError::MalformedLine {
                line: line_no,
                text: String::from_utf8_lossy(raw).into_owned(),
            })?;
        let text = text.trim_end_matches(['\n', '\r']);
        if text.trim().is_empty() {
            continue;
        }
        let (key, value) = text
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .filter(|(k, _)| !k.is_empty())
            .ok_or_else(|| VolumeError::MalformedLine {
                line: line_no,
                text: text.to_string(),
            })?;

        match key {
            "ObjectType" => {}
            "NDims" => {
                let n: usize = value.parse().map_err(|_| unsupported(key, value))?;
                if n != 3 {
                    return Err(unsupported(key, value));
                }
                ndims = Some(n);
            }
            "DimSize" => {
                let dims: [usize; 3] = parse_triple(key, value)?;
                if dims.contains(&0) {
                    return Err(unsupported(key, value));
                }
                dim_size = Some(dims);
            }
            "ElementType" => {
                element_type =
                    Some(ElementType::from_met_name(value).ok_or_else(|| unsupported(key, value))?);
            }
            "ElementSpacing" => element_spacing = parse_triple(key, value)?,
            "BinaryData" => {
                binary_data = parse_bool(key, value)?;
                if !binary_data {
                    return Err(unsupported(key, value));
                }
            }
            "BinaryDataByteOrderMSB" | "ElementByteOrderMSB" => {
                byte_order_msb = parse_bool(key, value)?
            }
            "ElementDataFile" => {
                if value != "LOCAL" {
                    return Err(unsupported(key, value));
                }
                header_byte_length = Some(offset);
                break;
            }
            _ => extra.push((key.to_string(), value.to_string())),
        }
    }

    let header_byte_length = header_byte_length.ok_or(VolumeError::MissingKey("ElementDataFile"))?;
    Ok(VolumeHeader {
        ndims: ndims.ok_or(VolumeError::MissingKey("NDims"))?,
        dim_size: dim_size.ok_or(VolumeError::MissingKey("DimSize"))?,
        element_type: element_type.ok_or(VolumeError::MissingKey("ElementType"))?,
        element_spacing,
        header_byte_length,
        binary_data,
        byte_order_msb,
        extra,
    })
}

fn decode_payload(payload: &[u8], ty: ElementType, msb: bool) -> VoxelData {
    let n = payload.len() / ty.byte_width();
    match ty {
        ElementType::U8 => VoxelData::U8(payload.to_vec()),
        ElementType::I16 => {
            let mut out = vec![0i16; n];
            if msb {
                BigEndian::read_i16_into(payload, &mut out);
            } else {
                LittleEndian::read_i16_into(payload, &mut out);
            }
            VoxelData::I16(out)
        }
        ElementType::U16 => {
            let mut out = vec![0u16; n];
            if msb {
                BigEndian::read_u16_into(payload, &mut out);
            } else {
                LittleEndian::read_u16_into(payload, &mut out);
            }
            VoxelData::U16(out)
        }
        ElementType::F32 => {
            let mut out = vec![0f32; n];
            if msb {
                BigEndian::read_f32_into(payload, &mut out);
            } else {
                LittleEndian::read_f32_into(payload, &mut out);
            }
            VoxelData::F32(out)
        }
    }
}

fn encode_payload(voxels: &VoxelData, msb: bool) -> Vec<u8> {
    let width = voxels.element_type().byte_width();
    let mut out = vec![0u8; voxels.len() * width];
    match voxels {
        VoxelData::U8(v) => out.copy_from_slice(v),
        VoxelData::I16(v) => {
            if msb {
                BigEndian::write_i16_into(v, &mut out);
            } else {
                LittleEndian::write_i16_into(v, &mut out);
            }
        }
        VoxelData::U16(v) => {
            if msb {
                BigEndian::write_u16_into(v, &mut out);
            } else {
                LittleEndian::write_u16_into(v, &mut out);
            }
        }
        VoxelData::F32(v) => {
            if msb {
                BigEndian::write_f32_into(v, &mut out);
            } else {
                LittleEndian::write_f32_into(v, &mut out);
            }
        }
    }
    out
}

/// Reads a complete single-file volume.
pub fn read_volume(bytes: &[u8]) -> Result<Volume> {
    let header = parse_mha_header(bytes)?;
    let payload = &bytes[header.header_byte_length..];
    let expected = header.payload_len();
    if payload.len() < expected {
        return Err(VolumeError::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(VolumeError::ExcessPayload {
            excess: payload.len() - expected,
        });
    }
    let voxels = decode_payload(payload, header.element_type, header.byte_order_msb);
    Ok(Volume { header, voxels })
}

/// Serializes a volume as canonical header text followed by the payload.
pub fn write_volume(volume: &Volume) -> Vec<u8> {
    let mut out = volume.header.render().into_bytes();
    out.extend(encode_payload(&volume.voxels, volume.header.byte_order_msb));
    out
}

/// Axis along which slices are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceAxis {
    /// One slice per z index; each slice spans x (columns) by y (rows).
    #[default]
    SagittalDefault,
    /// One slice per x index; each slice spans y (columns) by z (rows).
    /// For volumes stored so that sagittal planes lie across the first axis.
    AxialOverride,
}

/// Orientation fix-ups applied to every extracted slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SliceSpec {
    pub axis: SliceAxis,
    /// Clockwise quarter turns, applied before flips.
    pub rotate_quarter_turns: u8,
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
}

impl SliceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rotate_quarter_turns > 3 {
            return Err(VolumeError::InvalidRotation(self.rotate_quarter_turns));
        }
        Ok(())
    }

    /// Applies rotation and flips to a single raster.
    pub fn orient(&self, raster: &Raster2D) -> Raster2D {
        let mut out = raster.clone();
        for _ in 0..self.rotate_quarter_turns {
            out = out.rotate_clockwise();
        }
        if self.flip_horizontal {
            out = out.flip_horizontal();
        }
        if self.flip_vertical {
            out = out.flip_vertical();
        }
        out
    }

    /// Pixel spacing (row, column) of slices cut from a volume with the given voxel spacing.
    pub fn slice_spacing(&self, element_spacing: [f64; 3]) -> [f64; 2] {
        let [sx, sy, sz] = element_spacing;
        let (row, col) = match self.axis {
            SliceAxis::SagittalDefault => (sy, sx),
            SliceAxis::AxialOverride => (sz, sy),
        };
        if self.rotate_quarter_turns % 2 == 1 {
            [col, row]
        } else {
            [row, col]
        }
    }
}

/// How voxel intensities become 8-bit pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceMode {
    /// Per-slice min-max scaling to 0..=255.
    Image,
    /// Label values copied verbatim; they must be integers in 0..=255.
    Mask,
}

/// Cuts the volume into gray8 slices along `spec.axis`, in increasing index order.
pub fn extract_slices(volume: &Volume, spec: &SliceSpec, mode: SliceMode) -> Result<Vec<Raster2D>> {
    spec.validate()?;
    let [nx, ny, nz] = volume.header.dim_size;
    let (count, width, height) = match spec.axis {
        SliceAxis::SagittalDefault => (nz, nx, ny),
        SliceAxis::AxialOverride => (nx, ny, nz),
    };

    let mut slices = Vec::with_capacity(count);
    for s in 0..count {
        let indices: Vec<usize> = (0..height)
            .flat_map(|row| (0..width).map(move |col| (row, col)))
            .map(|(row, col)| match spec.axis {
                SliceAxis::SagittalDefault => volume.index(col, row, s),
                SliceAxis::AxialOverride => volume.index(s, col, row),
            })
            .collect();
        let pixels = match mode {
            SliceMode::Image => scale_to_gray(&volume.voxels, &indices),
            SliceMode::Mask => indices
                .iter()
                .map(|&i| {
                    let v = volume.voxels.value(i);
                    if v.fract() != 0.0 || !(0.0..=255.0).contains(&v) {
                        Err(VolumeError::MaskValueOutOfRange { index: i, value: v })
                    } else {
                        Ok(v as u8)
                    }
                })
                .collect::<Result<Vec<u8>>>()?,
        };
        let raster = Raster2D::new(width, height, PixelFormat::Gray8, pixels)
            .expect("slice buffer matches its dimensions");
        slices.push(spec.orient(&raster));
    }
    Ok(slices)
}

fn scale_to_gray(voxels: &VoxelData, indices: &[usize]) -> Vec<u8> {
    let (lo, hi) = indices
        .iter()
        .map(|&i| voxels.value(i))
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    indices
        .iter()
        .map(|&i| {
            let v = voxels.value(i);
            if !v.is_finite() || range <= 0.0 {
                0
            } else {
                (((v - lo) / range) * 255.0).round().clamp(0.0, 255.0) as u8
            }
        })
        .collect()
}
