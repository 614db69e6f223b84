//! Brute-force oracles and seeded generators shared by integration tests.
#![allow(dead_code)]

use lumbarkit::filter::{class_weights, ClassStats};
use lumbarkit::manifest::{ManifestEntry, Series};
use lumbarkit::{ClassId, LabelMask};
use rand::Rng;

/// Random mask with sides in `1..=max_side`, labels drawn uniformly.
pub fn random_mask(rng: &mut impl Rng, width: usize, height: usize) -> LabelMask {
    let labels: Vec<u8> = (0..width * height).map(|_| rng.random_range(0..4)).collect();
    LabelMask::from_indices(width, height, &labels).unwrap()
}

/// Pair of same-shape masks, the prediction a noisy copy of the ground truth
/// so that overlaps are neither trivial nor empty.
pub fn random_pair(rng: &mut impl Rng, max_side: usize) -> (LabelMask, LabelMask) {
    let w = rng.random_range(1..=max_side);
    let h = rng.random_range(1..=max_side);
    let gt = random_mask(rng, w, h);
    let flip = rng.random_range(0.0..0.6);
    let labels: Vec<u8> = gt
        .labels()
        .iter()
        .map(|c| {
            if rng.random_bool(flip) {
                rng.random_range(0..4)
            } else {
                c.index() as u8
            }
        })
        .collect();
    (LabelMask::from_indices(w, h, &labels).unwrap(), gt)
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

pub fn oracle_counts(pred: &LabelMask, gt: &LabelMask, class: ClassId) -> Counts {
    let mut c = Counts::default();
    for row in 0..gt.height() {
        for col in 0..gt.width() {
            let p = pred.get(row, col) == class;
            let g = gt.get(row, col) == class;
            if p && g {
                c.tp += 1;
            } else if p {
                c.fp += 1;
            } else if g {
                c.fn_ += 1;
            } else {
                c.tn += 1;
            }
        }
    }
    c
}

/// Ratio with the convention that a class missing from both masks scores 1.
fn ratio(c: &Counts, num: u64, den: u64) -> f64 {
    if c.tp == 0 && c.fp == 0 && c.fn_ == 0 {
        1.0
    } else if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn oracle_iou(c: &Counts) -> f64 {
    ratio(c, c.tp, c.tp + c.fp + c.fn_)
}

pub fn oracle_dice(c: &Counts) -> f64 {
    ratio(c, 2 * c.tp, 2 * c.tp + c.fp + c.fn_)
}

pub fn oracle_precision(c: &Counts) -> f64 {
    ratio(c, c.tp, c.tp + c.fp)
}

pub fn oracle_recall(c: &Counts) -> f64 {
    ratio(c, c.tp, c.tp + c.fn_)
}

/// Harmonic mean form, deliberately different from the count form.
pub fn oracle_f1(c: &Counts) -> f64 {
    if c.tp == 0 && c.fp == 0 && c.fn_ == 0 {
        return 1.0;
    }
    let p = oracle_precision(c);
    let r = oracle_recall(c);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Class pixels with a 4-neighbor outside the class or outside the image.
pub fn oracle_surface(mask: &LabelMask, class: ClassId) -> Vec<(usize, usize)> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let inside = |r: i64, c: i64| r >= 0 && c >= 0 && r < h && c < w && mask.get(r as usize, c as usize) == class;
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !inside(r, c) {
                continue;
            }
            if !(inside(r - 1, c) && inside(r + 1, c) && inside(r, c - 1) && inside(r, c + 1)) {
                out.push((r as usize, c as usize));
            }
        }
    }
    out
}

fn dist(a: (usize, usize), b: (usize, usize), spacing: [f64; 2]) -> f64 {
    let dr = (a.0 as f64 - b.0 as f64) * spacing[0];
    let dc = (a.1 as f64 - b.1 as f64) * spacing[1];
    dr.hypot(dc)
}

fn min_dist(p: (usize, usize), set: &[(usize, usize)], spacing: [f64; 2]) -> f64 {
    set.iter().map(|&q| dist(p, q, spacing)).fold(f64::INFINITY, f64::min)
}

/// All-pairs symmetric average surface distance; `None` if either surface is empty.
pub fn oracle_asd(sp: &[(usize, usize)], sg: &[(usize, usize)], spacing: [f64; 2]) -> Option<f64> {
    if sp.is_empty() || sg.is_empty() {
        return None;
    }
    let fwd: f64 = sp.iter().map(|&p| min_dist(p, sg, spacing)).sum();
    let bwd: f64 = sg.iter().map(|&g| min_dist(g, sp, spacing)).sum();
    Some((fwd + bwd) / (sp.len() + sg.len()) as f64)
}

/// Fraction of ground-truth surface strictly within `tau` of the prediction surface.
pub fn oracle_nsd(sp: &[(usize, usize)], sg: &[(usize, usize)], spacing: [f64; 2], tau: f64) -> Option<f64> {
    if sg.is_empty() {
        return None;
    }
    let near = sg.iter().filter(|&&g| min_dist(g, sp, spacing) < tau).count();
    Some(near as f64 / sg.len() as f64)
}

/// Entry whose census is `counts`, ready for filtering.
pub fn entry_with_counts(id: &str, counts: [u64; 4]) -> ManifestEntry {
    let mut e = ManifestEntry::new(format!("images/{id}.png"), format!("masks/{id}.png"), Series::T2);
    let stats = ClassStats::from_counts(counts);
    e.weights = Some(class_weights(&stats).unwrap());
    e.stats = Some(stats);
    e
}

/// Ten entries: three missing a class, two with a dominant class above 55%,
/// one sitting exactly at 55%, four comfortably balanced.
pub fn filter_fixture() -> Vec<ManifestEntry> {
    vec![
        entry_with_counts("a", [40, 30, 20, 10]),
        entry_with_counts("b", [50, 0, 30, 20]),
        entry_with_counts("c", [60, 25, 10, 5]),
        entry_with_counts("d", [55, 15, 15, 15]),
        entry_with_counts("e", [70, 0, 0, 30]),
        entry_with_counts("f", [35, 35, 15, 15]),
        entry_with_counts("g", [10, 80, 5, 5]),
        entry_with_counts("h", [100, 0, 0, 0]),
        entry_with_counts("i", [25, 25, 25, 25]),
        entry_with_counts("j", [45, 20, 20, 15]),
    ]
}

use lumbarkit::volume::{ElementType, Volume, VolumeError, VolumeHeader, VoxelData};

/// Seeded volume cycling through element types and byte orders by `k`.
pub fn random_volume(rng: &mut impl Rng, k: usize) -> Volume {
    let dims = [rng.random_range(1..=7), rng.random_range(1..=7), rng.random_range(1..=5)];
    let n: usize = dims.iter().product();
    let voxels = match k % 4 {
        0 => VoxelData::U8((0..n).map(|_| rng.random()).collect()),
        1 => VoxelData::I16((0..n).map(|_| rng.random()).collect()),
        2 => VoxelData::U16((0..n).map(|_| rng.random()).collect()),
        _ => VoxelData::F32((0..n).map(|_| f32::from_bits(rng.random_range(0..0x7f00_0000))).collect()),
    };
    let mut header = VolumeHeader::new(dims, voxels.element_type());
    header.byte_order_msb = (k / 4) % 2 == 1;
    header.element_spacing = [rng.random_range(0.2..4.0), rng.random_range(0.2..4.0), rng.random_range(0.5..6.0)];
    if k % 3 == 0 {
        header.extra.push(("Modality".into(), "MET_MOD_MR".into()));
    }
    Volume::with_header(header, voxels).unwrap()
}

/// Raw voxel bytes in the volume's declared byte order.
pub fn voxel_bytes(v: &Volume) -> Vec<u8> {
    let msb = v.header.byte_order_msb;
    let mut out = Vec::new();
    let mut push = |b: &[u8]| out.extend_from_slice(b);
    match &v.voxels {
        VoxelData::U8(x) => push(x),
        VoxelData::I16(x) => x.iter().for_each(|e| push(&if msb { e.to_be_bytes() } else { e.to_le_bytes() })),
        VoxelData::U16(x) => x.iter().for_each(|e| push(&if msb { e.to_be_bytes() } else { e.to_le_bytes() })),
        VoxelData::F32(x) => x.iter().for_each(|e| push(&if msb { e.to_be_bytes() } else { e.to_le_bytes() })),
    }
    out
}

pub type ErrorCheck = fn(&VolumeError) -> bool;

/// Malformed inputs paired with the error class each must produce.
pub fn malformed_volumes() -> Vec<(&'static str, Vec<u8>, ErrorCheck)> {
    fn with(header: &str, payload: &[u8]) -> Vec<u8> {
        let mut b = header.as_bytes().to_vec();
        b.extend_from_slice(payload);
        b
    }
    let ok = "NDims = 3\nDimSize = 2 2 1\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n";
    vec![
        ("missing DimSize", with("NDims = 3\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n", &[]), |e| {
            matches!(e, VolumeError::MissingKey("DimSize"))
        }),
        ("missing ElementType", with("NDims = 3\nDimSize = 1 1 1\nElementDataFile = LOCAL\n", &[0]), |e| {
            matches!(e, VolumeError::MissingKey("ElementType"))
        }),
        ("no data file line", with("NDims = 3\nDimSize = 1 1 1\nElementType = MET_UCHAR\n", &[]), |e| {
            matches!(e, VolumeError::MissingKey("ElementDataFile"))
        }),
        ("two dimensions", with("NDims = 2\nDimSize = 2 2\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n", &[0; 4]), |e| {
            matches!(e, VolumeError::UnsupportedValue { key, .. } if key == "NDims")
        }),
        ("detached payload", with("NDims = 3\nDimSize = 1 1 1\nElementType = MET_UCHAR\nElementDataFile = x.raw\n", &[]), |e| {
            matches!(e, VolumeError::UnsupportedValue { key, .. } if key == "ElementDataFile")
        }),
        ("double voxels", with("NDims = 3\nDimSize = 1 1 1\nElementType = MET_DOUBLE\nElementDataFile = LOCAL\n", &[0; 8]), |e| {
            matches!(e, VolumeError::UnsupportedValue { key, .. } if key == "ElementType")
        }),
        ("ascii payload", with("NDims = 3\nBinaryData = False\nDimSize = 1 1 1\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n", b"0"), |e| {
            matches!(e, VolumeError::UnsupportedValue { key, .. } if key == "BinaryData")
        }),
        ("line without separator", with("NDims = 3\nDimSize 2 2 1\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n", &[0; 4]), |e| {
            matches!(e, VolumeError::MalformedLine { line: 2, .. })
        }),
        ("short payload", with(ok, &[1, 2, 3]), |e| {
            matches!(e, VolumeError::TruncatedPayload { expected: 4, actual: 3 })
        }),
        ("long payload", with(ok, &[1, 2, 3, 4, 5]), |e| matches!(e, VolumeError::ExcessPayload { excess: 1 })),
    ]
}

pub fn element_types() -> [ElementType; 4] {
    [ElementType::U8, ElementType::I16, ElementType::U16, ElementType::F32]
}
