//! On-disk fixture input for end-to-end runs.
#![allow(dead_code)]

use lumbarkit::synthetic::{intensity_volume, label_code, SpineLayout};
use lumbarkit::volume::{write_volume, Volume, VoxelData};
use lumbarkit::ClassId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::{Path, PathBuf};

pub const WIDTH: usize = 48;
pub const HEIGHT: usize = 64;

/// Layout lacking the spinal canal.
fn without_canal(mut l: SpineLayout) -> SpineLayout {
    l.canal_cols = (0, 0);
    l
}

/// Layout whose structures are too small, leaving background dominant.
fn narrow(mut l: SpineLayout) -> SpineLayout {
    let start = l.body_cols.0;
    l.body_cols = (start, start + 8);
    l.canal_cols = (start + 10, start + 14);
    l
}

fn write(path: PathBuf, volume: &Volume) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, write_volume(volume)).unwrap();
}

/// Volume stored x-first whose x index selects the slice, so that slices
/// must be cut along x.
fn across_x(layouts: &[SpineLayout], value: impl Fn(ClassId, usize) -> u8) -> Volume {
    let nx = layouts.len();
    let (ny, nz) = (WIDTH, HEIGHT);
    let mut voxels = vec![0u8; nx * ny * nz];
    for z in 0..nz {
        for y in 0..ny {
            for (x, l) in layouts.iter().enumerate() {
                let (class, level) = l.class_at(z, y);
                voxels[(z * ny + y) * nx + x] = value(class, level);
            }
        }
    }
    Volume::new([nx, ny, nz], VoxelData::U8(voxels)).unwrap()
}

fn label_volume(layouts: &[SpineLayout], spacing: [f64; 3]) -> Volume {
    let mut v = lumbarkit::synthetic::label_volume(layouts);
    v.header.element_spacing = spacing;
    v
}

/// Writes `images/`, `masks/` and `overrides.toml` under `dir`:
///
/// * `1_t1`: three slices, one without the canal
/// * `2_t2`: three slices, one with dominant background
/// * `3_t2_SPACE`: two slices stored across x, extracted via an override
/// * `4_t1`: truncated image volume
///
/// Eight slices are expected, plus one failed volume.
pub fn build_input(dir: &Path, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = |rng: &mut ChaCha8Rng| SpineLayout::random(rng, WIDTH, HEIGHT);

    let a = [layout(&mut rng), layout(&mut rng), without_canal(layout(&mut rng))];
    let b = [layout(&mut rng), narrow(layout(&mut rng)), layout(&mut rng)];
    let c = [layout(&mut rng), layout(&mut rng)];
    let d = [layout(&mut rng)];

    for (stem, layouts, spacing) in [
        ("1_t1", &a[..], [0.6, 0.6, 4.0]),
        ("2_t2", &b[..], [0.5, 0.7, 3.3]),
        ("4_t1", &d[..], [1.0, 1.0, 1.0]),
    ] {
        let mut image = intensity_volume(layouts, &mut rng);
        image.header.element_spacing = spacing;
        let mask = label_volume(layouts, spacing);
        write(dir.join("images").join(format!("{stem}.mha")), &image);
        write(dir.join("masks").join(format!("{stem}.mha")), &mask);
    }

    let noise: Vec<u8> = (0..64).map(|_| rng.random_range(0..40)).collect();
    let image = across_x(&c, |class, level| class.index() as u8 * 60 + noise[level % 64]);
    write(dir.join("images/3_t2_SPACE.mha"), &image);
    write(dir.join("masks/3_t2_SPACE.mha"), &across_x(&c, label_code));

    // cut the payload short
    let path = dir.join("images/4_t1.mha");
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 100]).unwrap();

    fs::write(
        dir.join("overrides.toml"),
        "[volumes.3_t2_SPACE]\naxis = \"axial_override\"\n",
    )
    .unwrap();
}

/// Parses and executes like the binary, without printing, and returns the exit code.
pub fn run(args: &[&str]) -> i32 {
    use clap::Parser;
    let mut full = vec!["lumbarkit"];
    full.extend_from_slice(args);
    match lumbarkit_cli::Cli::try_parse_from(full) {
        Ok(cli) => lumbarkit_cli::execute(&cli).map_or_else(|e| e.exit_code(), |_| 0),
        Err(e) if e.use_stderr() => 1,
        Err(_) => 0,
    }
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// extract, restore, filter, evaluate. Predictions are derived from this
/// run's restored masks unless `predictions` already exists.
pub fn full_pipeline(input: &Path, output: &Path, predictions: &Path, workers: &str) -> [i32; 4] {
    let common = ["--output", s(output), "--workers", workers];
    let with = |cmd: &str, extra: &[&str]| {
        let mut a = vec![cmd];
        a.extend_from_slice(&common);
        a.extend_from_slice(extra);
        run(&a)
    };
    let extract = with("extract", &["--input", s(input)]);
    let restore = with("restore", &[]);
    let filter = with("filter", &[]);
    if !predictions.exists() {
        write_predictions(output, predictions);
    }
    [extract, restore, filter, with("evaluate", &["--predictions", s(predictions)])]
}

/// Predictions built from the restored masks: most copied, one per volume
/// eroded by a row, plus one of the wrong size.
pub fn write_predictions(output: &Path, predictions: &Path) {
    use lumbarkit::raster::{decode_label_raster, encode_label_raster, Raster2D};
    fs::create_dir_all(predictions).unwrap();
    let mut names: Vec<_> = fs::read_dir(output.join("restored"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    names.sort();
    for (k, path) in names.iter().enumerate() {
        let name = path.file_name().unwrap();
        let dest = predictions.join(name);
        if k == 1 {
            let small = lumbarkit::LabelMask::filled(5, 5, ClassId::Background).unwrap();
            encode_label_raster(&small).save_png(&dest).unwrap();
        } else if k % 3 == 0 {
            let mut mask = decode_label_raster(&Raster2D::load_png(path).unwrap()).unwrap();
            for r in 0..mask.height() {
                for c in 0..mask.width() {
                    if r + 1 < mask.height() && mask.get(r + 1, c) == ClassId::Background {
                        mask.set(r, c, ClassId::Background);
                    }
                }
            }
            encode_label_raster(&mask).save_png(&dest).unwrap();
        } else {
            fs::copy(path, dest).unwrap();
        }
    }
}
