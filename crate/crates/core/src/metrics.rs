//! Per-class overlap and surface-distance metrics for 2D label masks.
//!
//! Overlap metrics come from one-vs-rest confusion counts. Zero denominators
//! follow one rule: a class absent from both masks scores 1 (agreement on
//! absence), otherwise an empty denominator scores 0. Surface metrics are
//! undefined (`None`) when a required surface is empty.

use crate::label::{ClassId, LabelMask};
use crate::restore::Neighborhood;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("prediction is {pred:?} but ground truth is {gt:?} (width, height)")]
    ShapeMismatch {
        pred: (usize, usize),
        gt: (usize, usize),
    },
    #[error("{0} surface is empty")]
    EmptySurface(&'static str),
    #[error("invalid metric configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, MetricError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Class absent from both prediction and ground truth.
    pub fn absent_in_both(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }

    fn ratio(&self, num: u64, den: u64) -> f64 {
        if self.absent_in_both() {
            1.0
        } else if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn iou(&self) -> f64 {
        self.ratio(self.tp, self.tp + self.fp + self.fn_)
    }

    pub fn dice(&self) -> f64 {
        self.ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn precision(&self) -> f64 {
        self.ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        self.ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall, evaluated in its count form
    /// `2tp / (2tp + fp + fn)` so it is bit-identical to [`Self::dice`].
    pub fn f1(&self) -> f64 {
        self.ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn check_shapes(pred: &LabelMask, gt: &LabelMask) -> Result<()> {
    if pred.same_shape(gt) {
        Ok(())
    } else {
        Err(MetricError::ShapeMismatch {
            pred: (pred.width(), pred.height()),
            gt: (gt.width(), gt.height()),
        })
    }
}

pub fn confusion(pred: &LabelMask, gt: &LabelMask, class: ClassId) -> Result<ConfusionCounts> {
    check_shapes(pred, gt)?;
    let mut counts = ConfusionCounts::default();
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        match (p == class, g == class) {
            (true, true) => counts.tp += 1,
            (true, false) => counts.fp += 1,
            (false, true) => counts.fn_ += 1,
            (false, false) => counts.tn += 1,
        }
    }
    Ok(counts)
}

pub fn iou(pred: &LabelMask, gt: &LabelMask, class: ClassId) -> Result<f64> {
    Ok(confusion(pred, gt, class)?.iou())
}

pub fn dice(pred: &LabelMask, gt: &LabelMask, class: ClassId) -> Result<f64> {
    Ok(confusion(pred, gt, class)?.dice())
}

pub fn precision(pred: &LabelMask, gt: &LabelMask, class: ClassId) -> Result<f64> {
    Ok(confusion(pred, gt, class)?.precision())
}

pub fn recall(pred: &LabelMask, gt: &LabelMask, class: ClassId) -> Result<f64> {
    Ok(confusion(pred, gt, class)?.recall())
}

pub fn f1(pred: &LabelMask, gt: &LabelMask, class: ClassId) -> Result<f64> {
    Ok(confusion(pred, gt, class)?.f1())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// NSD tolerance, in the units of `spacing`.
    pub tau: f64,
    pub include_background_in_means: bool,
    /// Connectivity used to decide whether a pixel lies on a surface.
    pub connectivity: Neighborhood,
    /// Physical size of a pixel as (row, column).
    pub spacing: [f64; 2],
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            include_background_in_means: true,
            connectivity: Neighborhood::Four,
            spacing: [1.0, 1.0],
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) {
            return Err(MetricError::InvalidConfig(format!("tau must be >= 0, got {}", self.tau)));
        }
        if self.spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(MetricError::InvalidConfig(format!(
                "spacing must be positive, got {:?}",
                self.spacing
            )));
        }
        Ok(())
    }

    fn mean_classes(&self) -> &'static [ClassId] {
        if self.include_background_in_means {
            &ClassId::ALL
        } else {
            &ClassId::ALL[1..]
        }
    }
}

pub fn mean_iou(pred: &LabelMask, gt: &LabelMask, cfg: &MetricConfig) -> Result<f64> {
    let classes = cfg.mean_classes();
    let sum = classes
        .iter()
        .map(|&c| iou(pred, gt, c))
        .sum::<Result<f64>>()?;
    Ok(sum / classes.len() as f64)
}

pub fn mean_dice(pred: &LabelMask, gt: &LabelMask, cfg: &MetricConfig) -> Result<f64> {
    let classes = cfg.mean_classes();
    let sum = classes
        .iter()
        .map(|&c| dice(pred, gt, c))
        .sum::<Result<f64>>()?;
    Ok(sum / classes.len() as f64)
}

/// Boundary pixels of one class, with the grid they live on.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePointSet {
    /// (row, column), in raster order.
    pub points: Vec<(usize, usize)>,
    pub spacing: [f64; 2],
    pub width: usize,
    pub height: usize,
}

impl SurfacePointSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn distance(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        let dr = (a.0 as f64 - b.0 as f64) * self.spacing[0];
        let dc = (a.1 as f64 - b.1 as f64) * self.spacing[1];
        (dr * dr + dc * dc).sqrt()
    }
}

/// Pixels of `class` with at least one neighbor that is not `class`; sides
/// outside the image count as not `class`.
pub fn extract_surface(mask: &LabelMask, class: ClassId, cfg: &MetricConfig) -> SurfacePointSet {
    let (w, h) = (mask.width(), mask.height());
    let mut points = Vec::new();
    for row in 0..h {
        for col in 0..w {
            if mask.get(row, col) != class {
                continue;
            }
            let on_surface = cfg.connectivity.offsets().iter().any(|&(dr, dc)| {
                match (row.checked_add_signed(dr), col.checked_add_signed(dc)) {
                    (Some(r), Some(c)) if r < h && c < w => mask.get(r, c) != class,
                    _ => true,
                }
            });
            if on_surface {
                points.push((row, col));
            }
        }
    }
    SurfacePointSet {
        points,
        spacing: cfg.spacing,
        width: w,
        height: h,
    }
}

/// One-dimensional squared distance transform of sampled function `f` under
/// the metric `weight * (q - p)^2`.
fn edt_1d(f: &[f64], weight: f64, out: &mut [f64]) {
    let n = f.len();
    let mut hull: Vec<usize> = Vec::with_capacity(n);
    let mut bounds: Vec<f64> = Vec::with_capacity(n + 1);
    let key = |q: usize| f[q] + weight * (q as f64) * (q as f64);
    for q in (0..n).filter(|&q| f[q].is_finite()) {
        loop {
            let Some(&v) = hull.last() else {
                hull.push(q);
                bounds.push(f64::NEG_INFINITY);
                break;
            };
            let s = (key(q) - key(v)) / (2.0 * weight * (q as f64 - v as f64));
            if s <= *bounds.last().expect("bounds track hull") {
                hull.pop();
                bounds.pop();
            } else {
                hull.push(q);
                bounds.push(s);
                break;
            }
        }
    }
    if hull.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < hull.len() && bounds[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - hull[k] as f64;
        *o = weight * d * d + f[hull[k]];
    }
}

/// Squared distance from every pixel to the nearest point of `surface`.
fn squared_distance_map(surface: &SurfacePointSet) -> Vec<f64> {
    let (w, h) = (surface.width, surface.height);
    let mut grid = vec![f64::INFINITY; w * h];
    for &(r, c) in &surface.points {
        grid[r * w + c] = 0.0;
    }
    let [sr, sc] = surface.spacing;
    let mut column = vec![0.0; h];
    let mut column_out = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            column[r] = grid[r * w + c];
        }
        edt_1d(&column, sr * sr, &mut column_out);
        for r in 0..h {
            grid[r * w + c] = column_out[r];
        }
    }
    let mut row_out = vec![0.0; w];
    for r in 0..h {
        edt_1d(&grid[r * w..(r + 1) * w], sc * sc, &mut row_out);
        grid[r * w..(r + 1) * w].copy_from_slice(&row_out);
    }
    grid
}

/// For each point of `from`, the distance to the nearest point of `to`.
pub fn nearest_distances(from: &SurfacePointSet, to: &SurfacePointSet) -> Vec<f64> {
    let map = squared_distance_map(to);
    from.points
        .iter()
        .map(|&(r, c)| map[r * to.width + c].sqrt())
        .collect()
}

fn surfaces(
    pred: &LabelMask,
    gt: &LabelMask,
    class: ClassId,
    cfg: &MetricConfig,
) -> Result<(SurfacePointSet, SurfacePointSet)> {
    check_shapes(pred, gt)?;
    cfg.validate()?;
    Ok((extract_surface(pred, class, cfg), extract_surface(gt, class, cfg)))
}

/// Symmetric average surface distance.
pub fn asd(pred: &LabelMask, gt: &LabelMask, class: ClassId, cfg: &MetricConfig) -> Result<f64> {
    let (sp, sg) = surfaces(pred, gt, class, cfg)?;
    asd_from_surfaces(&sp, &sg)
}

pub fn asd_from_surfaces(sp: &SurfacePointSet, sg: &SurfacePointSet) -> Result<f64> {
    if sp.is_empty() {
        return Err(MetricError::EmptySurface("prediction"));
    }
    if sg.is_empty() {
        return Err(MetricError::EmptySurface("ground truth"));
    }
    let forward: f64 = nearest_distances(sp, sg).iter().sum();
    let backward: f64 = nearest_distances(sg, sp).iter().sum();
    Ok((forward + backward) / (sp.len() + sg.len()) as f64)
}

/// Fraction of ground-truth surface points strictly closer than `cfg.tau`
/// to the predicted surface.
pub fn nsd(pred: &LabelMask, gt: &LabelMask, class: ClassId, cfg: &MetricConfig) -> Result<f64> {
    let (sp, sg) = surfaces(pred, gt, class, cfg)?;
    nsd_from_surfaces(&sp, &sg, cfg.tau)
}

pub fn nsd_from_surfaces(sp: &SurfacePointSet, sg: &SurfacePointSet, tau: f64) -> Result<f64> {
    if sg.is_empty() {
        return Err(MetricError::EmptySurface("ground truth"));
    }
    if sp.is_empty() {
        return Ok(0.0);
    }
    let within = nearest_distances(sg, sp).iter().filter(|&&d| d < tau).count();
    Ok(within as f64 / sg.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: ClassId,
    pub iou: f64,
    pub dice: f64,
    pub asd: Option<f64>,
    pub nsd: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub classes: Vec<ClassMetrics>,
    pub mean_iou: f64,
    pub mean_dice: f64,
}

pub fn evaluate_pair(pred: &LabelMask, gt: &LabelMask, cfg: &MetricConfig) -> Result<MetricReport> {
    check_shapes(pred, gt)?;
    cfg.validate()?;
    let classes: Vec<ClassMetrics> = ClassId::ALL
        .iter()
        .map(|&class| {
            let counts = confusion(pred, gt, class)?;
            let sp = extract_surface(pred, class, cfg);
            let sg = extract_surface(gt, class, cfg);
            Ok(ClassMetrics {
                class,
                iou: counts.iou(),
                dice: counts.dice(),
                asd: asd_from_surfaces(&sp, &sg).ok(),
                nsd: nsd_from_surfaces(&sp, &sg, cfg.tau).ok(),
                precision: counts.precision(),
                recall: counts.recall(),
                f1: counts.f1(),
                confusion: counts,
            })
        })
        .collect::<Result<_>>()?;
    let included = cfg.mean_classes();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        included.iter().map(|c| f(&classes[c.index()])).sum::<f64>() / included.len() as f64
    };
    Ok(MetricReport {
        mean_iou: mean(|m| m.iou),
        mean_dice: mean(|m| m.dice),
        classes,
    })
}

/// Unweighted means of per-pair values; undefined surface metrics are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub class: ClassId,
    pub iou: f64,
    pub dice: f64,
    pub asd: Option<f64>,
    pub nsd: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub pairs: usize,
    pub asd_pairs: usize,
    pub nsd_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub rows: Vec<AggregateRow>,
    pub mean_iou: f64,
    pub mean_dice: f64,
    pub pairs: usize,
}

fn mean_of(values: impl Iterator<Item = f64>) -> (Option<f64>, usize) {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        (None, 0)
    } else {
        (Some(sum / n as f64), n)
    }
}

/// Returns `None` for an empty report list.
pub fn aggregate(reports: &[MetricReport]) -> Option<Aggregate> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let rows = ClassId::ALL
        .iter()
        .map(|&class| {
            let per = || reports.iter().map(move |r| &r.classes[class.index()]);
            let avg = |f: fn(&ClassMetrics) -> f64| per().map(f).sum::<f64>() / n;
            let (asd, asd_pairs) = mean_of(per().filter_map(|m| m.asd));
            let (nsd, nsd_pairs) = mean_of(per().filter_map(|m| m.nsd));
            AggregateRow {
                class,
                iou: avg(|m| m.iou),
                dice: avg(|m| m.dice),
                asd,
                nsd,
                precision: avg(|m| m.precision),
                recall: avg(|m| m.recall),
                f1: avg(|m| m.f1),
                pairs: reports.len(),
                asd_pairs,
                nsd_pairs,
            }
        })
        .collect();
    Some(Aggregate {
        rows,
        mean_iou: reports.iter().map(|r| r.mean_iou).sum::<f64>() / n,
        mean_dice: reports.iter().map(|r| r.mean_dice).sum::<f64>() / n,
        pairs: reports.len(),
    })
}

impl Aggregate {
    /// Per-class table in the column order IoU, Dice, ASD, NSD, Precision, Recall, F1.
    pub fn render_table(&self, title: &str) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        let mut out = String::new();
        let _ = writeln!(out, "{title} ({} pairs)", self.pairs);
        let _ = writeln!(
            out,
            "{:<14} {:>8} {:>8} {:>8} {:>8} {:>10} {:>8} {:>8}",
            "class", "IoU", "Dice", "ASD", "NSD", "Precision", "Recall", "F1"
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<14} {:>8.4} {:>8.4} {:>8} {:>8} {:>10.4} {:>8.4} {:>8.4}",
                row.class.name(),
                row.iou,
                row.dice,
                opt(row.asd),
                opt(row.nsd),
                row.precision,
                row.recall,
                row.f1
            );
        }
        let _ = writeln!(
            out,
            "mean IoU {:.4}  mean Dice {:.4}",
            self.mean_iou, self.mean_dice
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(width: usize, indices: &[u8]) -> LabelMask {
        LabelMask::from_indices(width, indices.len() / width, indices).unwrap()
    }

    #[test]
    fn identical_masks_have_no_errors() {
        let m = mask(3, &[0, 1, 2, 3, 1, 1, 0, 2, 3]);
        for class in ClassId::ALL {
            let c = confusion(&m, &m, class).unwrap();
            assert_eq!((c.fp, c.fn_), (0, 0));
        }
    }

    #[test]
    fn all_wrong_prediction() {
        let pred = LabelMask::filled(3, 3, ClassId::Vertebrae).unwrap();
        let gt = LabelMask::filled(3, 3, ClassId::Background).unwrap();
        let c = confusion(&pred, &gt, ClassId::Vertebrae).unwrap();
        assert_eq!(c.tp, 0);
        assert_eq!(c.fp, 9);
    }

    #[test]
    fn small_overlap_example() {
        // class 1 at {(0,0),(0,1)} vs {(0,1),(1,1)}
        let pred = mask(2, &[1, 1, 0, 0]);
        let gt = mask(2, &[0, 1, 0, 1]);
        assert!((iou(&pred, &gt, ClassId::Vertebrae).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(dice(&pred, &gt, ClassId::Vertebrae).unwrap(), 0.5);
    }

    #[test]
    fn disjoint_sets_score_zero() {
        let pred = mask(2, &[1, 1, 0, 0]);
        let gt = mask(2, &[0, 0, 1, 1]);
        assert_eq!(iou(&pred, &gt, ClassId::Vertebrae).unwrap(), 0.0);
    }

    #[test]
    fn absent_class_scores_one() {
        let m = mask(2, &[0, 1, 1, 0]);
        let c = confusion(&m, &m, ClassId::Ivd).unwrap();
        assert_eq!(c.iou(), 1.0);
        assert_eq!(c.precision(), 1.0);
        assert_eq!(c.f1(), 1.0);
    }

    #[test]
    fn subset_prediction_has_full_precision() {
        let pred = mask(3, &[1, 0, 0, 1, 0, 0, 0, 0, 0]);
        let gt = mask(3, &[1, 1, 0, 1, 1, 0, 0, 0, 0]);
        let c = confusion(&pred, &gt, ClassId::Vertebrae).unwrap();
        assert_eq!(c.precision(), 1.0);
        assert_eq!(c.recall(), 0.5);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = LabelMask::filled(2, 2, ClassId::Background).unwrap();
        let b = LabelMask::filled(3, 2, ClassId::Background).unwrap();
        assert!(matches!(
            confusion(&a, &b, ClassId::Background),
            Err(MetricError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn block_surface_excludes_interior() {
        let mut m = LabelMask::filled(5, 5, ClassId::Background).unwrap();
        for r in 1..4 {
            for c in 1..4 {
                m.set(r, c, ClassId::Ivd);
            }
        }
        let s = extract_surface(&m, ClassId::Ivd, &MetricConfig::default());
        assert_eq!(s.len(), 8);
        assert!(!s.points.contains(&(2, 2)));
    }

    #[test]
    fn single_pixel_and_missing_class_surfaces() {
        let m = mask(3, &[0, 0, 0, 0, 2, 0, 0, 0, 0]);
        let cfg = MetricConfig::default();
        assert_eq!(extract_surface(&m, ClassId::SpinalCanal, &cfg).points, vec![(1, 1)]);
        assert!(extract_surface(&m, ClassId::Ivd, &cfg).is_empty());
        // image-border pixels are surface
        let full = LabelMask::filled(3, 3, ClassId::Background).unwrap();
        assert_eq!(extract_surface(&full, ClassId::Background, &cfg).len(), 8);
    }

    #[test]
    fn asd_examples() {
        let cfg = MetricConfig::default();
        let a = mask(2, &[1, 0, 0, 0]);
        let b = mask(2, &[0, 1, 0, 0]);
        assert_eq!(asd(&a, &b, ClassId::Vertebrae, &cfg).unwrap(), 1.0);
        assert_eq!(asd(&a, &a, ClassId::Vertebrae, &cfg).unwrap(), 0.0);
        let empty = LabelMask::filled(2, 2, ClassId::Background).unwrap();
        assert_eq!(
            asd(&empty, &a, ClassId::Vertebrae, &cfg),
            Err(MetricError::EmptySurface("prediction"))
        );
    }

    #[test]
    fn asd_honors_spacing() {
        let cfg = MetricConfig {
            spacing: [2.0, 0.5],
            ..MetricConfig::default()
        };
        let a = mask(2, &[1, 0, 0, 0]);
        let right = mask(2, &[0, 1, 0, 0]);
        let down = mask(2, &[0, 0, 1, 0]);
        assert_eq!(asd(&a, &right, ClassId::Vertebrae, &cfg).unwrap(), 0.5);
        assert_eq!(asd(&a, &down, ClassId::Vertebrae, &cfg).unwrap(), 2.0);
    }

    #[test]
    fn nsd_examples() {
        // vertical bar in column 1 vs column 2 of a 4x4 image
        let mut a = LabelMask::filled(4, 4, ClassId::Background).unwrap();
        let mut b = a.clone();
        for r in 0..4 {
            a.set(r, 1, ClassId::Ivd);
            b.set(r, 2, ClassId::Ivd);
        }
        let at = |tau| MetricConfig {
            tau,
            ..MetricConfig::default()
        };
        assert_eq!(nsd(&a, &a, ClassId::Ivd, &at(1.0)).unwrap(), 1.0);
        assert_eq!(nsd(&a, &b, ClassId::Ivd, &at(0.5)).unwrap(), 0.0);
        assert_eq!(nsd(&a, &b, ClassId::Ivd, &at(1.5)).unwrap(), 1.0);
        // distance exactly tau is excluded
        assert_eq!(nsd(&a, &b, ClassId::Ivd, &at(1.0)).unwrap(), 0.0);
        let empty = LabelMask::filled(4, 4, ClassId::Background).unwrap();
        assert_eq!(nsd(&empty, &a, ClassId::Ivd, &at(1.0)).unwrap(), 0.0);
        assert!(nsd(&a, &empty, ClassId::Ivd, &at(1.0)).is_err());
    }

    #[test]
    fn report_marks_undefined_surfaces() {
        let gt = mask(3, &[0, 1, 1, 0, 2, 2, 0, 0, 0]);
        let report = evaluate_pair(&gt, &gt, &MetricConfig::default()).unwrap();
        let ivd = &report.classes[ClassId::Ivd.index()];
        assert_eq!(ivd.asd, None);
        assert_eq!(ivd.nsd, None);
        assert_eq!(ivd.iou, 1.0);
        assert_eq!(report.mean_iou, 1.0);
        assert_eq!(report.classes[1].asd, Some(0.0));
    }

    #[test]
    fn means_can_exclude_background() {
        let pred = mask(2, &[0, 0, 1, 1]);
        let gt = mask(2, &[0, 1, 1, 1]);
        let with = MetricConfig::default();
        let without = MetricConfig {
            include_background_in_means: false,
            ..with
        };
        let bg = iou(&pred, &gt, ClassId::Background).unwrap();
        let v = iou(&pred, &gt, ClassId::Vertebrae).unwrap();
        assert!((mean_iou(&pred, &gt, &with).unwrap() - (bg + v + 2.0) / 4.0).abs() < 1e-15);
        assert!((mean_iou(&pred, &gt, &without).unwrap() - (v + 2.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn aggregate_is_unweighted_mean() {
        let gt = mask(2, &[0, 1, 2, 3]);
        let p1 = mask(2, &[0, 1, 2, 3]);
        let p2 = mask(2, &[0, 0, 2, 3]);
        let cfg = MetricConfig::default();
        let r1 = evaluate_pair(&p1, &gt, &cfg).unwrap();
        let r2 = evaluate_pair(&p2, &gt, &cfg).unwrap();
        let agg = aggregate(&[r1.clone(), r2.clone()]).unwrap();
        let v = ClassId::Vertebrae.index();
        assert_eq!(agg.rows[v].iou, (r1.classes[v].iou + r2.classes[v].iou) / 2.0);
        // p2 has no vertebrae surface, so ASD averages only the defined pair
        assert_eq!(agg.rows[v].asd_pairs, 1);
        assert!(aggregate(&[]).is_none());
        assert!(agg.render_table("T1").contains("Precision"));
    }
}
