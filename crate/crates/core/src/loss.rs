//! Focal, dice and combined losses over per-pixel four-class probability maps,
//! their analytic gradients, a central-difference gradient oracle, and the
//! test-vector file shared with external trainers.
//!
//! Tensors are stored pixel-major with the four class channels innermost.

use crate::label::{ClassId, LabelMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CHANNELS: usize = 4;
const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("tensor shapes differ: {pred:?} vs {truth:?} (height, width)")]
    ShapeMismatch {
        pred: (usize, usize),
        truth: (usize, usize),
    },
    #[error("pixel {pixel} channel sum {sum} is not 1")]
    NotNormalized { pixel: usize, sum: f64 },
    #[error("value {value} at site {site} is outside [0, 1]")]
    OutOfRange { site: usize, value: f64 },
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("pixel {0} is not one-hot")]
    NotOneHot(usize),
    #[error("invalid loss parameters: {0}")]
    InvalidParams(String),
    #[error("site {site} value {value} +/- {h} leaves [{floor}, 1 - {floor}]")]
    PerturbationOutOfRange {
        site: usize,
        value: f64,
        h: f64,
        floor: f64,
    },
    #[error("test vector line {line}: {message}")]
    VectorFormat { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, LossError>;

fn check_len(height: usize, width: usize, values: &[f64]) -> Result<()> {
    let expected = height * width * CHANNELS;
    if values.len() != expected {
        return Err(LossError::LengthMismatch {
            expected,
            actual: values.len(),
        });
    }
    Ok(())
}

/// Predicted class probabilities; each pixel's channels sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTensor {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ProbTensor {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_len(height, width, &values)?;
        if let Some((site, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(LossError::OutOfRange { site, value });
        }
        for (pixel, chunk) in values.chunks_exact(CHANNELS).enumerate() {
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(LossError::NotNormalized { pixel, sum });
            }
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// Softmax over each pixel's logits.
    pub fn from_logits(height: usize, width: usize, logits: &[f64]) -> Result<Self> {
        check_len(height, width, logits)?;
        let values = logits
            .chunks_exact(CHANNELS)
            .flat_map(|chunk| {
                let max = chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exp: Vec<f64> = chunk.iter().map(|&z| (z - max).exp()).collect();
                let total: f64 = exp.iter().sum();
                exp.into_iter().map(move |e| e / total)
            })
            .collect();
        Self::new(height, width, values)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

/// Ground truth as one-hot channels.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotTensor {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl OneHotTensor {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_len(height, width, &values)?;
        for (pixel, chunk) in values.chunks_exact(CHANNELS).enumerate() {
            let ones = chunk.iter().filter(|&&v| v == 1.0).count();
            let zeros = chunk.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || zeros != CHANNELS - 1 {
                return Err(LossError::NotOneHot(pixel));
            }
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn from_labels(mask: &LabelMask) -> Self {
        let values = mask
            .labels()
            .iter()
            .flat_map(|&c| ClassId::ALL.map(|k| if k == c { 1.0 } else { 0.0 }))
            .collect();
        Self {
            height: mask.height(),
            width: mask.width(),
            values,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Hot channel of every pixel.
    pub fn labels(&self) -> Vec<u8> {
        self.values
            .chunks_exact(CHANNELS)
            .map(|c| c.iter().position(|&v| v == 1.0).unwrap_or(0) as u8)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiceMode {
    /// One soft-dice ratio over every pixel and channel.
    #[default]
    Global,
    /// Soft dice per channel, averaged over the four channels.
    PerClassMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossParams {
    /// Focusing exponent of the focal term.
    pub gamma: f64,
    /// Weight of the focal term in the combined loss.
    pub alpha_mix: f64,
    /// Per-class focal weights.
    pub alpha_class: [f64; CHANNELS],
    /// Dice smoothing constant.
    pub epsilon: f64,
    /// Lower clamp applied inside the focal logarithm.
    pub prob_floor: f64,
    pub dice_mode: DiceMode,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            gamma: 4.0,
            alpha_mix: 0.6,
            alpha_class: [1.0; CHANNELS],
            epsilon: 1e-6,
            prob_floor: 1e-7,
            dice_mode: DiceMode::Global,
        }
    }
}

impl LossParams {
    /// Alternative reading of the training setup with a focusing exponent of 0.4.
    pub fn low_gamma_preset() -> Self {
        Self {
            gamma: 0.4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LossError::InvalidParams(msg));
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.alpha_mix) {
            return bad(format!("alpha_mix must be in [0, 1], got {}", self.alpha_mix));
        }
        if self.alpha_class.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return bad(format!("alpha_class must be >= 0, got {:?}", self.alpha_class));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.prob_floor > 0.0 && self.prob_floor < 0.5) {
            return bad(format!("prob_floor must be in (0, 0.5), got {}", self.prob_floor));
        }
        Ok(())
    }
}

/// Neumaier-compensated sum in index order.
fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_pair(pred: &ProbTensor, truth: &OneHotTensor) -> Result<()> {
    if pred.shape() != truth.shape() {
        return Err(LossError::ShapeMismatch {
            pred: pred.shape(),
            truth: truth.shape(),
        });
    }
    Ok(())
}

// Raw kernels on flat slices. They apply no normalization checks so the
// finite-difference oracle can probe off the probability simplex.

fn focal_raw(pred: &[f64], truth: &[f64], p: &LossParams) -> f64 {
    let pixels = pred.len() / CHANNELS;
    if pixels == 0 {
        return 0.0;
    }
    let total = stable_sum(pred.iter().zip(truth).enumerate().map(|(i, (&y, &t))| {
        if t == 0.0 {
            return 0.0;
        }
        let alpha = p.alpha_class[i % CHANNELS];
        -alpha * (1.0 - y).powf(p.gamma) * t * y.max(p.prob_floor).ln()
    }));
    total / pixels as f64
}

fn dice_ratio_loss(intersection: f64, truth_sum: f64, pred_sum: f64, eps: f64) -> f64 {
    1.0 - (2.0 * intersection + eps) / (truth_sum + pred_sum + eps)
}

fn dice_raw(pred: &[f64], truth: &[f64], p: &LossParams) -> f64 {
    match p.dice_mode {
        DiceMode::Global => dice_ratio_loss(
            stable_sum(pred.iter().zip(truth).map(|(y, t)| y * t)),
            stable_sum(truth.iter().copied()),
            stable_sum(pred.iter().copied()),
            p.epsilon,
        ),
        DiceMode::PerClassMean => {
            let per_class = (0..CHANNELS).map(|c| {
                let sites = || (c..pred.len()).step_by(CHANNELS);
                dice_ratio_loss(
                    stable_sum(sites().map(|i| pred[i] * truth[i])),
                    stable_sum(sites().map(|i| truth[i])),
                    stable_sum(sites().map(|i| pred[i])),
                    p.epsilon,
                )
            });
            stable_sum(per_class) / CHANNELS as f64
        }
    }
}

fn combined_raw(pred: &[f64], truth: &[f64], p: &LossParams) -> f64 {
    p.alpha_mix * focal_raw(pred, truth, p) + (1.0 - p.alpha_mix) * dice_raw(pred, truth, p)
}

/// Mean over pixels of `-sum_c alpha_c (1 - p_c)^gamma y_c log(max(p_c, floor))`.
pub fn focal_loss(pred: &ProbTensor, truth: &OneHotTensor, p: &LossParams) -> Result<f64> {
    check_pair(pred, truth)?;
    p.validate()?;
    Ok(focal_raw(&pred.values, &truth.values, p))
}

/// `1 - (2 sum y p + eps) / (sum y + sum p + eps)`.
pub fn dice_loss(pred: &ProbTensor, truth: &OneHotTensor, p: &LossParams) -> Result<f64> {
    check_pair(pred, truth)?;
    p.validate()?;
    Ok(dice_raw(&pred.values, &truth.values, p))
}

pub fn combined_loss(pred: &ProbTensor, truth: &OneHotTensor, p: &LossParams) -> Result<f64> {
    let focal = focal_loss(pred, truth, p)?;
    let dice = dice_loss(pred, truth, p)?;
    Ok(p.alpha_mix * focal + (1.0 - p.alpha_mix) * dice)
}

/// Mean per-pixel cross-entropy with the same log clamp as the focal term.
pub fn cross_entropy(pred: &ProbTensor, truth: &OneHotTensor, prob_floor: f64) -> Result<f64> {
    check_pair(pred, truth)?;
    let pixels = pred.pixels();
    if pixels == 0 {
        return Ok(0.0);
    }
    let total = stable_sum(
        pred.values
            .iter()
            .zip(&truth.values)
            .map(|(&y, &t)| -t * y.max(prob_floor).ln()),
    );
    Ok(total / pixels as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Focal,
    Dice,
    Combined,
}

impl LossKind {
    fn eval(self, pred: &[f64], truth: &[f64], p: &LossParams) -> f64 {
        match self {
            LossKind::Focal => focal_raw(pred, truth, p),
            LossKind::Dice => dice_raw(pred, truth, p),
            LossKind::Combined => combined_raw(pred, truth, p),
        }
    }
}

fn focal_grad_raw(pred: &[f64], truth: &[f64], p: &LossParams) -> Vec<f64> {
    let pixels = (pred.len() / CHANNELS).max(1) as f64;
    pred.iter()
        .zip(truth)
        .enumerate()
        .map(|(i, (&y, &t))| {
            if t == 0.0 {
                return 0.0;
            }
            let alpha = p.alpha_class[i % CHANNELS];
            let g = p.gamma;
            let one_minus = 1.0 - y;
            let d_weight = if g == 0.0 { 0.0 } else { -g * one_minus.powf(g - 1.0) };
            // the clamped log is constant below the floor
            let (log, d_log) = if y > p.prob_floor {
                (y.ln(), 1.0 / y)
            } else {
                (p.prob_floor.ln(), 0.0)
            };
            -alpha * t * (d_weight * log + one_minus.powf(g) * d_log) / pixels
        })
        .collect()
}

fn dice_grad_raw(pred: &[f64], truth: &[f64], p: &LossParams) -> Vec<f64> {
    let site_grad = |i: f64, s: f64, t: f64| -(2.0 * t * (s + p.epsilon) - (2.0 * i + p.epsilon)) / ((s + p.epsilon) * (s + p.epsilon));
    match p.dice_mode {
        DiceMode::Global => {
            let inter = stable_sum(pred.iter().zip(truth).map(|(y, t)| y * t));
            let sum = stable_sum(truth.iter().copied()) + stable_sum(pred.iter().copied());
            truth.iter().map(|&t| site_grad(inter, sum, t)).collect()
        }
        DiceMode::PerClassMean => {
            let mut stats = [(0.0, 0.0); CHANNELS];
            for (c, stat) in stats.iter_mut().enumerate() {
                let sites = || (c..pred.len()).step_by(CHANNELS);
                *stat = (
                    stable_sum(sites().map(|i| pred[i] * truth[i])),
                    stable_sum(sites().map(|i| truth[i] + pred[i])),
                );
            }
            truth
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let (inter, sum) = stats[i % CHANNELS];
                    site_grad(inter, sum, t) / CHANNELS as f64
                })
                .collect()
        }
    }
}

/// Analytic partial derivatives of the selected loss with respect to every
/// prediction site, treating sites as independent (no renormalization).
pub fn analytic_grad(
    kind: LossKind,
    pred: &ProbTensor,
    truth: &OneHotTensor,
    p: &LossParams,
) -> Result<Vec<f64>> {
    check_pair(pred, truth)?;
    p.validate()?;
    let (y, t) = (&pred.values, &truth.values);
    Ok(match kind {
        LossKind::Focal => focal_grad_raw(y, t, p),
        LossKind::Dice => dice_grad_raw(y, t, p),
        LossKind::Combined => focal_grad_raw(y, t, p)
            .into_iter()
            .zip(dice_grad_raw(y, t, p))
            .map(|(f, d)| p.alpha_mix * f + (1.0 - p.alpha_mix) * d)
            .collect(),
    })
}

/// Central differences `(L(x + h e_i) - L(x - h e_i)) / 2h` for every site.
pub fn finite_diff_grad(
    kind: LossKind,
    pred: &ProbTensor,
    truth: &OneHotTensor,
    p: &LossParams,
    h: f64,
) -> Result<Vec<f64>> {
    check_pair(pred, truth)?;
    p.validate()?;
    if !(h > 0.0) {
        return Err(LossError::InvalidParams(format!("step h must be > 0, got {h}")));
    }
    let floor = p.prob_floor;
    if let Some((site, &value)) = pred
        .values
        .iter()
        .enumerate()
        .find(|(_, &v)| v - h < floor || v + h > 1.0 - floor)
    {
        return Err(LossError::PerturbationOutOfRange {
            site,
            value,
            h,
            floor,
        });
    }
    let mut probe = pred.values.clone();
    let grad = (0..probe.len())
        .map(|i| {
            let x = probe[i];
            probe[i] = x + h;
            let up = kind.eval(&probe, &truth.values, p);
            probe[i] = x - h;
            let down = kind.eval(&probe, &truth.values, p);
            probe[i] = x;
            (up - down) / (2.0 * h)
        })
        .collect();
    Ok(grad)
}

/// `|a - b| / max(|a|, |b|)`, or 0 when both are exactly 0.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Seeded random pair with predictions strictly inside `[margin, 1 - margin]`.
pub fn random_pair(rng: &mut impl Rng, height: usize, width: usize, margin: f64) -> (ProbTensor, OneHotTensor) {
    let pixels = height * width;
    let labels: Vec<u8> = (0..pixels).map(|_| rng.random_range(0..CHANNELS as u8)).collect();
    let values = (0..pixels)
        .flat_map(|_| {
            let raw: [f64; CHANNELS] = std::array::from_fn(|_| rng.random_range(0.05..1.0));
            let total: f64 = raw.iter().sum();
            raw.map(|r| margin + (1.0 - CHANNELS as f64 * margin) * r / total)
        })
        .collect();
    let pred = ProbTensor::new(height, width, values).expect("mixture of normalized values");
    let truth = OneHotTensor::from_labels(
        &LabelMask::from_indices(width, height, &labels).expect("labels below four"),
    );
    (pred, truth)
}

/// One record of the test-vector file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVector {
    pub id: String,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub params: LossParams,
    /// Pixel-major, channel-innermost probabilities.
    pub pred: Vec<f64>,
    /// Hot channel per pixel.
    pub labels: Vec<u8>,
    pub focal: f64,
    pub dice: f64,
    pub combined: f64,
}

impl TestVector {
    pub fn tensors(&self) -> Result<(ProbTensor, OneHotTensor)> {
        let pred = ProbTensor::new(self.height, self.width, self.pred.clone())?;
        let mask = LabelMask::from_indices(self.width, self.height, &self.labels).map_err(|e| {
            LossError::VectorFormat {
                line: 0,
                message: e.to_string(),
            }
        })?;
        Ok((pred, OneHotTensor::from_labels(&mask)))
    }
}

/// Builds `count` seeded vectors, alternating 4x4 and 8x8 tensors.
pub fn build_test_vectors(seed: u64, count: usize, params: &LossParams) -> Result<Vec<TestVector>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let side = if k % 2 == 0 { 4 } else { 8 };
            let (pred, truth) = random_pair(&mut rng, side, side, 1e-3);
            Ok(TestVector {
                id: format!("v{k:04}"),
                seed,
                height: side,
                width: side,
                params: *params,
                focal: focal_loss(&pred, &truth, params)?,
                dice: dice_loss(&pred, &truth, params)?,
                combined: combined_loss(&pred, &truth, params)?,
                labels: truth.labels(),
                pred: pred.values,
            })
        })
        .collect()
}

/// Serializes vectors as JSON lines; floats use shortest round-trip decimals.
pub fn export_test_vectors(seed: u64, count: usize, params: &LossParams) -> Result<String> {
    if count == 0 {
        return Err(LossError::InvalidParams("count must be >= 1".into()));
    }
    let mut out = String::new();
    for v in build_test_vectors(seed, count, params)? {
        out.push_str(&serde_json::to_string(&v).expect("vector serializes"));
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_test_vectors(text: &str) -> Result<Vec<TestVector>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| LossError::VectorFormat {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// A stored value that disagrees with re-evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorMismatch {
    pub id: String,
    pub field: &'static str,
    pub stored: f64,
    pub recomputed: f64,
}

/// Re-evaluates each vector and reports fields off by more than `tolerance`.
pub fn verify_test_vectors(vectors: &[TestVector], tolerance: f64) -> Result<Vec<VectorMismatch>> {
    let mut mismatches = Vec::new();
    for v in vectors {
        let (pred, truth) = v.tensors()?;
        let checks = [
            ("focal", v.focal, focal_loss(&pred, &truth, &v.params)?),
            ("dice", v.dice, dice_loss(&pred, &truth, &v.params)?),
            ("combined", v.combined, combined_loss(&pred, &truth, &v.params)?),
        ];
        for (field, stored, recomputed) in checks {
            if !((stored - recomputed).abs() <= tolerance) {
                mismatches.push(VectorMismatch {
                    id: v.id.clone(),
                    field,
                    stored,
                    recomputed,
                });
            }
        }
    }
    Ok(mismatches)
}
