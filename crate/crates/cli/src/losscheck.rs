//! `loss-check`: kernel self-tests, gradient checks and the test-vector file.

use crate::config::PipelineConfig;
use crate::error::{invalid, CliError, Result};
use crate::workspace::write_file;
use lumbarkit::loss::{
    analytic_grad, combined_loss, cross_entropy, dice_loss, export_test_vectors, finite_diff_grad, focal_loss,
    parse_test_vectors, random_pair, relative_error, verify_test_vectors, DiceMode, LossKind, LossParams,
    OneHotTensor, ProbTensor, CHANNELS,
};
use lumbarkit::LabelMask;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossCheckReport {
    pub params: LossParams,
    pub checks: Vec<CheckResult>,
    pub vector_file: Option<String>,
}

impl LossCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        detail,
    }
}

fn loss_err(e: impl std::fmt::Display) -> CliError {
    invalid(format!("loss kernel: {e}"))
}

/// Focal loss of one pixel whose true class has probability 0.5, at
/// gamma 4 and class weight 0.6, against `0.6 * 0.5^4 * ln 2`.
pub fn closed_form_check() -> Result<CheckResult> {
    let pred = ProbTensor::new(1, 1, vec![0.5, 0.5 / 3.0, 0.5 / 3.0, 0.5 / 3.0]).map_err(loss_err)?;
    let truth = OneHotTensor::from_labels(&LabelMask::from_indices(1, 1, &[0]).expect("one label"));
    let params = LossParams {
        gamma: 4.0,
        alpha_class: [0.6; CHANNELS],
        ..LossParams::default()
    };
    let got = focal_loss(&pred, &truth, &params).map_err(loss_err)?;
    let want = 0.0259930;
    Ok(check(
        "focal_closed_form",
        (got - want).abs() <= 1e-6,
        format!("focal = {got:.9}, expected {want} within 1e-6"),
    ))
}

/// With gamma 0 and unit class weights the focal term is plain cross-entropy.
pub fn cross_entropy_check(seed: u64, count: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = LossParams {
        gamma: 0.0,
        alpha_class: [1.0; CHANNELS],
        ..LossParams::default()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let (pred, truth) = random_pair(&mut rng, 4, 4, 1e-3);
        let f = focal_loss(&pred, &truth, &params).map_err(loss_err)?;
        let ce = cross_entropy(&pred, &truth, params.prob_floor).map_err(loss_err)?;
        worst = worst.max((f - ce).abs());
    }
    Ok(check(
        "focal_gamma0_is_cross_entropy",
        worst <= 1e-12,
        format!("max |focal - ce| = {worst:e} over {count} tensors, limit 1e-12"),
    ))
}

/// combined(alpha_mix) == alpha_mix * focal + (1 - alpha_mix) * dice.
pub fn linearity_check(params: &LossParams, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pred, truth) = random_pair(&mut rng, 4, 4, 1e-3);
    let mut worst: f64 = 0.0;
    for mix in [0.0, 0.25, 0.5, params.alpha_mix, 1.0] {
        let p = LossParams { alpha_mix: mix, ..*params };
        let f = focal_loss(&pred, &truth, &p).map_err(loss_err)?;
        let d = dice_loss(&pred, &truth, &p).map_err(loss_err)?;
        let c = combined_loss(&pred, &truth, &p).map_err(loss_err)?;
        worst = worst.max((c - (mix * f + (1.0 - mix) * d)).abs());
    }
    Ok(check(
        "combined_linear_in_alpha_mix",
        worst <= 1e-12,
        format!("max deviation {worst:e}, limit 1e-12"),
    ))
}

/// Largest relative error between analytic and central-difference gradients.
///
/// Sites where both gradients are below `abs_floor` in difference are
/// skipped; per-class dice has near-zero gradients for classes absent
/// from the truth, where differences only resolve rounding noise.
pub fn gradient_check(params: &LossParams, seed: u64, tensors: usize, h: f64, abs_floor: f64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    for t in 0..tensors {
        let (pred, truth) = random_pair(&mut rng, 4, 4, 0.01);
        for kind in [LossKind::Focal, LossKind::Dice, LossKind::Combined] {
            let a = analytic_grad(kind, &pred, &truth, params).map_err(loss_err)?;
            let n = finite_diff_grad(kind, &pred, &truth, params, h).map_err(loss_err)?;
            for (i, (x, y)) in a.iter().zip(&n).enumerate() {
                if (x - y).abs() < abs_floor {
                    continue;
                }
                let err = relative_error(*x, *y);
                if err > worst {
                    worst = err;
                    worst_at = format!(" at tensor {t} {kind:?} site {i}");
                }
            }
        }
    }
    Ok(check(
        "gradient_central_difference",
        worst < 1e-5,
        format!("max relative error {worst:e}{worst_at} over {tensors} 4x4 tensors, h = {h:e}, limit 1e-5"),
    ))
}

pub fn self_tests(params: &LossParams, seed: u64) -> Result<Vec<CheckResult>> {
    let floor = if params.dice_mode == DiceMode::PerClassMean { 1e-11 } else { 0.0 };
    Ok(vec![
        closed_form_check()?,
        cross_entropy_check(seed, 20)?,
        linearity_check(params, seed)?,
        gradient_check(params, seed, 20, 1e-5, floor)?,
    ])
}

fn vector_failures(text: &str, tolerance: f64) -> Result<Vec<String>> {
    let vectors = parse_test_vectors(text).map_err(|e| invalid(format!("vector file: {e}")))?;
    let mismatches = verify_test_vectors(&vectors, tolerance).map_err(|e| invalid(format!("vector file: {e}")))?;
    Ok(mismatches
        .iter()
        .map(|m| {
            format!(
                "vector {} field {}: stored {} recomputed {}",
                m.id, m.field, m.stored, m.recomputed
            )
        })
        .collect())
}

/// Emit mode writes `loss/vectors.jsonl` and `loss/check.json` under the
/// output directory. Verify mode only re-evaluates `verify`.
pub fn cmd_losscheck(cfg: &PipelineConfig, verify: Option<&Path>) -> Result<LossCheckReport> {
    let params = cfg.loss.params;
    if let Some(path) = verify {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let failures = vector_failures(&text, cfg.loss.tolerance)?;
        let report = LossCheckReport {
            params,
            checks: vec![check(
                "vector_file",
                failures.is_empty(),
                if failures.is_empty() {
                    format!("all vectors within {:e}", cfg.loss.tolerance)
                } else {
                    failures.join("; ")
                },
            )],
            vector_file: Some(path.display().to_string()),
        };
        if !report.passed() {
            return Err(CliError::Tolerance(report.checks[0].detail.clone()));
        }
        return Ok(report);
    }

    let output = cfg.output_dir()?;
    let mut checks = self_tests(&params, cfg.loss.seed)?;
    let text = export_test_vectors(cfg.loss.seed, cfg.loss.count, &params).map_err(loss_err)?;
    let vector_path: PathBuf = output.join("loss").join("vectors.jsonl");
    write_file(&vector_path, text.as_bytes())?;
    let failures = vector_failures(&text, 0.0)?;
    checks.push(check(
        "vector_round_trip",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} vectors re-evaluated exactly after parsing", cfg.loss.count)
        } else {
            failures.join("; ")
        },
    ));

    let report = LossCheckReport {
        params,
        checks,
        vector_file: Some("loss/vectors.jsonl".into()),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&output.join("loss").join("check.json"), format!("{json}\n").as_bytes())?;
    if !report.passed() {
        let failed: Vec<String> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        return Err(CliError::Tolerance(failed.join("; ")));
    }
    Ok(report)
}
