//! Separation metrics and the permutation-invariant training objective.
//!
//! Both SI-SNR and SDR mean-center their inputs and saturate at
//! [`CLAMP_DB`] instead of returning infinities. SDR here is the plain
//! signal-to-error ratio, not the BSS-Eval projection.

use itertools::Itertools;
use serde::Serialize;

use crate::error::{invalid, shape_err, Error, Result};
use crate::numeric::{Scalar, Tape, Var};

pub const CLAMP_DB: f64 = 100.0;

/// Largest source count handled by exhaustive permutation search.
pub const MAX_PIT_SOURCES: usize = 4;

const DB_PER_NEPER: f64 = 10.0 / std::f64::consts::LN_10;

fn centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Centered reference energy, or an error when it is zero up to the
/// rounding left behind by centering (a constant signal, say).
fn reference_energy(raw: &[f64], centered: &[f64]) -> Result<f64> {
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = raw.len() as f64 * (4.0 * f64::EPSILON * peak).powi(2);
    let e = energy(centered);
    if e <= floor {
        return Err(Error::ZeroReference);
    }
    Ok(e)
}

fn check_pair(estimate: &[f64], reference: &[f64]) -> Result<()> {
    if reference.is_empty() {
        return Err(invalid("si_snr", "empty signals"));
    }
    if estimate.len() != reference.len() {
        return Err(shape_err("si_snr", "signal length", reference.len(), estimate.len()));
    }
    Ok(())
}

/// `10 log10(num / den)`, saturated. `None` when saturated.
fn ratio_db(num: f64, den: f64) -> (f64, bool) {
    if num <= 0.0 {
        return (-CLAMP_DB, true);
    }
    if den <= 0.0 {
        return (CLAMP_DB, true);
    }
    let db = 10.0 * (num / den).log10();
    if db >= CLAMP_DB {
        (CLAMP_DB, true)
    } else if db <= -CLAMP_DB {
        (-CLAMP_DB, true)
    } else {
        (db, false)
    }
}

/// SI-SNR in dB and, optionally, its gradient with respect to `estimate`.
/// The gradient is zero wherever the value is clamped.
pub(crate) fn si_snr_with_grad(
    estimate: &[f64],
    reference: &[f64],
    with_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    check_pair(estimate, reference)?;
    let est = centered(estimate);
    let centered_ref = centered(reference);
    let ref_energy = reference_energy(reference, &centered_ref)?;
    let reference = centered_ref;
    let alpha = est.iter().zip(&reference).map(|(a, b)| a * b).sum::<f64>() / ref_energy;
    let target: Vec<f64> = reference.iter().map(|r| alpha * r).collect();
    let residual: Vec<f64> = est.iter().zip(&target).map(|(e, t)| e - t).collect();
    let (target_energy, residual_energy) = (energy(&target), energy(&residual));
    let (value, clamped) = ratio_db(target_energy, residual_energy);
    if !with_grad {
        return Ok((value, None));
    }
    if clamped {
        return Ok((value, Some(vec![0.0; est.len()])));
    }
    // d/d(est) of 10 log10(|t|^2 / |e|^2) is (10 / ln 10) (2t/|t|^2 - 2e/|e|^2);
    // both terms are already zero-mean so the centering Jacobian drops out.
    let grad = target
        .iter()
        .zip(&residual)
        .map(|(t, e)| DB_PER_NEPER * (2.0 * t / target_energy - 2.0 * e / residual_energy))
        .collect();
    Ok((value, Some(grad)))
}

pub fn si_snr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    si_snr_with_grad(estimate, reference, false).map(|(v, _)| v)
}

pub fn sdr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(estimate, reference)?;
    let est = centered(estimate);
    let centered_ref = centered(reference);
    let ref_energy = reference_energy(reference, &centered_ref)?;
    let reference = centered_ref;
    let err_energy: f64 = est.iter().zip(&reference).map(|(e, r)| (r - e) * (r - e)).sum();
    Ok(ratio_db(ref_energy, err_energy).0)
}

/// `perm[c]` is the estimate assigned to reference `c`.
pub type Permutation = Vec<usize>;

fn check_sources(estimates: usize, references: usize) -> Result<()> {
    if estimates != references {
        return Err(shape_err("pit", "source count", references, estimates));
    }
    if references == 0 || references > MAX_PIT_SOURCES {
        return Err(invalid(
            "pit",
            format!("source count must be in 1..={MAX_PIT_SOURCES}, got {references}"),
        ));
    }
    Ok(())
}

/// Permutation maximizing mean SI-SNR; ties resolve to the lexicographically
/// smallest permutation. Returns the permutation and its mean SI-SNR.
pub fn best_permutation<E: AsRef<[f64]>, R: AsRef<[f64]>>(
    estimates: &[E],
    references: &[R],
) -> Result<(Permutation, f64)> {
    check_sources(estimates.len(), references.len())?;
    let c = references.len();
    let mut scores = vec![0.0; c * c];
    for (r, reference) in references.iter().enumerate() {
        for (e, estimate) in estimates.iter().enumerate() {
            scores[r * c + e] = si_snr(estimate.as_ref(), reference.as_ref())?;
        }
    }
    let mut best: Option<(Permutation, f64)> = None;
    for perm in (0..c).permutations(c) {
        let mean = perm.iter().enumerate().map(|(r, &e)| scores[r * c + e]).sum::<f64>() / c as f64;
        if best.as_ref().is_none_or(|(_, b)| mean > *b) {
            best = Some((perm, mean));
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// PIT loss on plain signals: negative mean SI-SNR under the best permutation.
pub fn pit_loss_value<E: AsRef<[f64]>, R: AsRef<[f64]>>(
    estimates: &[E],
    references: &[R],
) -> Result<(f64, Permutation)> {
    let (perm, mean) = best_permutation(estimates, references)?;
    Ok((-mean, perm))
}

/// Differentiable PIT loss on a recorded `[C, T]` estimate. Gradients flow
/// through the selected permutation only.
pub fn pit_loss<T: Scalar>(tape: &mut Tape<T>, estimates: Var, references: &[Vec<T>]) -> Result<(Var, Permutation)> {
    let shape = tape.shape(estimates).to_vec();
    if shape.len() != 2 {
        return Err(shape_err("pit_loss", "estimate rank", 2, shape.len()));
    }
    check_sources(shape[0], references.len())?;
    let plain_est: Vec<Vec<f64>> = (0..shape[0])
        .map(|c| tape.value(estimates).row(c).iter().map(|v| v.as_f64()).collect())
        .collect();
    let plain_ref: Vec<Vec<f64>> = references
        .iter()
        .map(|r| r.iter().map(|v| v.as_f64()).collect())
        .collect();
    let (perm, _) = best_permutation(&plain_est, &plain_ref)?;

    let mut total: Option<Var> = None;
    for (r, &e) in perm.iter().enumerate() {
        let row = tape.row(estimates, e)?;
        let score = tape.si_snr(row, &references[r])?;
        total = Some(match total {
            Some(acc) => tape.add(acc, score)?,
            None => score,
        });
    }
    let total = total.expect("at least one source");
    let loss = tape.scale(total, T::from_f64(-1.0 / perm.len() as f64))?;
    Ok((loss, perm))
}

/// Per-utterance scores under the PIT-optimal permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// SI-SNR of the assigned estimate for each reference.
    pub si_snr: Vec<f64>,
    pub si_snri: f64,
    pub sdr: Vec<f64>,
    pub sdri: f64,
    pub permutation: Permutation,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn evaluate<E: AsRef<[f64]>, R: AsRef<[f64]>>(
    mixture: &[f64],
    estimates: &[E],
    references: &[R],
) -> Result<EvalResult> {
    let (perm, _) = best_permutation(estimates, references)?;
    let mut si = Vec::with_capacity(perm.len());
    let mut sd = Vec::with_capacity(perm.len());
    let mut si_base = Vec::with_capacity(perm.len());
    let mut sd_base = Vec::with_capacity(perm.len());
    for (r, &e) in perm.iter().enumerate() {
        let reference = references[r].as_ref();
        si.push(si_snr(estimates[e].as_ref(), reference)?);
        sd.push(sdr(estimates[e].as_ref(), reference)?);
        si_base.push(si_snr(mixture, reference)?);
        sd_base.push(sdr(mixture, reference)?);
    }
    Ok(EvalResult {
        si_snri: mean(&si) - mean(&si_base),
        sdri: mean(&sd) - mean(&sd_base),
        si_snr: si,
        sdr: sd,
        permutation: perm,
    })
}

pub fn si_snri<E: AsRef<[f64]>, R: AsRef<[f64]>>(mixture: &[f64], estimates: &[E], references: &[R]) -> Result<f64> {
    evaluate(mixture, estimates, references).map(|r| r.si_snri)
}

pub fn sdri<E: AsRef<[f64]>, R: AsRef<[f64]>>(mixture: &[f64], estimates: &[E], references: &[R]) -> Result<f64> {
    evaluate(mixture, estimates, references).map(|r| r.sdri)
}

/// One CSV row of evaluation output.
#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub utterance_id: String,
    pub scheme: String,
    pub si_snr: String,
    pub si_snri: String,
    pub sdr: String,
    pub sdri: String,
    pub permutation: String,
}

fn join<I: IntoIterator<Item = String>>(items: I) -> String {
    items.into_iter().collect::<Vec<_>>().join(";")
}

impl EvalRow {
    pub fn new(utterance_id: impl Into<String>, scheme: impl Into<String>, result: &EvalResult) -> Self {
        Self {
            utterance_id: utterance_id.into(),
            scheme: scheme.into(),
            si_snr: join(result.si_snr.iter().map(|v| format!("{v:.4}"))),
            si_snri: format!("{:.4}", result.si_snri),
            sdr: join(result.sdr.iter().map(|v| format!("{v:.4}"))),
            sdri: format!("{:.4}", result.sdri),
            permutation: join(result.permutation.iter().map(|v| v.to_string())),
        }
    }
}
