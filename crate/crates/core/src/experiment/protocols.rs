//! Ablation over sharing schemes and the two robustness protocols.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::eval::{evaluate_corpus, evaluate_signal};
use super::train::{train, TrainConfig};
use crate::audio::{add_noise, MixtureRecord, NoiseKind};
use crate::error::{invalid, Error, Result};
use crate::metrics::evaluate;
use crate::model::{ModelConfig, Separator};
use crate::numeric::Scalar;
use crate::sharing::{audit_against, enumerate_ablation_grid};

/// Default shift grid of the shift-sensitivity protocol.
pub const SHIFTS: [usize; 11] = [0, 25, 50, 75, 100, 125, 150, 175, 200, 225, 250];

/// Default SNR levels of the noise-robustness protocol.
pub const NOISE_SNRS_DB: [f64; 3] = [0.0, 3.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Base,
    Shared,
    Simplified,
}

/// One trained-and-scored configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub model_label: String,
    pub scheme: String,
    pub size_params: usize,
    pub compression_pct: f64,
    pub si_snri_db: f64,
    pub sdri_db: f64,
    pub family: Family,
}

#[derive(Serialize)]
struct TableCsvRow<'a> {
    model_label: &'a str,
    scheme: &'a str,
    size_params: usize,
    compression_pct: String,
    si_snri_db: String,
    sdri_db: String,
}

#[derive(Serialize)]
struct FigureCsvRow<'a> {
    model_label: &'a str,
    params: usize,
    si_snri_db: String,
    family: Family,
}

/// The sixteen schemes in grid order followed by the two simplified controls.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub rows: Vec<ExperimentRow>,
}

impl AblationReport {
    /// Table-shaped CSV: size, compression and improvement per configuration.
    pub fn write_table<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(TableCsvRow {
                model_label: &r.model_label,
                scheme: &r.scheme,
                size_params: r.size_params,
                compression_pct: format!("{:.2}", r.compression_pct),
                si_snri_db: format!("{:.4}", r.si_snri_db),
                sdri_db: format!("{:.4}", r.sdri_db),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Size-versus-quality points tagged by family.
    pub fn write_figure<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(FigureCsvRow {
                model_label: &r.model_label,
                params: r.size_params,
                si_snri_db: format!("{:.4}", r.si_snri_db),
                family: r.family,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

fn run_one(
    config: ModelConfig,
    base: &ModelConfig,
    label: String,
    family: Family,
    template: &TrainConfig,
    corpus: &[MixtureRecord],
) -> Result<ExperimentRow> {
    let report = audit_against(&config, base);
    let mut cfg = template.clone();
    cfg.model = config;
    cfg.checkpoint = None;
    let outcome = train(&cfg, corpus, false)?;
    let score = evaluate_corpus(&outcome.model, corpus)?;
    Ok(ExperimentRow {
        model_label: label,
        scheme: report.scheme,
        size_params: report.total,
        compression_pct: report.compression_pct,
        si_snri_db: score.mean_si_snri,
        sdri_db: score.mean_sdri,
        family,
    })
}

/// Trains and scores every sharing scheme of `template.model` plus its
/// single-stack and single-block controls, all with the same seed, budget
/// and data order. Scores are on the training corpus.
pub fn ablate(template: &TrainConfig, corpus: &[MixtureRecord]) -> Result<AblationReport> {
    let base = template.model.clone().with_sharing(Default::default());
    let mut rows = Vec::with_capacity(18);
    for sharing in enumerate_ablation_grid() {
        let config = base.clone().with_sharing(sharing);
        let label = config.family.scheme_label(&sharing);
        let family = if sharing.is_unshared() { Family::Base } else { Family::Shared };
        rows.push(run_one(config, &base, label, family, template, corpus)?);
    }
    let controls = [
        ("simplified1", base.clone().simplified_single_stack()),
        ("simplified2", base.clone().simplified_single_block()),
    ];
    for (label, config) in controls {
        rows.push(run_one(config, &base, label.to_string(), Family::Simplified, template, corpus)?);
    }
    Ok(AblationReport { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftRow {
    pub shift: usize,
    pub delta_si_snri_db: f64,
}

/// Change in mean SI-SNRi over `records` when the first `s` samples of every
/// mixture and reference are dropped, for each `s` in `shifts`.
pub fn shift_test<T: Scalar>(model: &Separator<T>, records: &[MixtureRecord], shifts: &[usize]) -> Result<Vec<ShiftRow>> {
    if records.is_empty() {
        return Err(invalid("shift_test", "no records"));
    }
    let max_shift = shifts.iter().copied().max().unwrap_or(0);
    let required = max_shift + model.config().window;
    for r in records {
        if r.len() < required {
            return Err(Error::TooShort {
                op: "shift_test",
                required,
                actual: r.len(),
            });
        }
        if r.sources.iter().any(|s| s.len() != r.len()) {
            return Err(invalid("shift_test", "references must match the mixture length"));
        }
    }
    let mean_at = |s: usize| -> Result<f64> {
        let mut total = 0.0;
        for r in records {
            let refs: Vec<&[f64]> = r.sources.iter().map(|c| &c.samples[s..]).collect();
            total += evaluate_signal(model, &r.mixture.samples[s..], &refs)?.si_snri;
        }
        Ok(total / records.len() as f64)
    };
    let base = mean_at(0)?;
    shifts
        .iter()
        .map(|&s| {
            let score = if s == 0 { base } else { mean_at(s)? };
            Ok(ShiftRow {
                shift: s,
                delta_si_snri_db: score - base,
            })
        })
        .collect()
}

pub fn write_shift_csv<W: Write>(rows: &[ShiftRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["shift", "delta_si_snri_db"])?;
    for r in rows {
        w.write_record([r.shift.to_string(), format!("{:.6}", r.delta_si_snri_db)])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean SI-SNRi against the clean references, per noise condition.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTable {
    pub model_label: String,
    pub clean: f64,
    pub snrs_db: Vec<f64>,
    /// `cells[k][j]`: kind `NoiseKind::ALL[k]` at `snrs_db[j]`.
    pub cells: Vec<Vec<f64>>,
}

impl NoiseTable {
    pub fn get(&self, kind: NoiseKind, snr_index: usize) -> f64 {
        let k = NoiseKind::ALL.iter().position(|&x| x == kind).expect("known kind");
        self.cells[k][snr_index]
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["model".to_string(), "clean".to_string()];
        for kind in NoiseKind::ALL {
            for snr in &self.snrs_db {
                h.push(format!("{}_{}db", kind.short_label(), snr));
            }
        }
        h
    }

    pub fn write_csv<W: Write>(tables: &[NoiseTable], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if let Some(first) = tables.first() {
            w.write_record(first.header())?;
        }
        for t in tables {
            let mut row = vec![t.model_label.clone(), format!("{:.4}", t.clean)];
            row.extend(t.cells.iter().flatten().map(|v| format!("{v:.4}")));
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Re-scores every record after adding each kind of noise at each SNR. The
/// noise draw for record `i` is seeded by `seed ^ i`, so the same waveform
/// is reused across SNR levels.
pub fn noise_test<T: Scalar>(
    model: &Separator<T>,
    corpus: &[MixtureRecord],
    snrs_db: &[f64],
    noise_dir: Option<&Path>,
    seed: u64,
) -> Result<NoiseTable> {
    let clean = evaluate_corpus(model, corpus)?.mean_si_snri;
    let mut cells = Vec::with_capacity(NoiseKind::ALL.len());
    for kind in NoiseKind::ALL {
        let mut row = Vec::with_capacity(snrs_db.len());
        for &snr in snrs_db {
            let mut total = 0.0;
            for (i, record) in corpus.iter().enumerate() {
                let noisy = add_noise(record, kind, snr, noise_dir, seed ^ i as u64)?;
                total += score_noisy(model, &noisy)?;
            }
            row.push(total / corpus.len() as f64);
        }
        cells.push(row);
    }
    Ok(NoiseTable {
        model_label: model.config().family.scheme_label(&model.config().sharing),
        clean,
        snrs_db: snrs_db.to_vec(),
        cells,
    })
}

fn score_noisy<T: Scalar>(model: &Separator<T>, noisy: &MixtureRecord) -> Result<f64> {
    let mixture = &noisy.mixture.samples;
    let estimates = super::eval::separate_signal(model, mixture)?;
    let len = estimates[0].len();
    let refs: Vec<&[f64]> = noisy.sources.iter().map(|s| &s.samples[..len]).collect();
    Ok(evaluate(&mixture[..len], &estimates, &refs)?.si_snri)
}
