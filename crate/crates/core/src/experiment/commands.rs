//! File-level entry points behind each CLI subcommand.
//!
//! Every command reads its inputs from disk, writes CSV or WAV artifacts
//! into an output directory and returns the in-memory result as well.

use std::fs::{self, File, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::eval::{evaluate_corpus, separate_signal, CorpusScore};
use super::protocols::{ablate, noise_test, shift_test, write_shift_csv, AblationReport, NoiseTable, ShiftRow};
use super::train::{train, TrainConfig, TrainOutcome};
use crate::audio::{generate_synthetic_corpus, load_corpus, read_wav, write_corpus, write_wav, AudioClip};
use crate::error::{invalid, Result};
use crate::model::{Checkpoint, Separator};

pub const TABLE_CSV: &str = "table1.csv";
pub const FIGURE_CSV: &str = "fig3.csv";
pub const TRAIN_LOG_CSV: &str = "train_log.csv";
pub const CHECKPOINT_NAME: &str = "model.ckpt";
pub const EVAL_CSV: &str = "eval.csv";
pub const SHIFT_CSV: &str = "shift.csv";
pub const NOISE_CSV: &str = "noise.csv";

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Loads a checkpoint for evaluation in double precision.
pub fn load_model(checkpoint: &Path) -> Result<Separator<f64>> {
    Checkpoint::load(checkpoint)?.separator::<f64>()
}

pub fn cmd_gen_corpus(out_dir: &Path, count: usize, duration_s: f64, seed: u64) -> Result<PathBuf> {
    let records = generate_synthetic_corpus(count, duration_s, seed)?;
    write_corpus(out_dir, &records, seed)
}

/// Trains and writes the checkpoint plus a `step,loss,grad_norm` log. A
/// resumed run appends to the existing log.
pub fn cmd_train(cfg: &TrainConfig, corpus: &Path, out_dir: &Path, resume: bool) -> Result<TrainOutcome> {
    let records = load_corpus(corpus)?;
    let mut cfg = cfg.clone();
    if cfg.checkpoint.is_none() {
        cfg.checkpoint = Some(out_dir.join(CHECKPOINT_NAME));
    }
    fs::create_dir_all(out_dir)?;
    let outcome = train(&cfg, &records, resume)?;
    let log_path = out_dir.join(TRAIN_LOG_CSV);
    let append = outcome.start_step > 0 && log_path.exists();
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(&log_path)?;
    let mut w = csv::WriterBuilder::new().has_headers(!append).from_writer(file);
    for row in &outcome.log {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(outcome)
}

/// Runs the full sharing ablation and writes the table and figure CSVs.
pub fn cmd_ablate(template: &TrainConfig, corpus: &Path, out_dir: &Path) -> Result<AblationReport> {
    let records = load_corpus(corpus)?;
    let report = ablate(template, &records)?;
    report.write_table(create(out_dir, TABLE_CSV)?)?;
    report.write_figure(create(out_dir, FIGURE_CSV)?)?;
    Ok(report)
}

pub fn cmd_eval(checkpoint: &Path, corpus: &Path, out_dir: &Path) -> Result<CorpusScore> {
    let model = load_model(checkpoint)?;
    let score = evaluate_corpus(&model, &load_corpus(corpus)?)?;
    let mut w = csv::Writer::from_writer(create(out_dir, EVAL_CSV)?);
    for row in &score.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(score)
}

/// Writes one WAV per source, named `<input stem>_s<k>.wav`.
pub fn cmd_separate(checkpoint: &Path, input: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let model = load_model(checkpoint)?;
    let clip = read_wav(input)?;
    let estimates = separate_signal(&model, &clip.samples)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("mixture");
    fs::create_dir_all(out_dir)?;
    estimates
        .into_iter()
        .enumerate()
        .map(|(c, samples)| {
            let path = out_dir.join(format!("{stem}_s{}.wav", c + 1));
            write_wav(&path, &AudioClip::new(samples)?)?;
            Ok(path)
        })
        .collect()
}

/// Shift sensitivity over the whole corpus, or over one record when `record`
/// names its id.
pub fn cmd_shift_test(
    checkpoint: &Path,
    corpus: &Path,
    record: Option<&str>,
    shifts: &[usize],
    out_dir: &Path,
) -> Result<Vec<ShiftRow>> {
    let model = load_model(checkpoint)?;
    let mut records = load_corpus(corpus)?;
    if let Some(id) = record {
        records.retain(|r| r.id == id);
        if records.is_empty() {
            return Err(invalid("shift_test", format!("no record with id `{id}`")));
        }
    }
    let rows = shift_test(&model, &records, shifts)?;
    write_shift_csv(&rows, create(out_dir, SHIFT_CSV)?)?;
    Ok(rows)
}

pub fn cmd_noise_test(
    checkpoint: &Path,
    corpus: &Path,
    noise_dir: Option<&Path>,
    snrs_db: &[f64],
    seed: u64,
    out_dir: &Path,
) -> Result<NoiseTable> {
    let model = load_model(checkpoint)?;
    let table = noise_test(&model, &load_corpus(corpus)?, snrs_db, noise_dir, seed)?;
    NoiseTable::write_csv(std::slice::from_ref(&table), create(out_dir, NOISE_CSV)?)?;
    Ok(table)
}
