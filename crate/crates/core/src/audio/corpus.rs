//! Synthetic two-source corpus and its on-disk manifest.
//!
//! Each record pairs an amplitude-modulated harmonic tone (fundamental in
//! 110-220 Hz, a handful of harmonics) with amplitude-modulated band-pass
//! noise centred between 2.4 and 3 kHz. The two occupy disjoint bands, so a
//! small model can learn to split them.
//!
//! The manifest is tab-separated with a header row:
//!
//! ```text
//! id  mixture  sources  snr_db  scale  noise  seed
//! ```
//!
//! `sources` joins the per-source paths with `;`. Paths are relative to the
//! manifest's directory. `noise` is `none` or `<kind>@<snr_db>[@<file>]`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mixing::{mix_at_snr, MixtureRecord};
use super::wav::{read_wav, write_wav, AudioClip, SAMPLE_RATE};
use crate::error::{invalid, Error, Result};

pub const MANIFEST_NAME: &str = "manifest.tsv";
pub const SNR_RANGE_DB: (f64, f64) = (-5.0, 5.0);
pub const PEAK: f64 = 0.9;

const HARMONICS: usize = 5;

/// Filter output discarded before the kept span, so records do not open
/// with the filter's start-up ramp.
const FILTER_WARMUP: usize = 256;

fn unit_power(mut x: Vec<f64>) -> Vec<f64> {
    let p = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let g = p.sqrt().recip();
    x.iter_mut().for_each(|v| *v *= g);
    x
}

/// Slow gain envelope in `[1 - depth, 1 + depth]`.
fn envelope(rng: &mut ChaCha8Rng, len: usize, depth: f64) -> Vec<f64> {
    let rate = rng.random_range(2.0..6.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    (0..len)
        .map(|i| 1.0 + depth * (2.0 * PI * rate * i as f64 / SAMPLE_RATE as f64 + phase).sin())
        .collect()
}

fn harmonic_tone(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let f0 = rng.random_range(110.0..220.0);
    let phases: Vec<f64> = (0..HARMONICS).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let env = envelope(rng, len, 0.5);
    let fs = SAMPLE_RATE as f64;
    (0..len)
        .map(|i| {
            let t = i as f64 / fs;
            let tone: f64 = phases
                .iter()
                .enumerate()
                .map(|(k, ph)| {
                    let h = (k + 1) as f64;
                    (2.0 * PI * h * f0 * t + ph).sin() / h
                })
                .sum();
            tone * env[i]
        })
        .collect()
}

/// Band-pass biquad (constant 0 dB peak gain).
fn bandpass(x: &[f64], center_hz: f64, q: f64) -> Vec<f64> {
    let w0 = 2.0 * PI * center_hz / SAMPLE_RATE as f64;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let (b0, b2) = (alpha / a0, -alpha / a0);
    let (a1, a2) = (-2.0 * w0.cos() / a0, (1.0 - alpha) / a0);
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    x.iter()
        .map(|&x0| {
            let y0 = b0 * x0 + b2 * x2 - a1 * y1 - a2 * y2;
            (x2, x1) = (x1, x0);
            (y2, y1) = (y1, y0);
            y0
        })
        .collect()
}

fn band_noise(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let center = rng.random_range(2400.0..3000.0);
    let white: Vec<f64> = (0..len + FILTER_WARMUP).map(|_| rng.sample(StandardNormal)).collect();
    let filtered = &bandpass(&bandpass(&white, center, 2.0), center, 2.0)[FILTER_WARMUP..];
    let env = envelope(rng, len, 0.5);
    filtered.iter().zip(env).map(|(v, e)| v * e).collect()
}

pub fn record_id(index: usize) -> String {
    format!("syn{index:04}")
}

/// One record, a pure function of `(index, seed)`.
pub fn synthetic_record(index: usize, duration_s: f64, seed: u64) -> Result<MixtureRecord> {
    let len = (duration_s * SAMPLE_RATE as f64).round() as usize;
    if len == 0 {
        return Err(invalid("synthetic_record", format!("duration {duration_s} s yields no samples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index as u64);
    let tone = AudioClip::new(unit_power(harmonic_tone(&mut rng, len)))?;
    let noise = AudioClip::new(unit_power(band_noise(&mut rng, len)))?;
    let snr = rng.random_range(SNR_RANGE_DB.0..=SNR_RANGE_DB.1);
    let mut record = mix_at_snr(&tone, &noise, snr)?.normalize_peak(PEAK);
    record.id = record_id(index);
    Ok(record)
}

pub fn generate_synthetic_corpus(count: usize, duration_s: f64, seed: u64) -> Result<Vec<MixtureRecord>> {
    if count == 0 {
        return Err(invalid("generate_synthetic_corpus", "count must be at least 1"));
    }
    (0..count).map(|i| synthetic_record(i, duration_s, seed)).collect()
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub mixture: String,
    pub sources: String,
    pub snr_db: f64,
    pub scale: f64,
    pub noise: String,
    pub seed: u64,
}

fn noise_field(record: &MixtureRecord) -> String {
    match &record.noise {
        None => "none".into(),
        Some(n) => match &n.source {
            Some(p) => format!("{}@{}@{}", n.kind, n.snr_db, p.display()),
            None => format!("{}@{}", n.kind, n.snr_db),
        },
    }
}

/// Writes every record's mixture and sources as WAV plus the manifest.
/// `seed` is the corpus seed; each row stores its derived record seed.
pub fn write_corpus(dir: &Path, records: &[MixtureRecord], seed: u64) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let manifest = dir.join(MANIFEST_NAME);
    let mut writer = csv::WriterBuilder::new().delimiter(b'\t').from_path(&manifest)?;
    for (index, record) in records.iter().enumerate() {
        let mix_name = format!("{}_mix.wav", record.id);
        write_wav(&dir.join(&mix_name), &record.mixture)?;
        let mut names = Vec::with_capacity(record.sources.len());
        for (c, source) in record.sources.iter().enumerate() {
            let name = format!("{}_s{}.wav", record.id, c + 1);
            write_wav(&dir.join(&name), source)?;
            names.push(name);
        }
        writer.serialize(ManifestEntry {
            id: record.id.clone(),
            mixture: mix_name,
            sources: names.join(";"),
            snr_db: record.snr_db,
            scale: record.scale,
            noise: noise_field(record),
            seed: seed ^ index as u64,
        })?;
    }
    writer.flush()?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut reader = csv::ReaderBuilder::new().delimiter(b'\t').from_path(path)?;
    let entries = reader.deserialize().collect::<std::result::Result<Vec<ManifestEntry>, _>>()?;
    if entries.is_empty() {
        return Err(Error::Manifest(format!("{} lists no records", path.display())));
    }
    Ok(entries)
}

/// Accepts either a manifest file or the directory holding one.
pub fn resolve_manifest(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_NAME)
    } else {
        path.to_path_buf()
    }
}

/// Loads a corpus written by [`write_corpus`]. Components come back
/// 16-bit quantized, so the mixture is the stored file, not a re-sum.
pub fn load_corpus(path: &Path) -> Result<Vec<MixtureRecord>> {
    let manifest = resolve_manifest(path);
    let base = manifest.parent().unwrap_or(Path::new("."));
    read_manifest(&manifest)?
        .into_iter()
        .map(|e| {
            let mixture = read_wav(&base.join(&e.mixture))?;
            let sources = e
                .sources
                .split(';')
                .map(|s| read_wav(&base.join(s)))
                .collect::<Result<Vec<_>>>()?;
            if sources.iter().any(|s| s.len() != mixture.len()) {
                return Err(Error::Manifest(format!("record {}: source and mixture lengths differ", e.id)));
            }
            Ok(MixtureRecord {
                id: e.id,
                mixture,
                sources,
                snr_db: e.snr_db,
                noise: None,
                scale: e.scale,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandpass_passes_center_and_rejects_low() {
        let tone = |f: f64| -> Vec<f64> {
            (0..4000)
                .map(|i| (2.0 * PI * f * i as f64 / SAMPLE_RATE as f64).sin())
                .collect()
        };
        let p = |x: &[f64]| x[2000..].iter().map(|v| v * v).sum::<f64>();
        let pass = bandpass(&tone(2700.0), 2700.0, 2.0);
        let stop = bandpass(&tone(150.0), 2700.0, 2.0);
        assert!(p(&pass) > 100.0 * p(&stop));
    }

    #[test]
    fn zero_count_rejected() {
        assert!(generate_synthetic_corpus(0, 1.0, 0).is_err());
    }

    #[test]
    fn snr_within_training_range() {
        for r in generate_synthetic_corpus(8, 0.25, 3).unwrap() {
            assert!((SNR_RANGE_DB.0..=SNR_RANGE_DB.1).contains(&r.snr_db));
            assert_eq!(r.sources.len(), 2);
        }
    }
}
