use std::path::Path;

use hound::{SampleFormat, WavSpec};

use crate::error::{invalid, Error, Result};

/// The only rate the pipeline accepts.
pub const SAMPLE_RATE: u32 = 8000;

const PCM_SCALE: f64 = 32768.0;

/// Mono waveform with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    /// An 8 kHz clip; rejects non-finite samples.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(invalid("audio_clip", format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate: SAMPLE_RATE,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean square.
    pub fn power(&self) -> f64 {
        mean_power(&self.samples)
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

pub fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

fn describe(spec: &WavSpec) -> String {
    let format = match spec.sample_format {
        SampleFormat::Int => "int",
        SampleFormat::Float => "float",
    };
    format!(
        "{} Hz, {} channel(s), {}-bit {}",
        spec.sample_rate, spec.channels, spec.bits_per_sample, format
    )
}

/// Reads a 16-bit PCM mono 8 kHz file. Anything else is rejected with the
/// observed format in the error; nothing is resampled.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let conforming = spec.sample_rate == SAMPLE_RATE
        && spec.channels == 1
        && spec.bits_per_sample == 16
        && spec.sample_format == SampleFormat::Int;
    if !conforming {
        return Err(Error::WavFormat {
            path: path.to_path_buf(),
            observed: describe(&spec),
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / PCM_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    AudioClip::new(samples)
}

/// Writes 16-bit PCM; samples outside the representable range saturate.
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    if clip.sample_rate != SAMPLE_RATE {
        return Err(invalid(
            "write_wav",
            format!("sample rate must be {SAMPLE_RATE}, got {}", clip.sample_rate),
        ));
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &v in &clip.samples {
        let q = (v * PCM_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64);
        writer.write_sample(q as i16)?;
    }
    writer.finalize()?;
    Ok(())
}
