use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::wav::{mean_power, read_wav, AudioClip};
use crate::error::{invalid, Error, Result};

/// Noise that was added on top of a clean mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseInfo {
    /// The scaled noise exactly as added.
    pub clip: AudioClip,
    pub kind: NoiseKind,
    /// Requested mixture-to-noise ratio.
    pub snr_db: f64,
    /// File the noise came from, for file noise.
    pub source: Option<PathBuf>,
}

/// A mixture together with every scaled component that went into it.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureRecord {
    pub id: String,
    pub mixture: AudioClip,
    /// Scaled sources; the mixture is their sum plus any noise.
    pub sources: Vec<AudioClip>,
    /// Signal-to-interference ratio used when the sources were mixed.
    pub snr_db: f64,
    pub noise: Option<NoiseInfo>,
    /// Gain applied to all components by peak normalization (1 if none).
    pub scale: f64,
}

/// Sum of components in a fixed order. Every constructor goes through this,
/// so re-running it on a record reproduces the mixture bit for bit.
pub fn compose(sources: &[AudioClip], noise: Option<&AudioClip>) -> Vec<f64> {
    let len = sources.first().map_or(0, AudioClip::len);
    let mut mix = vec![0.0; len];
    for s in sources.iter().chain(noise) {
        for (m, v) in mix.iter_mut().zip(&s.samples) {
            *m += v;
        }
    }
    mix
}

impl MixtureRecord {
    /// `mixture - compose(components)`, which is all zeros for records built
    /// by this module.
    pub fn residual(&self) -> Vec<f64> {
        let composed = compose(&self.sources, self.noise.as_ref().map(|n| &n.clip));
        self.mixture.samples.iter().zip(composed).map(|(m, c)| m - c).collect()
    }

    pub fn len(&self) -> usize {
        self.mixture.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixture.is_empty()
    }

    /// Scales every component so the mixture peak is `peak`, then rebuilds
    /// the mixture from the scaled components.
    pub fn normalize_peak(mut self, peak: f64) -> Self {
        let current = self.mixture.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if current == 0.0 {
            return self;
        }
        let gain = peak / current;
        for s in &mut self.sources {
            s.samples.iter_mut().for_each(|v| *v *= gain);
        }
        if let Some(n) = &mut self.noise {
            n.clip.samples.iter_mut().for_each(|v| *v *= gain);
        }
        self.mixture.samples = compose(&self.sources, self.noise.as_ref().map(|n| &n.clip));
        self.scale *= gain;
        self
    }
}

/// Repeats `x` as needed and trims to `len`.
pub fn fit_length(x: &[f64], len: usize) -> Vec<f64> {
    x.iter().copied().cycle().take(len).collect()
}

/// `10 log10(P_signal / P_interference)` with mean-square powers.
pub fn measured_snr_db(signal: &[f64], interference: &[f64]) -> f64 {
    10.0 * (mean_power(signal) / mean_power(interference)).log10()
}

/// Gain that puts `interference` at `snr_db` below `signal_power`.
fn snr_gain(signal_power: f64, interference: &[f64], snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(invalid("mix_at_snr", format!("snr must be finite, got {snr_db}")));
    }
    let p = mean_power(interference);
    if p <= 0.0 {
        return Err(Error::ZeroPower("interference"));
    }
    Ok((signal_power / (p * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// Mixes two sources so that the signal-to-interference ratio is `snr_db`.
/// The interference is looped or trimmed to the signal's length.
pub fn mix_at_snr(signal: &AudioClip, interference: &AudioClip, snr_db: f64) -> Result<MixtureRecord> {
    let ps = signal.power();
    if ps <= 0.0 {
        return Err(Error::ZeroPower("signal"));
    }
    if interference.is_empty() {
        return Err(Error::ZeroPower("interference"));
    }
    let fitted = fit_length(&interference.samples, signal.len());
    let alpha = snr_gain(ps, &fitted, snr_db)?;
    let scaled = AudioClip::new(fitted.iter().map(|v| alpha * v).collect())?;
    let sources = vec![signal.clone(), scaled];
    let mixture = AudioClip::new(compose(&sources, None))?;
    Ok(MixtureRecord {
        id: String::new(),
        mixture,
        sources,
        snr_db,
        noise: None,
        scale: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Gaussian,
    /// A recording picked from a user-supplied directory.
    File,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 2] = [NoiseKind::Gaussian, NoiseKind::File];

    /// Column prefix used in the noise-robustness table.
    pub fn short_label(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gau",
            NoiseKind::File => "mus",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::File => "file",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "gau" => Ok(NoiseKind::Gaussian),
            "file" | "mus" => Ok(NoiseKind::File),
            other => Err(invalid("noise_kind", format!("unknown noise kind `{other}`"))),
        }
    }
}

/// WAV files in `dir`, sorted by path so selection is reproducible.
pub fn list_noise_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyNoiseDir(dir.to_path_buf()));
    }
    Ok(files)
}

/// Adds noise scaled against the power of the record's current mixture.
pub fn add_noise(
    record: &MixtureRecord,
    kind: NoiseKind,
    snr_db: f64,
    noise_dir: Option<&Path>,
    seed: u64,
) -> Result<MixtureRecord> {
    if record.noise.is_some() {
        return Err(invalid("add_noise", "record already carries noise"));
    }
    let pm = record.mixture.power();
    if pm <= 0.0 {
        return Err(Error::ZeroPower("mixture"));
    }
    let len = record.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (raw, source) = match kind {
        NoiseKind::Gaussian => ((0..len).map(|_| rng.sample(StandardNormal)).collect::<Vec<f64>>(), None),
        NoiseKind::File => {
            let dir = noise_dir.ok_or_else(|| invalid("add_noise", "file noise needs a noise directory"))?;
            let files = list_noise_files(dir)?;
            let pick = files[rng.random_range(0..files.len())].clone();
            let clip = read_wav(&pick)?;
            if clip.is_empty() {
                return Err(Error::ZeroPower("noise file"));
            }
            (fit_length(&clip.samples, len), Some(pick))
        }
    };
    let gain = snr_gain(pm, &raw, snr_db)?;
    let noise = AudioClip::new(raw.iter().map(|v| gain * v).collect())?;
    let mixture = AudioClip::new(compose(&record.sources, Some(&noise)))?;
    Ok(MixtureRecord {
        id: record.id.clone(),
        mixture,
        sources: record.sources.clone(),
        snr_db: record.snr_db,
        noise: Some(NoiseInfo {
            clip: noise,
            kind,
            snr_db,
            source,
        }),
        scale: record.scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(v: Vec<f64>) -> AudioClip {
        AudioClip::new(v).unwrap()
    }

    #[test]
    fn zero_db_equalizes_power() {
        let s = clip((0..400).map(|i| (i as f64 * 0.1).sin()).collect());
        let n = clip((0..400).map(|i| ((i * 7 % 13) as f64) - 6.0).collect());
        let rec = mix_at_snr(&s, &n, 0.0).unwrap();
        let (ps, pn) = (rec.sources[0].power(), rec.sources[1].power());
        assert!(((ps - pn) / ps).abs() < 1e-9);
        assert!(rec.residual().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn zero_power_rejected() {
        let s = clip(vec![0.0; 10]);
        let n = clip(vec![1.0; 10]);
        assert!(matches!(mix_at_snr(&s, &n, 0.0), Err(Error::ZeroPower("signal"))));
        assert!(matches!(mix_at_snr(&n, &s, 0.0), Err(Error::ZeroPower("interference"))));
    }

    #[test]
    fn normalization_keeps_exactness_and_ratio() {
        let s = clip((0..300).map(|i| 3.0 * (i as f64 * 0.05).sin()).collect());
        let n = clip((0..300).map(|i| (i as f64 * 0.9).cos()).collect());
        let rec = mix_at_snr(&s, &n, 2.0).unwrap().normalize_peak(0.9);
        let peak = rec.mixture.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.9).abs() < 1e-12);
        assert!(rec.residual().iter().all(|&r| r == 0.0));
        let snr = measured_snr_db(&rec.sources[0].samples, &rec.sources[1].samples);
        assert!((snr - 2.0).abs() < 1e-9);
    }

    #[test]
    fn file_noise_needs_directory() {
        let s = clip(vec![0.5, -0.5, 0.25]);
        let rec = mix_at_snr(&s, &s, 0.0).unwrap();
        assert!(add_noise(&rec, NoiseKind::File, 0.0, None, 1).is_err());
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(
            add_noise(&rec, NoiseKind::File, 0.0, Some(empty.path()), 1),
            Err(Error::EmptyNoiseDir(_))
        ));
    }
}
