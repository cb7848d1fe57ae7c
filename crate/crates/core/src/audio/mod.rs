//! WAV I/O, SNR-controlled mixing, noise injection and a synthetic corpus.

pub mod corpus;
pub mod mixing;
pub mod wav;

pub use corpus::{
    generate_synthetic_corpus, load_corpus, read_manifest, resolve_manifest, synthetic_record, write_corpus,
    ManifestEntry, MANIFEST_NAME,
};
pub use mixing::{add_noise, compose, fit_length, measured_snr_db, mix_at_snr, MixtureRecord, NoiseInfo, NoiseKind};
pub use wav::{mean_power, read_wav, write_wav, AudioClip, SAMPLE_RATE};
