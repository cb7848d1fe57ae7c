//! Training, evaluation, the sharing ablation and robustness protocols.

pub mod commands;
pub mod eval;
pub mod protocols;
pub mod train;

pub use eval::{evaluate_corpus, evaluate_record, evaluate_signal, separate_signal, CorpusScore};
pub use protocols::{
    ablate, noise_test, shift_test, write_shift_csv, AblationReport, ExperimentRow, Family, NoiseTable, ShiftRow,
    NOISE_SNRS_DB, SHIFTS,
};
pub use train::{train, Adam, LogRow, TrainConfig, TrainOutcome};
