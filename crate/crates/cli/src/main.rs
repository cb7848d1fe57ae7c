use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mitas::experiment::commands::{
    cmd_ablate, cmd_eval, cmd_gen_corpus, cmd_noise_test, cmd_separate, cmd_shift_test, cmd_train, CHECKPOINT_NAME,
};
use mitas::experiment::{TrainConfig, NOISE_SNRS_DB, SHIFTS};
use mitas::model::ModelConfig;
use mitas::sharing::{audit, audit_against, ParamReport, SharingConfig};
use mitas::{Error, Result};

#[derive(Parser)]
#[command(name = "mitas", version, about = "Time-domain separation with shared TCN blocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// tasnet_base, convtasnet_base, simplified1, simplified2 or tiny.
    #[arg(long, default_value = "tiny")]
    preset: String,
    /// Two letters from n/s/d/a: separable component, then pointwise.
    #[arg(long, default_value = "nn")]
    scheme: String,
}

impl ModelArgs {
    fn config(&self) -> Result<ModelConfig> {
        let sharing: SharingConfig = self.scheme.parse()?;
        Ok(ModelConfig::from_preset_name(&self.preset)?.with_sharing(sharing))
    }
}

#[derive(Args, Clone)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 5.0)]
    clip_norm: f64,
    /// Segment length in samples.
    #[arg(long, default_value_t = 8000)]
    segment: usize,
    #[arg(long, default_value_t = 4)]
    batch: usize,
}

impl TrainArgs {
    fn config(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::new(self.model.config()?);
        cfg.seed = self.seed;
        cfg.max_steps = self.steps;
        cfg.learning_rate = self.lr;
        cfg.clip_norm = self.clip_norm;
        cfg.segment_len = self.segment;
        cfg.batch_size = self.batch;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one model on a corpus.
    Train {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Checkpoint path (default: <out-dir>/model.ckpt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Continue from the checkpoint if it exists.
        #[arg(long)]
        resume: bool,
        #[arg(long, default_value_t = 500)]
        checkpoint_every: usize,
    },
    /// Train and score all sixteen sharing schemes plus the simplified controls.
    Ablate {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print the parameter breakdown of a configuration.
    Audit {
        #[command(flatten)]
        model: ModelArgs,
        /// Also write audit.csv here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Separate one WAV file into per-source WAV files.
    Separate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score a checkpoint on a corpus.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Change in SI-SNRi when the input start is shifted.
    ShiftTest {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Restrict to one record id.
        #[arg(long)]
        record: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// SI-SNRi under Gaussian and file noise at several SNRs.
    NoiseTest {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Directory of 8 kHz mono 16-bit WAV noise files.
        #[arg(long)]
        noise_dir: Option<PathBuf>,
        /// Comma-separated SNR levels in dB.
        #[arg(long, value_delimiter = ',', default_values_t = NOISE_SNRS_DB.to_vec())]
        snr: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write a synthetic two-source corpus.
    GenCorpus {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Record length in seconds.
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run_audit(model: &ModelArgs, out_dir: Option<&Path>) -> Result<()> {
    let config = model.config()?;
    let family_base = ModelConfig::from_preset_name(match config.family {
        mitas::model::ModelFamily::TasNet => "tasnet_base",
        mitas::model::ModelFamily::ConvTasNet => "convtasnet_base",
    })?;
    // Simplified presets are reported against the full base they shrink.
    let report = if model.preset.starts_with("simplified") {
        audit_against(&config, &family_base).with_label(model.preset.clone())
    } else {
        audit(&config)
    };
    print!("{}", report.to_text());
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        ParamReport::write_csv(&[report], std::fs::File::create(dir.join("audit.csv"))?)?;
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train {
            train,
            corpus,
            out_dir,
            checkpoint,
            resume,
            checkpoint_every,
        } => {
            let mut cfg = train.config()?;
            cfg.checkpoint = Some(checkpoint.unwrap_or_else(|| out_dir.join(CHECKPOINT_NAME)));
            cfg.checkpoint_every = checkpoint_every;
            let outcome = cmd_train(&cfg, &corpus, &out_dir, resume)?;
            if let Some(last) = outcome.log.last() {
                println!("step {} loss {:.4} grad_norm {:.4}", last.step, last.loss, last.grad_norm);
            }
        }
        Command::Ablate { train, corpus, out_dir } => {
            let report = cmd_ablate(&train.config()?, &corpus, &out_dir)?;
            for r in &report.rows {
                println!(
                    "{:<26} {:>2} {:>9} {:>7.2}% {:>8.3} dB",
                    r.model_label, r.scheme, r.size_params, r.compression_pct, r.si_snri_db
                );
            }
        }
        Command::Audit { model, out_dir } => run_audit(&model, out_dir.as_deref())?,
        Command::Separate {
            checkpoint,
            input,
            out_dir,
        } => {
            for path in cmd_separate(&checkpoint, &input, &out_dir)? {
                println!("{}", path.display());
            }
        }
        Command::Eval {
            checkpoint,
            corpus,
            out_dir,
        } => {
            let score = cmd_eval(&checkpoint, &corpus, &out_dir)?;
            println!("si_snri {:.4} dB  sdri {:.4} dB", score.mean_si_snri, score.mean_sdri);
        }
        Command::ShiftTest {
            checkpoint,
            corpus,
            record,
            out_dir,
        } => {
            for row in cmd_shift_test(&checkpoint, &corpus, record.as_deref(), &SHIFTS, &out_dir)? {
                println!("{:>4} {:+.4} dB", row.shift, row.delta_si_snri_db);
            }
        }
        Command::NoiseTest {
            checkpoint,
            corpus,
            noise_dir,
            snr,
            seed,
            out_dir,
        } => {
            let table = cmd_noise_test(&checkpoint, &corpus, noise_dir.as_deref(), &snr, seed, &out_dir)?;
            println!("{}", table.header().join(","));
            let cells: Vec<String> = table.cells.iter().flatten().map(|v| format!("{v:.4}")).collect();
            println!("{},{:.4},{}", table.model_label, table.clean, cells.join(","));
        }
        Command::GenCorpus {
            out_dir,
            count,
            duration,
            seed,
        } => {
            println!("{}", cmd_gen_corpus(&out_dir, count, duration, seed)?.display());
        }
    }
    Ok(())
}

/// One line, `error kind=<kind>: <message>`, for scripts to match on.
fn report(err: &Error) {
    eprintln!("error kind={}: {}", err.kind(), err);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::FAILURE
        }
    }
}
