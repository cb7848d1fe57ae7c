use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::MixtureRecord;
use crate::error::{invalid, Error, Result};
use crate::metrics::pit_loss;
use crate::model::{Checkpoint, ModelConfig, NamedTensor, Separator};
use crate::numeric::{Scalar, Tape, Tensor};
use crate::sharing::ParamKey;

const MOMENT_M: &str = "adam.m:";
const MOMENT_V: &str = "adam.v:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm ceiling.
    pub clip_norm: f64,
    /// Training segment length in samples.
    pub segment_len: usize,
    pub batch_size: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub checkpoint: Option<PathBuf>,
    /// Save every this many steps (0 saves only at the end).
    pub checkpoint_every: usize,
}

impl TrainConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: 5.0,
            segment_len: crate::audio::SAMPLE_RATE as usize,
            batch_size: 4,
            max_steps: 3000,
            seed: 0,
            checkpoint: None,
            checkpoint_every: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.clip_norm) {
            return Err(invalid("train", format!("clip norm must be positive, got {}", self.clip_norm)));
        }
        if !positive(self.learning_rate) || !positive(self.epsilon) {
            return Err(invalid("train", "learning rate and epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("train", "moment decay rates must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(invalid("train", "batch size must be at least 1"));
        }
        self.model.frames(self.segment_len)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: Separator<f32>,
    /// Rows for the steps run in this call.
    pub log: Vec<LogRow>,
    /// Step the run started from (non-zero after a resume).
    pub start_step: usize,
}

/// Adaptive-moment optimizer state keyed by canonical parameter.
#[derive(Debug, Clone, Default)]
pub struct Adam {
    m: BTreeMap<ParamKey, Vec<f32>>,
    v: BTreeMap<ParamKey, Vec<f32>>,
}

impl Adam {
    fn step(&mut self, model: &mut Separator<f32>, grads: &BTreeMap<ParamKey, Vec<f32>>, scale: f32, t: usize, cfg: &TrainConfig) {
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(t as i32);
        let c2 = 1.0 - b2.powi(t as i32);
        let lr = (cfg.learning_rate * c2.sqrt() / c1) as f32;
        let (b1, b2, eps) = (b1 as f32, b2 as f32, cfg.epsilon as f32);
        for (key, tensor) in model.store_mut().iter_mut() {
            let g = &grads[key];
            let m = self.m.entry(*key).or_insert_with(|| vec![0.0; g.len()]);
            let v = self.v.entry(*key).or_insert_with(|| vec![0.0; g.len()]);
            let corr = (c2.sqrt() as f32) * eps;
            for (i, p) in tensor.data_mut().iter_mut().enumerate() {
                let gi = g[i] * scale;
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                *p -= lr * m[i] / (v[i].sqrt() + corr);
            }
        }
    }

    fn to_named(&self, model: &Separator<f32>) -> Vec<NamedTensor> {
        let mut out = Vec::new();
        for (key, tensor) in model.store().iter() {
            for (prefix, map) in [(MOMENT_M, &self.m), (MOMENT_V, &self.v)] {
                if let Some(values) = map.get(key) {
                    let t = Tensor::new(tensor.shape(), values.clone()).expect("moment matches parameter");
                    out.push(NamedTensor::from_tensor(format!("{prefix}{key}"), &t));
                }
            }
        }
        out
    }

    fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let mut adam = Adam::default();
        for t in &ck.tensors {
            let (map, rest) = if let Some(rest) = t.name.strip_prefix(MOMENT_M) {
                (&mut adam.m, rest)
            } else if let Some(rest) = t.name.strip_prefix(MOMENT_V) {
                (&mut adam.v, rest)
            } else {
                continue;
            };
            map.insert(rest.parse()?, t.to_tensor::<f32>()?.into_data());
        }
        Ok(adam)
    }
}

/// Deterministic per-step stream, so a resumed run draws the same batches.
fn step_rng(seed: u64, step: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (step as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// A random training segment: (mixture, references).
fn draw_segment(rng: &mut ChaCha8Rng, corpus: &[MixtureRecord], len: usize) -> (Vec<f32>, Vec<Vec<f32>>) {
    let record = &corpus[rng.random_range(0..corpus.len())];
    let take = len.min(record.len());
    let start = rng.random_range(0..=record.len() - take);
    let cut = |x: &[f64]| x[start..start + take].iter().map(|&v| v as f32).collect::<Vec<f32>>();
    let refs = record.sources.iter().map(|s| cut(&s.samples)).collect();
    (cut(&record.mixture.samples), refs)
}

/// Loss and per-parameter gradients of one example.
fn example_grads(
    model: &Separator<f32>,
    mixture: Vec<f32>,
    references: &[Vec<f32>],
) -> Result<(f64, BTreeMap<ParamKey, Vec<f32>>)> {
    let mut tape = Tape::new();
    let params = model.bind(&mut tape, true);
    let x = tape.constant(Tensor::from_vec(mixture));
    let out = model.record(&mut tape, &params, x)?;
    let len = tape.shape(out.sources)[1];
    let refs: Vec<Vec<f32>> = references.iter().map(|r| r[..len].to_vec()).collect();
    let (loss, _) = pit_loss(&mut tape, out.sources, &refs)?;
    let value = tape.value(loss).data()[0].as_f64();
    tape.backward(loss)?;
    let grads = params
        .iter()
        .map(|(key, var)| {
            let numel = tape.value(*var).numel();
            let g = tape.grad(*var).map(<[f32]>::to_vec).unwrap_or_else(|| vec![0.0; numel]);
            (*key, g)
        })
        .collect();
    Ok((value, grads))
}

fn save(cfg: &TrainConfig, model: &Separator<f32>, adam: &Adam, step: usize) -> Result<()> {
    if let Some(path) = &cfg.checkpoint {
        Checkpoint::from_separator(model, cfg.seed, step, adam.to_named(model)).save(path)?;
    }
    Ok(())
}

/// Trains on `corpus`. With `resume` and an existing checkpoint, parameters,
/// optimizer moments and the step counter are restored first.
pub fn train(cfg: &TrainConfig, corpus: &[MixtureRecord], resume: bool) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(invalid("train", "empty corpus"));
    }
    if let Some(r) = corpus.iter().find(|r| r.sources.len() != cfg.model.sources) {
        return Err(invalid(
            "train",
            format!("record {} has {} sources, model expects {}", r.id, r.sources.len(), cfg.model.sources),
        ));
    }
    let shortest = corpus.iter().map(MixtureRecord::len).min().unwrap_or(0);
    cfg.model.frames(shortest.min(cfg.segment_len))?;

    let (mut model, mut adam, start_step) = match (&cfg.checkpoint, resume) {
        (Some(path), true) if path.exists() => {
            let ck = Checkpoint::load(path)?;
            (ck.separator_for::<f32>(cfg.model.clone())?, Adam::from_checkpoint(&ck)?, ck.manifest.step)
        }
        _ => (Separator::<f32>::new(cfg.model.clone(), cfg.seed)?, Adam::default(), 0),
    };
    let last_checkpoint = || {
        cfg.checkpoint
            .as_ref()
            .filter(|p| p.exists())
            .map_or_else(|| "none".to_string(), |p| p.display().to_string())
    };

    let mut log = Vec::with_capacity(cfg.max_steps.saturating_sub(start_step));
    for step in start_step..cfg.max_steps {
        let mut rng = step_rng(cfg.seed, step);
        let mut total: Option<BTreeMap<ParamKey, Vec<f32>>> = None;
        let mut loss = 0.0;
        for _ in 0..cfg.batch_size {
            let (mix, refs) = draw_segment(&mut rng, corpus, cfg.segment_len);
            let (l, g) = example_grads(&model, mix, &refs)?;
            loss += l;
            match &mut total {
                None => total = Some(g),
                Some(acc) => {
                    for (key, values) in g {
                        let a = acc.get_mut(&key).expect("same parameter set");
                        a.iter_mut().zip(values).for_each(|(x, y)| *x += y);
                    }
                }
            }
        }
        let grads = total.expect("batch size is at least 1");
        let inv_batch = 1.0 / cfg.batch_size as f64;
        loss *= inv_batch;
        let norm = grads
            .values()
            .flat_map(|g| g.iter().map(|&v| (v as f64 * inv_batch).powi(2)))
            .sum::<f64>()
            .sqrt();
        if !loss.is_finite() || !norm.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                last_checkpoint: last_checkpoint(),
            });
        }
        let clip = if norm > cfg.clip_norm { cfg.clip_norm / norm } else { 1.0 };
        adam.step(&mut model, &grads, (inv_batch * clip) as f32, step + 1, cfg);
        log.push(LogRow {
            step: step + 1,
            loss,
            grad_norm: norm,
        });
        if cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 {
            save(cfg, &model, &adam, step + 1)?;
        }
    }
    save(cfg, &model, &adam, cfg.max_steps.max(start_step))?;
    Ok(TrainOutcome {
        model,
        log,
        start_step,
    })
}
