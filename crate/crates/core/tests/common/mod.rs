//! Oracles shared by several integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use mitas::metrics::pit_loss;
use mitas::model::{parameter_sites, ModelConfig, Separator};
use mitas::numeric::{Tape, Tensor};
use mitas::sharing::{ParamKey, ParameterStore, SharingConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_signal(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// SI-SNR written out from its definition, independent of the library.
pub fn oracle_si_snr(estimate: &[f64], reference: &[f64]) -> f64 {
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let (me, mr) = (mean(estimate), mean(reference));
    let e: Vec<f64> = estimate.iter().map(|v| v - me).collect();
    let r: Vec<f64> = reference.iter().map(|v| v - mr).collect();
    let dot: f64 = e.iter().zip(&r).map(|(a, b)| a * b).sum();
    let rr: f64 = r.iter().map(|v| v * v).sum();
    let target: Vec<f64> = r.iter().map(|v| v * dot / rr).collect();
    let t2: f64 = target.iter().map(|v| v * v).sum();
    let n2: f64 = e.iter().zip(&target).map(|(a, t)| (a - t) * (a - t)).sum();
    (10.0 * (t2 / n2).log10()).clamp(-100.0, 100.0)
}

/// All permutations of `0..c` for `c <= 3`, spelled out.
pub fn permutations(c: usize) -> Vec<Vec<usize>> {
    match c {
        1 => vec![vec![0]],
        2 => vec![vec![0, 1], vec![1, 0]],
        3 => vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ],
        _ => panic!("oracle covers up to three sources"),
    }
}

/// Minimum over assignments of the negative mean SI-SNR.
pub fn brute_force_pit(estimates: &[Vec<f64>], references: &[Vec<f64>]) -> f64 {
    let c = references.len();
    permutations(c)
        .iter()
        .map(|p| -(0..c).map(|r| oracle_si_snr(&estimates[p[r]], &references[r])).sum::<f64>() / c as f64)
        .fold(f64::INFINITY, f64::min)
}

/// Unshared model whose every site holds a private copy of the tensor the
/// shared model reads there.
pub fn copied_unshared(shared: &Separator<f64>) -> Separator<f64> {
    let config = shared.config().clone().with_sharing(SharingConfig::UNSHARED);
    let mut store = ParameterStore::empty(SharingConfig::UNSHARED);
    for spec in parameter_sites(&config) {
        let tensor = shared.store().get(&spec.key).expect("site resolves");
        store.insert(spec.key, Tensor::new(tensor.shape(), tensor.data().to_vec()).unwrap());
    }
    Separator::from_store(config, store).expect("complete copy")
}

/// Output waveforms and per-canonical-key gradients of the PIT loss.
pub fn forward_and_grads(
    model: &Separator<f64>,
    mixture: &[f64],
    references: &[Vec<f64>],
) -> (Vec<f64>, BTreeMap<ParamKey, Vec<f64>>) {
    let mut tape = Tape::new();
    let params = model.bind(&mut tape, true);
    let x = tape.constant(Tensor::from_vec(mixture.to_vec()));
    let out = model.record(&mut tape, &params, x).unwrap();
    let len = tape.shape(out.sources)[1];
    let refs: Vec<Vec<f64>> = references.iter().map(|r| r[..len].to_vec()).collect();
    let (loss, _) = pit_loss(&mut tape, out.sources, &refs).unwrap();
    tape.backward(loss).unwrap();
    let grads = params
        .iter()
        .map(|(k, v)| {
            let n = tape.value(*v).numel();
            (*k, tape.grad(*v).map(<[f64]>::to_vec).unwrap_or(vec![0.0; n]))
        })
        .collect();
    (tape.value(out.sources).data().to_vec(), grads)
}

/// Largest forward difference and largest per-tensor relative gradient
/// error between a shared model and its weight-copied unshared twin.
pub fn equivalence_gap(config: &ModelConfig, seed: u64) -> (f64, f64) {
    let shared = Separator::<f64>::new(config.clone(), seed).unwrap();
    let copied = copied_unshared(&shared);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mixture = random_signal(&mut rng, 96);
    let refs: Vec<Vec<f64>> = (0..config.sources).map(|_| random_signal(&mut rng, 96)).collect();

    let (y_shared, g_shared) = forward_and_grads(&shared, &mixture, &refs);
    let (y_copied, g_copied) = forward_and_grads(&copied, &mixture, &refs);
    let fwd = y_shared
        .iter()
        .zip(&y_copied)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut summed: BTreeMap<ParamKey, Vec<f64>> = BTreeMap::new();
    for (site, grad) in &g_copied {
        let key = site.canonicalize(&config.sharing);
        let acc = summed.entry(key).or_insert_with(|| vec![0.0; grad.len()]);
        acc.iter_mut().zip(grad).for_each(|(a, g)| *a += g);
    }
    assert_eq!(summed.len(), g_shared.len(), "tensor sets differ");
    let mut worst = 0.0f64;
    for (key, g) in &g_shared {
        let reference = &summed[key];
        let diff: f64 = g.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(if norm > 0.0 { diff / norm } else { diff });
    }
    (fwd, worst)
}

pub struct GradCheck {
    pub checked: usize,
    pub failures: usize,
    /// Largest relative error among entries above the absolute floor.
    pub worst_rel: f64,
}

/// Central finite differences on every scalar parameter of `model` under the
/// PIT loss. An entry passes when the absolute error is below `abs_floor`
/// or the relative error is below `rel_tol`.
pub fn finite_difference_check(
    model: &Separator<f64>,
    mixture: &[f64],
    references: &[Vec<f64>],
    rel_tol: f64,
    abs_floor: f64,
) -> GradCheck {
    let (_, analytic) = forward_and_grads(model, mixture, references);
    let loss_of = |m: &Separator<f64>| -> f64 {
        let mut tape = Tape::new();
        let params = m.bind(&mut tape, false);
        let x = tape.constant(Tensor::from_vec(mixture.to_vec()));
        let out = m.record(&mut tape, &params, x).unwrap();
        let len = tape.shape(out.sources)[1];
        let refs: Vec<Vec<f64>> = references.iter().map(|r| r[..len].to_vec()).collect();
        let (loss, _) = pit_loss(&mut tape, out.sources, &refs).unwrap();
        tape.value(loss).data()[0]
    };
    let h = 1e-6;
    let mut probe = Separator::from_store(model.config().clone(), model.store().clone()).unwrap();
    let keys: Vec<ParamKey> = model.store().iter().map(|(k, _)| *k).collect();
    let mut result = GradCheck {
        checked: 0,
        failures: 0,
        worst_rel: 0.0,
    };
    for key in keys {
        for (j, &a) in analytic[&key].iter().enumerate() {
            let original = probe.store().get(&key).unwrap().data()[j];
            probe.store_mut().get_mut(&key).unwrap().data_mut()[j] = original + h;
            let plus = loss_of(&probe);
            probe.store_mut().get_mut(&key).unwrap().data_mut()[j] = original - h;
            let minus = loss_of(&probe);
            probe.store_mut().get_mut(&key).unwrap().data_mut()[j] = original;
            let numeric = (plus - minus) / (2.0 * h);
            let err = (numeric - a).abs();
            result.checked += 1;
            if err >= abs_floor {
                let rel = err / numeric.abs().max(a.abs());
                result.worst_rel = result.worst_rel.max(rel);
                if rel >= rel_tol {
                    result.failures += 1;
                }
            }
        }
    }
    result
}

/// Writes two short 8 kHz noise recordings into `dir`: a detuned chord and
/// a random-walk rumble. Shorter than a record, so mixing has to loop them.
pub fn write_noise_dir(dir: &std::path::Path) {
    use mitas::audio::{write_wav, AudioClip};
    std::fs::create_dir_all(dir).unwrap();
    let chord: Vec<f64> = (0..3000)
        .map(|i| {
            let t = i as f64 / 8000.0;
            [261.6, 329.6, 392.0, 523.3]
                .iter()
                .map(|f| 0.15 * (2.0 * std::f64::consts::PI * f * t).sin())
                .sum()
        })
        .collect();
    write_wav(&dir.join("chord.wav"), &AudioClip::new(chord).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut level = 0.0;
    let rumble: Vec<f64> = (0..5000)
        .map(|_| {
            level = 0.98 * level + 0.05 * rng.random_range(-1.0..1.0);
            level
        })
        .collect();
    write_wav(&dir.join("rumble.wav"), &AudioClip::new(rumble).unwrap()).unwrap();
}
