mod common;

use mitas::audio::{generate_synthetic_corpus, AudioClip, MixtureRecord};
use mitas::experiment::{
    evaluate_corpus, noise_test, shift_test, train, AblationReport, ExperimentRow, Family, TrainConfig,
};
use mitas::model::{Checkpoint, ModelConfig, Preset, Separator};
use mitas::sharing::{enumerate_ablation_grid, ParameterStore};
use mitas::Error;

fn corpus() -> Vec<MixtureRecord> {
    generate_synthetic_corpus(4, 0.25, 3).unwrap()
}

fn quick(scheme: &str, steps: usize) -> TrainConfig {
    let mut cfg = TrainConfig::new(ModelConfig::preset(Preset::Tiny).with_sharing(scheme.parse().unwrap()));
    cfg.segment_len = 400;
    cfg.batch_size = 2;
    cfg.max_steps = steps;
    cfg.seed = 5;
    cfg
}

#[test]
fn same_seed_reproduces_the_loss_curve() {
    let data = corpus();
    let a = train(&quick("ss", 5), &data, false).unwrap();
    let b = train(&quick("ss", 5), &data, false).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.model.store().tensors(), b.model.store().tensors());
    let mut other = quick("ss", 5);
    other.seed = 6;
    assert_ne!(train(&other, &data, false).unwrap().log, a.log);
}

#[test]
fn log_rows_count_steps_from_one() {
    let out = train(&quick("nn", 3), &corpus(), false).unwrap();
    let steps: Vec<usize> = out.log.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![1, 2, 3]);
    assert!(out.log.iter().all(|r| r.loss.is_finite() && r.grad_norm > 0.0));
}

fn max_change(a: &Separator<f32>, b: &Separator<f32>) -> f32 {
    a.store()
        .iter()
        .flat_map(|(k, t)| t.data().iter().zip(b.store().get(k).unwrap().data()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f32::max)
}

#[test]
fn tiny_clip_norm_nearly_freezes_training() {
    let data = corpus();
    let initial = Separator::<f32>::new(quick("ss", 0).model, 5).unwrap();
    let mut frozen_cfg = quick("ss", 10);
    frozen_cfg.clip_norm = 1e-9;
    let frozen = train(&frozen_cfg, &data, false).unwrap();
    let normal = train(&quick("ss", 10), &data, false).unwrap();
    let (moved_frozen, moved_normal) = (max_change(&initial, &frozen.model), max_change(&initial, &normal.model));
    assert!(moved_frozen < 1e-3, "{moved_frozen}");
    assert!(moved_normal > 20.0 * moved_frozen, "{moved_normal} vs {moved_frozen}");
    let before = evaluate_corpus(&initial, &data).unwrap().mean_si_snri;
    let after = evaluate_corpus(&frozen.model, &data).unwrap().mean_si_snri;
    assert!((before - after).abs() < 0.05, "{before} -> {after}");
}

#[test]
fn invalid_recipes_are_rejected() {
    let data = corpus();
    let mut cfg = quick("nn", 1);
    cfg.clip_norm = 0.0;
    assert!(train(&cfg, &data, false).is_err());
    let mut cfg = quick("nn", 1);
    cfg.segment_len = 2;
    assert!(matches!(train(&cfg, &data, false), Err(Error::TooShort { .. })));
    let mut cfg = quick("nn", 1);
    cfg.batch_size = 0;
    assert!(train(&cfg, &data, false).is_err());
    assert!(train(&quick("nn", 1), &[], false).is_err());
}

#[test]
fn resumed_run_matches_an_uninterrupted_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus();
    let straight = train(&quick("sd", 6), &data, false).unwrap();

    let mut first = quick("sd", 3);
    first.checkpoint = Some(dir.path().join("m.ckpt"));
    train(&first, &data, false).unwrap();
    assert_eq!(Checkpoint::load(&dir.path().join("m.ckpt")).unwrap().manifest.step, 3);
    let mut second = quick("sd", 6);
    second.checkpoint = first.checkpoint.clone();
    let resumed = train(&second, &data, true).unwrap();

    assert_eq!(resumed.start_step, 3);
    assert_eq!(resumed.log[..], straight.log[3..]);
    assert_eq!(resumed.model.store().tensors(), straight.model.store().tensors());
}

/// Sources near the f32 ceiling overflow the forward pass.
fn poisoned(data: &[MixtureRecord]) -> Vec<MixtureRecord> {
    data.iter()
        .map(|r| {
            let loud = |c: &AudioClip| AudioClip::new(c.samples.iter().map(|v| v * 3e38).collect()).unwrap();
            MixtureRecord {
                mixture: loud(&r.mixture),
                sources: r.sources.iter().map(loud).collect(),
                ..r.clone()
            }
        })
        .collect()
}

#[test]
fn non_finite_loss_aborts_and_keeps_the_last_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let data = corpus();
    let mut cfg = quick("ss", 2);
    cfg.checkpoint = Some(path.clone());
    train(&cfg, &data, false).unwrap();
    let saved = std::fs::read(&path).unwrap();

    let mut more = cfg.clone();
    more.max_steps = 5;
    match train(&more, &poisoned(&data), true) {
        Err(Error::NonFiniteLoss { step, last_checkpoint }) => {
            assert_eq!(step, 2);
            assert_eq!(last_checkpoint, path.display().to_string());
        }
        other => panic!("expected a non-finite abort, got {other:?}"),
    }
    assert_eq!(std::fs::read(&path).unwrap(), saved);
}

#[test]
fn shared_tensors_start_from_the_unshared_first_site() {
    let base = ModelConfig::preset(Preset::Tiny);
    let reference = ParameterStore::<f32>::initialize(&base, 5);
    for sharing in enumerate_ablation_grid() {
        let store = ParameterStore::<f32>::initialize(&base.clone().with_sharing(sharing), 5);
        for (key, tensor) in store.iter() {
            assert_eq!(tensor.data(), reference.get(&key.representative()).unwrap().data(), "{sharing} {key}");
        }
    }
}

#[test]
fn zero_shift_is_exactly_zero_and_short_inputs_fail() {
    let data = corpus();
    let model = Separator::<f64>::new(ModelConfig::preset(Preset::Tiny), 1).unwrap();
    let rows = shift_test(&model, &data, &[0, 25, 50]).unwrap();
    assert_eq!(rows[0].delta_si_snri_db, 0.0);
    assert_eq!(rows.iter().map(|r| r.shift).collect::<Vec<_>>(), vec![0, 25, 50]);
    match shift_test(&model, &data, &[1998]) {
        Err(Error::TooShort { required, actual, .. }) => assert_eq!((required, actual), (2002, 2000)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn untrained_model_shows_no_improvement_under_noise() {
    let dir = tempfile::tempdir().unwrap();
    common::write_noise_dir(dir.path());
    let data = corpus();
    let model = Separator::<f64>::new(ModelConfig::preset(Preset::Tiny), 2).unwrap();
    let table = noise_test(&model, &data, &[0.0, 3.0, 5.0], Some(dir.path()), 1).unwrap();
    assert_eq!(table.cells.len(), 2);
    assert!(table.cells.iter().all(|row| row.len() == 3));
    assert_eq!(
        table.header(),
        ["model", "clean", "gau_0db", "gau_3db", "gau_5db", "mus_0db", "mus_3db", "mus_5db"]
    );
    assert_eq!(table.model_label, "Conv-TasNet (Base-Model)");
    // Random weights carry no separation. The random decoder also fails to
    // invert the encoder, so scores sit well below zero rather than at it.
    for v in table.cells.iter().flatten().chain([&table.clean]) {
        assert!(v.is_finite() && *v <= 0.5, "{v}");
    }
}

#[test]
fn ablation_csvs_have_the_expected_shape() {
    let row = |label: &str, scheme: &str, family| ExperimentRow {
        model_label: label.into(),
        scheme: scheme.into(),
        size_params: 10,
        compression_pct: 50.0,
        si_snri_db: 1.23456,
        sdri_db: 2.0,
        family,
    };
    let report = AblationReport {
        rows: vec![row("Conv-TasNet (Base-Model)", "nn", Family::Base), row("simplified1", "nn", Family::Simplified)],
    };
    let mut table = Vec::new();
    report.write_table(&mut table).unwrap();
    let table = String::from_utf8(table).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "model_label,scheme,size_params,compression_pct,si_snri_db,sdri_db");
    assert_eq!(lines.next().unwrap(), "Conv-TasNet (Base-Model),nn,10,50.00,1.2346,2.0000");
    let mut fig = Vec::new();
    report.write_figure(&mut fig).unwrap();
    let fig = String::from_utf8(fig).unwrap();
    assert_eq!(fig.lines().next().unwrap(), "model_label,params,si_snri_db,family");
    assert!(fig.ends_with("simplified1,10,1.2346,simplified\n"));
}
