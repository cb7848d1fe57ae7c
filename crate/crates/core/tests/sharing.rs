mod common;

use std::collections::BTreeSet;

use mitas::model::{parameter_sites, ModelConfig, ModelFamily, Preset, Separator};
use mitas::sharing::{
    audit, audit_against, enumerate_ablation_grid, unique_site_count, Component, ParamKey, ParameterStore,
    SharingConfig, SharingScheme, TensorRole,
};
use mitas::Error;
use proptest::prelude::*;

fn scheme(s: &str) -> SharingConfig {
    s.parse().unwrap()
}

fn tiny() -> ModelConfig {
    ModelConfig::preset(Preset::Tiny)
}

#[test]
fn canonical_keys_render_erased_axes_as_stars() {
    let key = ParamKey::block(Component::Separable, 2, 5, TensorRole::DepthwiseWeight);
    let stack_shared = SharingConfig::new(SharingScheme::Stack, SharingScheme::NoShare);
    assert_eq!(key.canonicalize(&stack_shared).to_string(), "block.r*.x5.separable.depthwise_weight");
    let dil_shared = SharingConfig::new(SharingScheme::Dilation, SharingScheme::NoShare);
    assert_eq!(key.canonicalize(&dil_shared).to_string(), "block.r2.x*.separable.depthwise_weight");
    let all = SharingConfig::new(SharingScheme::All, SharingScheme::NoShare);
    assert_eq!(key.canonicalize(&all).to_string(), "block.r*.x*.separable.depthwise_weight");
    // The pointwise component is untouched by separable sharing.
    let pw = ParamKey::block(Component::Pointwise, 2, 5, TensorRole::InputWeight);
    assert_eq!(pw.canonicalize(&all), pw);
}

#[test]
fn unique_counts_match_enumerated_keys() {
    let expected = [(SharingScheme::NoShare, 24), (SharingScheme::Stack, 8), (SharingScheme::Dilation, 3), (SharingScheme::All, 1)];
    for (s, count) in expected {
        let cfg = SharingConfig::new(s, s);
        let keys: BTreeSet<ParamKey> = (0..3)
            .flat_map(|r| (0..8).map(move |x| ParamKey::block(Component::Separable, r, x, TensorRole::DepthwiseWeight)))
            .map(|k| k.canonicalize(&cfg))
            .collect();
        assert_eq!(keys.len(), count, "{s:?}");
        assert_eq!(unique_site_count(8, 3, s), count);
    }
}

#[test]
fn grid_has_sixteen_distinct_schemes_starting_unshared() {
    let grid = enumerate_ablation_grid();
    assert_eq!(grid.len(), 16);
    assert!(grid[0].is_unshared());
    assert_eq!(grid.iter().map(ToString::to_string).collect::<BTreeSet<_>>().len(), 16);
    assert!(grid.contains(&scheme("ss")));
}

#[test]
fn unknown_scheme_letter_is_rejected() {
    assert!(matches!("sx".parse::<SharingConfig>(), Err(Error::UnknownScheme(_))));
    assert!(matches!("s".parse::<SharingConfig>(), Err(Error::UnknownScheme(_))));
}

/// Hand count of the tiny preset: 64 encoder, 32 + 136 bottleneck, 289 mask
/// head, 64 decoder; each pointwise site 313 and each separable site 233.
#[test]
fn tiny_audit_matches_hand_count_for_every_scheme() {
    let config = tiny();
    let fixed = 64 + 32 + 136 + 289 + 64;
    assert_eq!(audit(&config).total, 3861);
    for sharing in enumerate_ablation_grid() {
        let c = config.clone().with_sharing(sharing);
        let sep = unique_site_count(3, 2, sharing.separable);
        let pw = unique_site_count(3, 2, sharing.pointwise);
        assert_eq!(audit(&c).total, fixed + 233 * sep + 313 * pw, "{sharing}");
    }
}

/// Brute force: count scalars of the distinct canonical keys of all sites.
#[test]
fn audit_equals_brute_force_enumeration() {
    for preset in [Preset::Tiny, Preset::ConvtasnetBase, Preset::TasnetBase] {
        for sharing in enumerate_ablation_grid() {
            let config = ModelConfig::preset(preset).with_sharing(sharing);
            let mut seen = BTreeSet::new();
            let mut total = 0;
            for spec in parameter_sites(&config) {
                if seen.insert(spec.key.canonicalize(&sharing)) {
                    total += spec.numel();
                }
            }
            assert_eq!(audit(&config).total, total, "{preset:?} {sharing}");
        }
    }
}

#[test]
fn initialized_store_size_equals_audit() {
    for sharing in enumerate_ablation_grid() {
        let config = tiny().with_sharing(sharing);
        let store = ParameterStore::<f64>::initialize(&config, 3);
        assert_eq!(store.num_scalars(), audit(&config).total);
    }
}

#[test]
fn base_reference_values() {
    let base = audit(&ModelConfig::preset(Preset::ConvtasnetBase));
    assert_eq!(base.total, 5_050_545);
    assert_eq!(base.compression_pct, 100.0);
    let ss = audit(&ModelConfig::preset(Preset::ConvtasnetBase).with_sharing(scheme("ss")));
    assert_eq!(ss.total, 1_826_961);
    assert!((ss.compression_pct - 36.17).abs() < 0.01);
}

#[test]
fn unshared_ratio_is_exactly_one_hundred() {
    for preset in [Preset::Tiny, Preset::ConvtasnetBase, Preset::TasnetBase] {
        assert_eq!(audit(&ModelConfig::preset(preset)).compression_pct, 100.0);
    }
}

#[test]
fn more_sharing_never_grows_the_model() {
    let orders = [
        [SharingScheme::NoShare, SharingScheme::Stack, SharingScheme::All],
        [SharingScheme::NoShare, SharingScheme::Dilation, SharingScheme::All],
    ];
    for preset in [Preset::Tiny, Preset::ConvtasnetBase, Preset::TasnetBase] {
        for order in orders {
            for other in SharingScheme::ALL {
                let sizes: Vec<usize> = order
                    .iter()
                    .map(|&s| audit(&ModelConfig::preset(preset).with_sharing(SharingConfig::new(s, other))).total)
                    .collect();
                assert!(sizes.windows(2).all(|w| w[0] >= w[1]), "{preset:?} {sizes:?}");
                let sizes: Vec<usize> = order
                    .iter()
                    .map(|&s| audit(&ModelConfig::preset(preset).with_sharing(SharingConfig::new(other, s))).total)
                    .collect();
                assert!(sizes.windows(2).all(|w| w[0] >= w[1]), "{preset:?} {sizes:?}");
            }
        }
    }
}

#[test]
fn stack_sharing_size_is_independent_of_stack_count() {
    for family in [Preset::ConvtasnetBase, Preset::TasnetBase, Preset::Tiny] {
        let sizes: BTreeSet<usize> = (1..=6)
            .map(|r| audit(&ModelConfig::preset(family).with_stacks(r).with_sharing(scheme("ss"))).total)
            .collect();
        assert_eq!(sizes.len(), 1, "{family:?}");
    }
}

#[test]
fn single_stack_control_matches_stack_shared_size() {
    let base = ModelConfig::preset(Preset::ConvtasnetBase);
    let s1 = audit_against(&ModelConfig::preset(Preset::Simplified1), &base);
    let ss = audit(&base.clone().with_sharing(scheme("ss")));
    assert_eq!(s1.total, ss.total);
    assert!((s1.compression_pct - ss.compression_pct).abs() < 1e-12);
}

#[test]
fn tasnet_ratio_is_unchanged_by_stack_count() {
    let ratio = |r| {
        let base = ModelConfig::preset(Preset::TasnetBase).with_stacks(r);
        audit(&base.with_sharing(scheme("ss"))).compression_pct
    };
    assert_eq!(ModelConfig::preset(Preset::TasnetBase).family, ModelFamily::TasNet);
    assert!((ratio(4) - 28.6).abs() < 0.1);
    // Compared against the same four-stack base, six shared stacks cost nothing extra.
    let base4 = ModelConfig::preset(Preset::TasnetBase);
    let six = audit_against(&base4.clone().with_stacks(6).with_sharing(scheme("ss")), &base4);
    assert_eq!(six.compression_pct, ratio(4));
}

#[test]
fn store_missing_a_tensor_fails_at_construction() {
    let config = tiny();
    let mut full = ParameterStore::<f64>::initialize(&config, 0);
    let victim = *full.iter().next().unwrap().0;
    let mut partial = ParameterStore::empty(SharingConfig::UNSHARED);
    for (k, t) in full.iter_mut() {
        if *k != victim {
            partial.insert(*k, t.clone());
        }
    }
    let err = Separator::from_store(config, partial).unwrap_err();
    assert!(matches!(err, Error::MissingParameter(ref name) if *name == victim.to_string()), "{err}");
}

/// Every tied site reads the single tensor at its canonical key.
#[test]
fn tied_sites_read_the_same_tensor() {
    let config = tiny().with_sharing(scheme("aa"));
    let store = ParameterStore::<f64>::initialize(&config, 4);
    let first = ParamKey::block(Component::Separable, 0, 0, TensorRole::DepthwiseWeight);
    let last = ParamKey::block(Component::Separable, 1, 2, TensorRole::DepthwiseWeight);
    assert!(std::ptr::eq(store.get(&first).unwrap(), store.get(&last).unwrap()));
    assert_eq!(store.site_refs(&first.canonicalize(&config.sharing)), 6);
}

#[test]
fn shared_and_copied_models_agree_for_all_schemes() {
    for sharing in enumerate_ablation_grid() {
        let (fwd, grad) = common::equivalence_gap(&tiny().with_sharing(sharing), 17);
        assert!(fwd <= 1e-12, "{sharing}: forward gap {fwd}");
        assert!(grad <= 1e-10, "{sharing}: gradient gap {grad}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonicalization_is_idempotent(sep in 0usize..4, pw in 0usize..4, r in 0usize..6, x in 0usize..10, c in 0usize..2) {
        let cfg = SharingConfig::new(SharingScheme::ALL[sep], SharingScheme::ALL[pw]);
        let component = [Component::Separable, Component::Pointwise][c];
        let key = ParamKey::block(component, r, x, TensorRole::ResidualBias);
        let once = key.canonicalize(&cfg);
        prop_assert_eq!(once.canonicalize(&cfg), once);
        let parsed: ParamKey = once.to_string().parse().unwrap();
        prop_assert_eq!(parsed, once);
    }

    #[test]
    fn shared_store_is_never_larger(sep in 0usize..4, pw in 0usize..4, r in 1usize..5, x in 1usize..5) {
        let config = tiny().with_stacks(r).with_blocks(x);
        let shared = config.clone().with_sharing(SharingConfig::new(SharingScheme::ALL[sep], SharingScheme::ALL[pw]));
        prop_assert!(audit(&shared).total <= audit(&config).total);
    }
}

#[test]
fn single_block_control_matches_dilation_shared_size() {
    let base = ModelConfig::preset(Preset::ConvtasnetBase);
    let s2 = audit_against(&ModelConfig::preset(Preset::Simplified2), &base);
    assert_eq!(s2.total, audit(&base.clone().with_sharing(scheme("dd"))).total);
    // Stack sharing keeps one set per dilation, so it is larger than dd here.
    assert!(audit(&base.with_sharing(scheme("ss"))).total > s2.total);
}
