//! Every parameter site of a [`ModelConfig`], before sharing is applied.

use super::config::{ModelConfig, Normalization};
use crate::sharing::{Component, ParamKey, Site, TensorRole};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    FanIn(usize),
    Zeros,
    Ones,
    Constant(f64),
}

pub const PRELU_INIT: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct ParamSpec {
    pub key: ParamKey,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    fn new(key: ParamKey, shape: &[usize], init: Init) -> Self {
        Self {
            key,
            shape: shape.to_vec(),
            init,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

fn block_specs(config: &ModelConfig, stack: usize, dilation: usize, out: &mut Vec<ParamSpec>) {
    let (b, h, p) = (config.bottleneck_dim, config.hidden_dim, config.kernel_size);
    let norm = config.normalization == Normalization::Global;
    let pw = |role| ParamKey::block(Component::Pointwise, stack, dilation, role);
    out.push(ParamSpec::new(pw(TensorRole::InputWeight), &[h, b, 1], Init::FanIn(b)));
    out.push(ParamSpec::new(pw(TensorRole::InputBias), &[h], Init::Zeros));
    out.push(ParamSpec::new(pw(TensorRole::Slope), &[1], Init::Constant(PRELU_INIT)));
    if norm {
        out.push(ParamSpec::new(pw(TensorRole::NormGain), &[h], Init::Ones));
        out.push(ParamSpec::new(pw(TensorRole::NormBias), &[h], Init::Zeros));
    }
    if let Some(sc) = config.skip_dim {
        out.push(ParamSpec::new(pw(TensorRole::SkipWeight), &[sc, h, 1], Init::FanIn(h)));
        out.push(ParamSpec::new(pw(TensorRole::SkipBias), &[sc], Init::Zeros));
    }

    let sep = |role| ParamKey::block(Component::Separable, stack, dilation, role);
    out.push(ParamSpec::new(sep(TensorRole::DepthwiseWeight), &[h, 1, p], Init::FanIn(p)));
    out.push(ParamSpec::new(sep(TensorRole::DepthwiseBias), &[h], Init::Zeros));
    out.push(ParamSpec::new(sep(TensorRole::Slope), &[1], Init::Constant(PRELU_INIT)));
    if norm {
        out.push(ParamSpec::new(sep(TensorRole::NormGain), &[h], Init::Ones));
        out.push(ParamSpec::new(sep(TensorRole::NormBias), &[h], Init::Zeros));
    }
    out.push(ParamSpec::new(sep(TensorRole::ResidualWeight), &[b, h, 1], Init::FanIn(h)));
    out.push(ParamSpec::new(sep(TensorRole::ResidualBias), &[b], Init::Zeros));
}

/// Site keys (unshared) with shapes and initializers, in forward order.
pub fn parameter_sites(config: &ModelConfig) -> Vec<ParamSpec> {
    let (n, l, b) = (config.encoder_dim, config.window, config.bottleneck_dim);
    let mut out = Vec::new();
    out.push(ParamSpec::new(
        ParamKey::new(Site::Encoder, TensorRole::Weight),
        &[n, 1, l],
        Init::FanIn(l),
    ));
    if config.normalization == Normalization::Global {
        out.push(ParamSpec::new(ParamKey::new(Site::Bottleneck, TensorRole::NormGain), &[n], Init::Ones));
        out.push(ParamSpec::new(ParamKey::new(Site::Bottleneck, TensorRole::NormBias), &[n], Init::Zeros));
    }
    out.push(ParamSpec::new(
        ParamKey::new(Site::Bottleneck, TensorRole::Weight),
        &[b, n, 1],
        Init::FanIn(n),
    ));
    out.push(ParamSpec::new(ParamKey::new(Site::Bottleneck, TensorRole::Bias), &[b], Init::Zeros));
    for stack in 0..config.stacks {
        for block in 0..config.blocks_per_stack {
            block_specs(config, stack, block, &mut out);
        }
    }
    let head_in = config.head_input_dim();
    let mask_channels = config.sources * n;
    out.push(ParamSpec::new(
        ParamKey::new(Site::MaskHead, TensorRole::Slope),
        &[1],
        Init::Constant(PRELU_INIT),
    ));
    out.push(ParamSpec::new(
        ParamKey::new(Site::MaskHead, TensorRole::Weight),
        &[mask_channels, head_in, 1],
        Init::FanIn(head_in),
    ));
    out.push(ParamSpec::new(
        ParamKey::new(Site::MaskHead, TensorRole::Bias),
        &[mask_channels],
        Init::Zeros,
    ));
    // Each decoded sample sums `window / stride` overlapping frames of `n` channels.
    out.push(ParamSpec::new(
        ParamKey::new(Site::Decoder, TensorRole::Weight),
        &[n, 1, l],
        Init::FanIn(n * l / config.stride),
    ));
    out
}
