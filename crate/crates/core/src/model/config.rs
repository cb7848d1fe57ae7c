use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sharing::SharingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    /// TasNet generation: no skip path, softmax masks.
    TasNet,
    /// Conv-TasNet generation: skip path, sigmoid masks.
    ConvTasNet,
}

impl ModelFamily {
    pub fn base_label(self) -> &'static str {
        match self {
            ModelFamily::TasNet => "TasNet (Base-Model)",
            ModelFamily::ConvTasNet => "Conv-TasNet (Base-Model)",
        }
    }

    /// Table-style label of a shared variant, e.g. `Conv-MiTAS_ss`.
    pub fn scheme_label(self, sharing: &SharingConfig) -> String {
        if sharing.is_unshared() {
            return self.base_label().to_string();
        }
        match self {
            ModelFamily::TasNet => format!("MiTAS_{sharing}"),
            ModelFamily::ConvTasNet => format!("Conv-MiTAS_{sharing}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskActivation {
    Sigmoid,
    /// Normalized across sources, so masks sum to one.
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Non-causal layer norm over all channels and frames.
    Global,
    /// No normalization layers (and no gain/bias parameters).
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    TasnetBase,
    ConvtasnetBase,
    Simplified1,
    Simplified2,
    Tiny,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::TasnetBase,
        Preset::ConvtasnetBase,
        Preset::Simplified1,
        Preset::Simplified2,
        Preset::Tiny,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::TasnetBase => "tasnet_base",
            Preset::ConvtasnetBase => "convtasnet_base",
            Preset::Simplified1 => "simplified1",
            Preset::Simplified2 => "simplified2",
            Preset::Tiny => "tiny",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Architecture hyperparameters of the encoder / separator / decoder network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: ModelFamily,
    /// Encoder basis size `N`.
    pub encoder_dim: usize,
    /// Encoder window `L` in samples.
    pub window: usize,
    /// Hop between frames; divides `window`.
    pub stride: usize,
    /// Bottleneck channels `B`.
    pub bottleneck_dim: usize,
    /// Block hidden channels `H`.
    pub hidden_dim: usize,
    /// Skip channels `Sc`; `None` disables the skip path.
    pub skip_dim: Option<usize>,
    /// Depthwise kernel size `P`.
    pub kernel_size: usize,
    /// Blocks per stack `X`; block `x` uses dilation `2^x`.
    pub blocks_per_stack: usize,
    /// Stacks `R`.
    pub stacks: usize,
    /// Sources `C`.
    pub sources: usize,
    pub mask_activation: MaskActivation,
    pub normalization: Normalization,
    pub sharing: SharingConfig,
}

impl ModelConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::TasnetBase => Self {
                family: ModelFamily::TasNet,
                encoder_dim: 512,
                window: 40,
                stride: 20,
                bottleneck_dim: 256,
                hidden_dim: 512,
                skip_dim: None,
                kernel_size: 3,
                blocks_per_stack: 8,
                stacks: 4,
                sources: 2,
                mask_activation: MaskActivation::Softmax,
                normalization: Normalization::Global,
                sharing: SharingConfig::UNSHARED,
            },
            Preset::ConvtasnetBase => Self {
                family: ModelFamily::ConvTasNet,
                encoder_dim: 512,
                window: 16,
                stride: 8,
                bottleneck_dim: 128,
                hidden_dim: 512,
                skip_dim: Some(128),
                kernel_size: 3,
                blocks_per_stack: 8,
                stacks: 3,
                sources: 2,
                mask_activation: MaskActivation::Sigmoid,
                normalization: Normalization::Global,
                sharing: SharingConfig::UNSHARED,
            },
            Preset::Simplified1 => Self::preset(Preset::ConvtasnetBase).simplified_single_stack(),
            Preset::Simplified2 => Self::preset(Preset::ConvtasnetBase).simplified_single_block(),
            Preset::Tiny => Self {
                family: ModelFamily::ConvTasNet,
                encoder_dim: 16,
                window: 4,
                stride: 2,
                bottleneck_dim: 8,
                hidden_dim: 16,
                skip_dim: Some(8),
                kernel_size: 3,
                blocks_per_stack: 3,
                stacks: 2,
                sources: 2,
                mask_activation: MaskActivation::Sigmoid,
                normalization: Normalization::Global,
                sharing: SharingConfig::UNSHARED,
            },
        }
    }

    pub fn from_preset_name(name: &str) -> Result<Self> {
        Ok(Self::preset(name.parse()?))
    }

    pub fn with_sharing(mut self, sharing: SharingConfig) -> Self {
        self.sharing = sharing;
        self
    }

    pub fn with_stacks(mut self, stacks: usize) -> Self {
        self.stacks = stacks;
        self
    }

    pub fn with_blocks(mut self, blocks: usize) -> Self {
        self.blocks_per_stack = blocks;
        self
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden_dim = hidden;
        self
    }

    /// Control with a single stack and no sharing.
    pub fn simplified_single_stack(self) -> Self {
        self.with_stacks(1).with_sharing(SharingConfig::UNSHARED)
    }

    /// Control with a single (dilation 1) block per stack and no sharing.
    pub fn simplified_single_block(self) -> Self {
        self.with_blocks(1).with_sharing(SharingConfig::UNSHARED)
    }

    pub fn dilation(&self, block: usize) -> usize {
        1 << block
    }

    /// Channels feeding the mask head.
    pub fn head_input_dim(&self) -> usize {
        self.skip_dim.unwrap_or(self.bottleneck_dim)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("encoder_dim", self.encoder_dim),
            ("window", self.window),
            ("stride", self.stride),
            ("bottleneck_dim", self.bottleneck_dim),
            ("hidden_dim", self.hidden_dim),
            ("kernel_size", self.kernel_size),
            ("blocks_per_stack", self.blocks_per_stack),
            ("stacks", self.stacks),
            ("sources", self.sources),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if self.skip_dim == Some(0) {
            return Err(Error::InvalidConfig("skip_dim must be positive when present".into()));
        }
        if !self.window.is_multiple_of(self.stride) {
            return Err(Error::InvalidConfig(format!(
                "stride {} does not divide window {}",
                self.stride, self.window
            )));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "kernel_size {} must be odd for symmetric padding",
                self.kernel_size
            )));
        }
        if self.blocks_per_stack > 16 {
            return Err(Error::InvalidConfig("blocks_per_stack above 16 is not supported".into()));
        }
        if self.sources > 3 {
            return Err(Error::InvalidConfig(format!("at most 3 sources, got {}", self.sources)));
        }
        Ok(())
    }

    /// Frames produced for `samples` input samples.
    pub fn frames(&self, samples: usize) -> Result<usize> {
        if samples < self.window {
            return Err(Error::TooShort {
                op: "encode",
                required: self.window,
                actual: samples,
            });
        }
        Ok((samples - self.window) / self.stride + 1)
    }

    /// Samples reconstructed from `samples` input samples (whole hops only).
    pub fn analyzed_len(&self, samples: usize) -> Result<usize> {
        Ok((self.frames(samples)? - 1) * self.stride + self.window)
    }

    /// Total frame span seen by one separator output frame.
    pub fn receptive_field_frames(&self) -> usize {
        1 + (self.kernel_size - 1) * ((1 << self.blocks_per_stack) - 1) * self.stacks
    }
}
