//! Encoder, masking TCN separator and overlap-add decoder.

use super::config::{MaskActivation, ModelConfig, Normalization};
use crate::error::{shape_err, Result};
use crate::numeric::{ConvGeometry, Scalar, Tape, Tensor, Var, NORM_EPS};
use crate::sharing::{Bindings, Component, ParamKey, ParameterStore, Site, TensorRole};

#[derive(Debug, Clone)]
pub struct SeparatorOutput<T> {
    /// `[C, T']` reconstructed waveforms.
    pub sources: Tensor<T>,
    /// `[C, N, frames]`.
    pub masks: Tensor<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct RecordedOutput {
    pub features: Var,
    pub masks: Var,
    pub sources: Var,
}

/// A configured network with its parameters.
#[derive(Debug, Clone)]
pub struct Separator<T> {
    config: ModelConfig,
    store: ParameterStore<T>,
}

fn key(site: Site, role: TensorRole) -> ParamKey {
    ParamKey::new(site, role)
}

impl<T: Scalar> Separator<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let store = ParameterStore::initialize(&config, seed);
        Ok(Self { config, store })
    }

    /// Fails here, never mid-forward, if any site lacks a parameter.
    pub fn from_store(config: ModelConfig, store: ParameterStore<T>) -> Result<Self> {
        config.validate()?;
        store.validate(&config)?;
        Ok(Self { config, store })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParameterStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParameterStore<T> {
        &mut self.store
    }

    pub fn into_store(self) -> ParameterStore<T> {
        self.store
    }

    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> Bindings {
        self.store.bind(tape, trainable)
    }

    /// `[T]` waveform to non-negative `[N, frames]` features.
    pub fn encode(&self, tape: &mut Tape<T>, params: &Bindings, mixture: Var) -> Result<Var> {
        let shape = tape.shape(mixture).to_vec();
        if shape.len() != 1 {
            return Err(shape_err("encode", "mixture rank", 1, shape.len()));
        }
        self.config.frames(shape[0])?;
        let x = tape.reshape(mixture, &[1, shape[0]])?;
        let w = params.get(&key(Site::Encoder, TensorRole::Weight))?;
        let geom = ConvGeometry {
            stride: self.config.stride,
            ..Default::default()
        };
        let y = tape.conv1d(x, w, None, geom)?;
        tape.relu(y)
    }

    fn norm(&self, tape: &mut Tape<T>, params: &Bindings, input: Var, site: Site) -> Result<Var> {
        match self.config.normalization {
            Normalization::Global => {
                let gain = params.get(&key(site, TensorRole::NormGain))?;
                let bias = params.get(&key(site, TensorRole::NormBias))?;
                tape.global_layer_norm(input, gain, bias, NORM_EPS)
            }
            Normalization::Disabled => Ok(input),
        }
    }

    fn pointwise(
        &self,
        tape: &mut Tape<T>,
        params: &Bindings,
        input: Var,
        site: Site,
        weight: TensorRole,
        bias: TensorRole,
    ) -> Result<Var> {
        let w = params.get(&key(site, weight))?;
        let b = params.get(&key(site, bias))?;
        tape.conv1d(input, w, Some(b), ConvGeometry::default())
    }

    /// One dilated block: returns the residual output and the skip output.
    fn block(
        &self,
        tape: &mut Tape<T>,
        params: &Bindings,
        input: Var,
        stack: usize,
        block: usize,
    ) -> Result<(Var, Option<Var>)> {
        let site = |component| Site::Block {
            component,
            stack: Some(stack),
            dilation: Some(block),
        };
        let pw = site(Component::Pointwise);
        let sep = site(Component::Separable);

        let h = self.pointwise(tape, params, input, pw, TensorRole::InputWeight, TensorRole::InputBias)?;
        let h = tape.prelu(h, params.get(&key(pw, TensorRole::Slope))?)?;
        let h = self.norm(tape, params, h, pw)?;

        let dilation = self.config.dilation(block);
        let geom = ConvGeometry {
            stride: 1,
            dilation,
            padding: dilation * (self.config.kernel_size - 1) / 2,
            groups: self.config.hidden_dim,
        };
        let dw = params.get(&key(sep, TensorRole::DepthwiseWeight))?;
        let db = params.get(&key(sep, TensorRole::DepthwiseBias))?;
        let h = tape.conv1d(h, dw, Some(db), geom)?;
        let h = tape.prelu(h, params.get(&key(sep, TensorRole::Slope))?)?;
        let h = self.norm(tape, params, h, sep)?;

        let residual = self.pointwise(tape, params, h, sep, TensorRole::ResidualWeight, TensorRole::ResidualBias)?;
        let out = tape.add(input, residual)?;
        let skip = match self.config.skip_dim {
            Some(_) => Some(self.pointwise(tape, params, h, pw, TensorRole::SkipWeight, TensorRole::SkipBias)?),
            None => None,
        };
        Ok((out, skip))
    }

    /// `[N, frames]` features to `[C, N, frames]` masks.
    pub fn separate(&self, tape: &mut Tape<T>, params: &Bindings, features: Var) -> Result<Var> {
        let shape = tape.shape(features).to_vec();
        let n = self.config.encoder_dim;
        if shape.len() != 2 || shape[0] != n {
            return Err(shape_err("separate", "feature channels", n, shape.first().copied().unwrap_or(0)));
        }
        let frames = shape[1];
        let x = self.norm(tape, params, features, Site::Bottleneck)?;
        let mut x = self.pointwise(tape, params, x, Site::Bottleneck, TensorRole::Weight, TensorRole::Bias)?;
        let mut skip_sum: Option<Var> = None;
        for stack in 0..self.config.stacks {
            for block in 0..self.config.blocks_per_stack {
                let (out, skip) = self.block(tape, params, x, stack, block)?;
                x = out;
                if let Some(s) = skip {
                    skip_sum = Some(match skip_sum {
                        Some(acc) => tape.add(acc, s)?,
                        None => s,
                    });
                }
            }
        }
        let head_in = skip_sum.unwrap_or(x);
        let h = tape.prelu(head_in, params.get(&key(Site::MaskHead, TensorRole::Slope))?)?;
        let logits = self.pointwise(tape, params, h, Site::MaskHead, TensorRole::Weight, TensorRole::Bias)?;
        let logits = tape.reshape(logits, &[self.config.sources, n, frames])?;
        match self.config.mask_activation {
            MaskActivation::Sigmoid => tape.sigmoid(logits),
            MaskActivation::Softmax => tape.softmax_leading(logits),
        }
    }

    /// `[C, N, frames]` masked features to `[C, T']` waveforms.
    pub fn decode(&self, tape: &mut Tape<T>, params: &Bindings, masked: Var) -> Result<Var> {
        let shape = tape.shape(masked).to_vec();
        if shape.len() != 3 || shape[1] != self.config.encoder_dim {
            return Err(shape_err(
                "decode",
                "feature channels",
                self.config.encoder_dim,
                shape.get(1).copied().unwrap_or(0),
            ));
        }
        let w = params.get(&key(Site::Decoder, TensorRole::Weight))?;
        let mut rows = Vec::with_capacity(shape[0]);
        for c in 0..shape[0] {
            let feat = tape.row(masked, c)?;
            let wave = tape.conv_transpose1d(feat, w, self.config.stride)?;
            let len = tape.shape(wave)[1];
            rows.push(tape.reshape(wave, &[len])?);
        }
        tape.concat(&rows)
    }

    pub fn record(&self, tape: &mut Tape<T>, params: &Bindings, mixture: Var) -> Result<RecordedOutput> {
        let features = self.encode(tape, params, mixture)?;
        let masks = self.separate(tape, params, features)?;
        let masked = tape.mask_multiply(masks, features)?;
        let sources = self.decode(tape, params, masked)?;
        Ok(RecordedOutput {
            features,
            masks,
            sources,
        })
    }

    /// Inference on frozen weights.
    pub fn forward(&self, mixture: &[T]) -> Result<SeparatorOutput<T>> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, false);
        let x = tape.constant(Tensor::from_vec(mixture.to_vec()));
        let out = self.record(&mut tape, &params, x)?;
        Ok(SeparatorOutput {
            sources: tape.value(out.sources).clone(),
            masks: tape.value(out.masks).clone(),
        })
    }

    pub fn encode_signal(&self, mixture: &[T]) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, false);
        let x = tape.constant(Tensor::from_vec(mixture.to_vec()));
        let f = self.encode(&mut tape, &params, x)?;
        Ok(tape.value(f).clone())
    }

    /// Separator masks for given `[N, frames]` features.
    pub fn masks_for(&self, features: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, false);
        let f = tape.constant(features.clone());
        let m = self.separate(&mut tape, &params, f)?;
        Ok(tape.value(m).clone())
    }

    pub fn decode_features(&self, masked: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, false);
        let m = tape.constant(masked.clone());
        let w = self.decode(&mut tape, &params, m)?;
        Ok(tape.value(w).clone())
    }
}
