//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! Every primitive appends one node holding its output value and whatever
//! it needs for the backward pass. [`Tape::backward`] walks the nodes in
//! reverse recording order, so gradients of shared leaves are summed over
//! every use before they are stored.

use super::kernels::{self, ConvDims, ConvGeometry, TransposeDims};
use super::tensor::{Scalar, Tensor};
use crate::error::{invalid, shape_err, Error, Result};
use crate::metrics;

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv1d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        dims: ConvDims,
    },
    ConvTranspose1d {
        input: Var,
        weight: Var,
        dims: TransposeDims,
    },
    LayerNorm {
        input: Var,
        gain: Var,
        bias: Var,
        normalized: Vec<T>,
        inv_std: T,
    },
    Prelu {
        input: Var,
        slope: Var,
    },
    Relu {
        input: Var,
    },
    Sigmoid {
        input: Var,
    },
    Softmax {
        input: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Scale {
        input: Var,
        factor: T,
    },
    MaskMul {
        masks: Var,
        features: Var,
    },
    Reshape {
        input: Var,
    },
    Row {
        input: Var,
        index: usize,
    },
    Concat {
        inputs: Vec<Var>,
    },
    Sum {
        input: Var,
    },
    Dot {
        a: Var,
        b: Var,
    },
    SiSnr {
        input: Var,
        coeff: Option<Vec<T>>,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Ordered record of primitive applications.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    backpropagated: bool,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            backpropagated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    pub fn grad(&self, var: Var) -> Option<&[T]> {
        self.nodes[var.0].value.grad()
    }

    fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].value.requires_grad()
    }

    fn push(&mut self, data: Vec<T>, shape: &[usize], op: Op<T>, inputs: &[Var]) -> Result<Var> {
        let requires_grad = inputs.iter().any(|&v| self.requires_grad(v));
        let value = Tensor::new(shape, data)?.with_requires_grad(requires_grad);
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a leaf; its `requires_grad` flag is taken from the tensor.
    pub fn leaf(&mut self, tensor: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: tensor,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn parameter(&mut self, tensor: Tensor<T>) -> Var {
        self.leaf(tensor.with_requires_grad(true))
    }

    pub fn constant(&mut self, tensor: Tensor<T>) -> Var {
        self.leaf(tensor.with_requires_grad(false))
    }

    pub fn conv1d(&mut self, input: Var, weight: Var, bias: Option<Var>, geom: ConvGeometry) -> Result<Var> {
        let dims = ConvDims::new(
            self.shape(input),
            self.shape(weight),
            bias.map(|b| self.value(b).numel()),
            geom,
        )?;
        let out = kernels::conv1d_forward(
            &dims,
            self.value(input).data(),
            self.value(weight).data(),
            bias.map(|b| self.value(b).data()),
        );
        let mut deps = vec![input, weight];
        deps.extend(bias);
        self.push(
            out,
            &[dims.c_out, dims.t_out],
            Op::Conv1d {
                input,
                weight,
                bias,
                dims,
            },
            &deps,
        )
    }

    pub fn conv_transpose1d(&mut self, input: Var, weight: Var, stride: usize) -> Result<Var> {
        let dims = TransposeDims::new(self.shape(input), self.shape(weight), stride)?;
        let out = kernels::conv_transpose1d_forward(&dims, self.value(input).data(), self.value(weight).data());
        self.push(
            out,
            &[dims.c_out, dims.t_out],
            Op::ConvTranspose1d { input, weight, dims },
            &[input, weight],
        )
    }

    /// Normalizes over all `C x T` entries, then applies per-channel gain and bias.
    pub fn global_layer_norm(&mut self, input: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        if eps <= 0.0 {
            return Err(invalid("global_layer_norm", "eps must be positive"));
        }
        let shape = self.shape(input).to_vec();
        if shape.len() != 2 {
            return Err(shape_err("global_layer_norm", "input rank", 2, shape.len()));
        }
        let (channels, frames) = (shape[0], shape[1]);
        for v in [gain, bias] {
            if self.value(v).numel() != channels {
                return Err(shape_err("global_layer_norm", "affine length", channels, self.value(v).numel()));
            }
        }
        let x = self.value(input).data();
        let count = T::from_f64(x.len() as f64);
        let mean = x.iter().copied().sum::<T>() / count;
        let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / count;
        let inv_std = (var + T::from_f64(eps)).sqrt().recip();
        let normalized: Vec<T> = x.iter().map(|&v| (v - mean) * inv_std).collect();
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let out = normalized
            .chunks(frames)
            .enumerate()
            .flat_map(|(c, row)| row.iter().map(move |&v| g[c] * v + b[c]))
            .collect();
        self.push(
            out,
            &shape,
            Op::LayerNorm {
                input,
                gain,
                bias,
                normalized,
                inv_std,
            },
            &[input, gain, bias],
        )
    }

    pub fn prelu(&mut self, input: Var, slope: Var) -> Result<Var> {
        if self.value(slope).numel() != 1 {
            return Err(shape_err("prelu", "slope length", 1, self.value(slope).numel()));
        }
        let a = self.value(slope).data()[0];
        let out = self
            .value(input)
            .data()
            .iter()
            .map(|&v| if v >= T::zero() { v } else { a * v })
            .collect();
        let shape = self.shape(input).to_vec();
        self.push(out, &shape, Op::Prelu { input, slope }, &[input, slope])
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        let out = self.value(input).data().iter().map(|&v| v.max(T::zero())).collect();
        let shape = self.shape(input).to_vec();
        self.push(out, &shape, Op::Relu { input }, &[input])
    }

    pub fn sigmoid(&mut self, input: Var) -> Result<Var> {
        let out = self
            .value(input)
            .data()
            .iter()
            .map(|&v| (T::one() + (-v).exp()).recip())
            .collect();
        let shape = self.shape(input).to_vec();
        self.push(out, &shape, Op::Sigmoid { input }, &[input])
    }

    /// Softmax across the leading axis.
    pub fn softmax_leading(&mut self, input: Var) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let groups = shape[0];
        let x = self.value(input).data();
        let inner = x.len() / groups;
        let mut out = vec![T::zero(); x.len()];
        for j in 0..inner {
            let max = (0..groups).map(|c| x[c * inner + j]).fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for c in 0..groups {
                let e = (x[c * inner + j] - max).exp();
                out[c * inner + j] = e;
                total += e;
            }
            for c in 0..groups {
                out[c * inner + j] = out[c * inner + j] / total;
            }
        }
        self.push(out, &shape, Op::Softmax { input }, &[input])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("add", "element count", self.value(a).numel(), self.value(b).numel()));
        }
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(out, &shape, Op::Add { a, b }, &[a, b])
    }

    pub fn scale(&mut self, input: Var, factor: T) -> Result<Var> {
        let out = self.value(input).data().iter().map(|&v| v * factor).collect();
        let shape = self.shape(input).to_vec();
        self.push(out, &shape, Op::Scale { input, factor }, &[input])
    }

    /// `masks[c, ..] * features[..]` for every leading index `c`.
    pub fn mask_multiply(&mut self, masks: Var, features: Var) -> Result<Var> {
        let mshape = self.shape(masks).to_vec();
        if mshape.len() < 2 || mshape[1..] != *self.shape(features) {
            return Err(shape_err(
                "mask_multiply",
                "per-source element count",
                self.value(features).numel(),
                self.value(masks).numel() / mshape[0],
            ));
        }
        let f = self.value(features).data();
        let out = self
            .value(masks)
            .data()
            .chunks(f.len())
            .flat_map(|m| m.iter().zip(f).map(|(&a, &b)| a * b))
            .collect();
        self.push(out, &mshape, Op::MaskMul { masks, features }, &[masks, features])
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let numel: usize = shape.iter().product();
        if numel != self.value(input).numel() {
            return Err(shape_err("reshape", "element count", self.value(input).numel(), numel));
        }
        let out = self.value(input).data().to_vec();
        self.push(out, shape, Op::Reshape { input }, &[input])
    }

    /// Slice `index` of the leading axis.
    pub fn row(&mut self, input: Var, index: usize) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        if index >= shape[0] {
            return Err(shape_err("row", "leading index bound", shape[0], index));
        }
        let inner_shape = if shape.len() == 1 { vec![1] } else { shape[1..].to_vec() };
        let out = self.value(input).row(index).to_vec();
        self.push(out, &inner_shape, Op::Row { input, index }, &[input])
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn concat(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| invalid("concat", "no inputs"))?;
        let inner = self.shape(*first).to_vec();
        let mut out = Vec::with_capacity(inputs.len() * self.value(*first).numel());
        for &v in inputs {
            if self.shape(v) != inner.as_slice() {
                return Err(shape_err("concat", "element count", self.value(*first).numel(), self.value(v).numel()));
            }
            out.extend_from_slice(self.value(v).data());
        }
        let mut shape = vec![inputs.len()];
        shape.extend(&inner);
        self.push(
            out,
            &shape,
            Op::Concat {
                inputs: inputs.to_vec(),
            },
            inputs,
        )
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let total = self.value(input).data().iter().copied().sum();
        self.push(vec![total], &[1], Op::Sum { input }, &[input])
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).numel() != self.value(b).numel() {
            return Err(shape_err("dot", "element count", self.value(a).numel(), self.value(b).numel()));
        }
        let total = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .sum();
        self.push(vec![total], &[1], Op::Dot { a, b }, &[a, b])
    }

    /// Scale-invariant SNR in dB of a recorded estimate against a constant reference.
    pub fn si_snr(&mut self, estimate: Var, reference: &[T]) -> Result<Var> {
        let est: Vec<f64> = self.value(estimate).data().iter().map(|v| v.as_f64()).collect();
        let reference: Vec<f64> = reference.iter().map(|v| v.as_f64()).collect();
        let needs_grad = self.requires_grad(estimate);
        let (value, coeff) = metrics::si_snr_with_grad(&est, &reference, needs_grad)?;
        let coeff = coeff.map(|c| c.into_iter().map(T::from_f64).collect());
        self.push(
            vec![T::from_f64(value)],
            &[1],
            Op::SiSnr {
                input: estimate,
                coeff,
            },
            &[estimate],
        )
    }

    /// Populates `grad` on every tensor that requires it and contributes to `loss`.
    ///
    /// A second call is rejected until [`Tape::clear_grads`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backpropagated {
            return Err(Error::Backward("already called on this tape; clear_grads first".into()));
        }
        if self.value(loss).numel() != 1 {
            return Err(Error::Backward(format!(
                "loss must be scalar, got shape {:?}",
                self.shape(loss)
            )));
        }
        self.backpropagated = true;
        let mut grads: Vec<Option<Vec<T>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].value.requires_grad() {
                continue;
            }
            self.propagate(i, &g, &mut grads);
            self.nodes[i].value.set_grad(g)?;
        }
        Ok(())
    }

    pub fn clear_grads(&mut self) {
        for node in &mut self.nodes {
            node.value.zero_grad();
        }
        self.backpropagated = false;
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let wants = |v: Var| self.requires_grad(v);
        let out = self.nodes[i].value.data();
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Conv1d {
                input,
                weight,
                bias,
                dims,
            } => {
                if wants(*input) {
                    let gi = kernels::conv1d_backward_input(dims, g, self.value(*weight).data());
                    accumulate(grads, *input, gi);
                }
                if wants(*weight) || bias.is_some_and(wants) {
                    let (gw, gb) = kernels::conv1d_backward_params(dims, g, self.value(*input).data());
                    if wants(*weight) {
                        accumulate(grads, *weight, gw);
                    }
                    if let Some(b) = bias.filter(|&b| wants(b)) {
                        accumulate(grads, b, gb);
                    }
                }
            }
            Op::ConvTranspose1d { input, weight, dims } => {
                let (gi, gw) =
                    kernels::conv_transpose1d_backward(dims, g, self.value(*input).data(), self.value(*weight).data());
                if wants(*input) {
                    accumulate(grads, *input, gi);
                }
                if wants(*weight) {
                    accumulate(grads, *weight, gw);
                }
            }
            Op::LayerNorm {
                input,
                gain,
                bias,
                normalized,
                inv_std,
            } => {
                let channels = self.value(*gain).numel();
                let frames = g.len() / channels;
                let gain_v = self.value(*gain).data();
                if wants(*gain) || wants(*bias) {
                    let mut gg = vec![T::zero(); channels];
                    let mut gb = vec![T::zero(); channels];
                    for c in 0..channels {
                        let rows = c * frames..(c + 1) * frames;
                        gg[c] = g[rows.clone()].iter().zip(&normalized[rows.clone()]).map(|(&a, &b)| a * b).sum();
                        gb[c] = g[rows].iter().copied().sum();
                    }
                    if wants(*gain) {
                        accumulate(grads, *gain, gg);
                    }
                    if wants(*bias) {
                        accumulate(grads, *bias, gb);
                    }
                }
                if wants(*input) {
                    let count = T::from_f64(g.len() as f64);
                    let dxhat: Vec<T> = g.iter().enumerate().map(|(j, &v)| v * gain_v[j / frames]).collect();
                    let mean_d = dxhat.iter().copied().sum::<T>() / count;
                    let mean_dx = dxhat.iter().zip(normalized).map(|(&a, &b)| a * b).sum::<T>() / count;
                    let gi = dxhat
                        .iter()
                        .zip(normalized)
                        .map(|(&d, &xh)| *inv_std * (d - mean_d - xh * mean_dx))
                        .collect();
                    accumulate(grads, *input, gi);
                }
            }
            Op::Prelu { input, slope } => {
                let x = self.value(*input).data();
                let a = self.value(*slope).data()[0];
                if wants(*input) {
                    let gi = x.iter().zip(g).map(|(&xv, &gv)| if xv >= T::zero() { gv } else { a * gv }).collect();
                    accumulate(grads, *input, gi);
                }
                if wants(*slope) {
                    let gs = x.iter().zip(g).filter(|(&xv, _)| xv < T::zero()).map(|(&xv, &gv)| xv * gv).sum();
                    accumulate(grads, *slope, vec![gs]);
                }
            }
            Op::Relu { input } => {
                let x = self.value(*input).data();
                let gi = x.iter().zip(g).map(|(&xv, &gv)| if xv > T::zero() { gv } else { T::zero() }).collect();
                accumulate(grads, *input, gi);
            }
            Op::Sigmoid { input } => {
                let gi = out.iter().zip(g).map(|(&y, &gv)| gv * y * (T::one() - y)).collect();
                accumulate(grads, *input, gi);
            }
            Op::Softmax { input } => {
                let groups = self.shape(*input)[0];
                let inner = out.len() / groups;
                let mut gi = vec![T::zero(); out.len()];
                for j in 0..inner {
                    let weighted: T = (0..groups).map(|c| g[c * inner + j] * out[c * inner + j]).sum();
                    for c in 0..groups {
                        let k = c * inner + j;
                        gi[k] = out[k] * (g[k] - weighted);
                    }
                }
                accumulate(grads, *input, gi);
            }
            Op::Add { a, b } => {
                if wants(*a) {
                    accumulate(grads, *a, g.to_vec());
                }
                if wants(*b) {
                    accumulate(grads, *b, g.to_vec());
                }
            }
            Op::Scale { input, factor } => {
                accumulate(grads, *input, g.iter().map(|&v| v * *factor).collect());
            }
            Op::MaskMul { masks, features } => {
                let m = self.value(*masks).data();
                let f = self.value(*features).data();
                if wants(*masks) {
                    let gm = g.chunks(f.len()).flat_map(|gc| gc.iter().zip(f).map(|(&a, &b)| a * b)).collect();
                    accumulate(grads, *masks, gm);
                }
                if wants(*features) {
                    let mut gf = vec![T::zero(); f.len()];
                    for (gc, mc) in g.chunks(f.len()).zip(m.chunks(f.len())) {
                        for ((acc, &gv), &mv) in gf.iter_mut().zip(gc).zip(mc) {
                            *acc += gv * mv;
                        }
                    }
                    accumulate(grads, *features, gf);
                }
            }
            Op::Reshape { input } => accumulate(grads, *input, g.to_vec()),
            Op::Row { input, index } => {
                let total = self.value(*input).numel();
                let mut gi = vec![T::zero(); total];
                gi[index * g.len()..(index + 1) * g.len()].copy_from_slice(g);
                accumulate(grads, *input, gi);
            }
            Op::Concat { inputs } => {
                let inner = g.len() / inputs.len();
                for (k, &v) in inputs.iter().enumerate() {
                    if wants(v) {
                        accumulate(grads, v, g[k * inner..(k + 1) * inner].to_vec());
                    }
                }
            }
            Op::Sum { input } => {
                let n = self.value(*input).numel();
                accumulate(grads, *input, vec![g[0]; n]);
            }
            Op::Dot { a, b } => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if wants(*a) {
                    accumulate(grads, *a, bv.iter().map(|&v| v * g[0]).collect());
                }
                if wants(*b) {
                    accumulate(grads, *b, av.iter().map(|&v| v * g[0]).collect());
                }
            }
            Op::SiSnr { input, coeff } => {
                let n = self.value(*input).numel();
                let gi = match coeff {
                    Some(c) => c.iter().map(|&v| v * g[0]).collect(),
                    None => vec![T::zero(); n],
                };
                accumulate(grads, *input, gi);
            }
        }
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Vec<T>>], var: Var, contribution: Vec<T>) {
    match &mut grads[var.0] {
        Some(existing) => {
            for (e, c) in existing.iter_mut().zip(contribution) {
                *e += c;
            }
        }
        slot @ None => *slot = Some(contribution),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[1, 3], &[1.0, 2.0, 3.0]));
        let w = tape.constant(t(&[1, 1, 1], &[1.0]));
        let y = tape.conv1d(x, w, None, ConvGeometry::default()).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn dilated_pair_sum() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[1, 4], &[1.0, 2.0, 3.0, 4.0]));
        let w = tape.constant(t(&[1, 1, 2], &[1.0, 1.0]));
        let geom = ConvGeometry {
            dilation: 2,
            ..Default::default()
        };
        let y = tape.conv1d(x, w, None, geom).unwrap();
        assert_eq!(tape.value(y).data(), &[4.0, 6.0]);
    }

    #[test]
    fn conv_shape_errors_name_the_dimension() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[3, 4], &[0.0; 12]));
        let w = tape.constant(t(&[2, 2, 1], &[0.0; 4]));
        let err = tape.conv1d(x, w, None, ConvGeometry::default()).unwrap_err();
        assert!(err.to_string().contains("weight input channels per group"), "{err}");
        let err = tape
            .conv1d(x, w, None, ConvGeometry { groups: 2, ..Default::default() })
            .unwrap_err();
        assert!(err.to_string().contains("not divisible by groups"), "{err}");
    }

    #[test]
    fn transposed_single_frame_copies_kernel() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[1, 1], &[2.0]));
        let w = tape.constant(t(&[1, 1, 3], &[1.0, -1.0, 0.5]));
        let y = tape.conv_transpose1d(x, w, 2).unwrap();
        assert_eq!(tape.value(y).data(), &[2.0, -2.0, 1.0]);
    }

    #[test]
    fn prelu_sigmoid_definitions() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[2], &[-1.0, 2.0]));
        let a = tape.constant(t(&[1], &[0.25]));
        let y = tape.prelu(x, a).unwrap();
        assert_eq!(tape.value(y).data(), &[-0.25, 2.0]);
        let z = tape.constant(t(&[1], &[0.0]));
        let s = tape.sigmoid(z).unwrap();
        assert_eq!(tape.value(s).data(), &[0.5]);
    }

    #[test]
    fn constant_input_normalizes_to_zero() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(&[3, 5], 7.0));
        let g = tape.constant(Tensor::full(&[3], 1.0));
        let b = tape.constant(Tensor::zeros(&[3]));
        let y = tape.global_layer_norm(x, g, b, 1e-8).unwrap();
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sum_and_square_gradients() {
        let mut tape = Tape::new();
        let x = tape.parameter(t(&[3], &[1.0, -2.0, 0.5]));
        let s = tape.sum(x).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 1.0, 1.0]);

        let mut tape = Tape::new();
        let x = tape.parameter(t(&[3], &[1.0, -2.0, 0.5]));
        let q = tape.dot(x, x).unwrap();
        tape.backward(q).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_and_repeats() {
        let mut tape = Tape::new();
        let x = tape.parameter(t(&[2], &[1.0, 2.0]));
        let y = tape.scale(x, 3.0).unwrap();
        assert!(matches!(tape.backward(y), Err(Error::Backward(_))));
        let s = tape.sum(y).unwrap();
        tape.backward(s).unwrap();
        assert!(matches!(tape.backward(s), Err(Error::Backward(_))));
        tape.clear_grads();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[3.0, 3.0]);
    }

    #[test]
    fn shared_leaf_accumulates_over_uses() {
        let mut tape = Tape::new();
        let w = tape.parameter(t(&[2], &[0.5, 1.5]));
        let a = tape.scale(w, 2.0).unwrap();
        let b = tape.scale(w, -1.0).unwrap();
        let c = tape.add(a, b).unwrap();
        let s = tape.sum(c).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(w).unwrap(), &[1.0, 1.0]);
    }
}
