//! Slice-level 1-D convolution kernels.
//!
//! Layout is channels-first and contiguous:
//!
//! * conv input `[c_in, t_in]`, weight `[c_out, c_in / groups, k]`, output `[c_out, t_out]`
//! * transposed input `[c_in, t_in]`, weight `[c_in, c_out, k]`, output `[c_out, (t_in - 1) * stride + k]`
//!
//! Convolution is cross-correlation (no kernel flip).

use super::tensor::Scalar;
use crate::error::{invalid, shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Default for ConvGeometry {
    fn default() -> Self {
        Self {
            stride: 1,
            dilation: 1,
            padding: 0,
            groups: 1,
        }
    }
}

impl ConvGeometry {
    pub fn output_len(&self, t_in: usize, kernel: usize) -> Result<usize> {
        if self.stride == 0 {
            return Err(invalid("conv1d", "stride must be >= 1"));
        }
        if self.dilation == 0 {
            return Err(invalid("conv1d", "dilation must be >= 1"));
        }
        let span = self.dilation * (kernel - 1) + 1;
        let padded = t_in + 2 * self.padding;
        if padded < span {
            return Err(shape_err("conv1d", "padded input length", span, padded));
        }
        Ok((padded - span) / self.stride + 1)
    }

    /// Output positions `[t0, t1)` touched by tap `k`, plus the input index of `t0`.
    fn tap_range(&self, k: usize, t_in: usize, t_out: usize) -> Option<(usize, usize, usize)> {
        let shift = k * self.dilation;
        let s = self.stride;
        let t0 = if self.padding > shift {
            (self.padding - shift).div_ceil(s)
        } else {
            0
        };
        let last = t_in + self.padding;
        if last <= shift {
            return None;
        }
        let t1 = ((last - 1 - shift) / s + 1).min(t_out);
        if t0 >= t1 {
            return None;
        }
        Some((t0, t1, t0 * s + shift - self.padding))
    }
}

/// Shapes of a conv1d call, validated once.
#[derive(Debug, Clone, Copy)]
pub struct ConvDims {
    pub c_in: usize,
    pub t_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub t_out: usize,
    pub geom: ConvGeometry,
}

impl ConvDims {
    pub fn new(
        input_shape: &[usize],
        weight_shape: &[usize],
        bias_len: Option<usize>,
        geom: ConvGeometry,
    ) -> Result<Self> {
        if input_shape.len() != 2 {
            return Err(shape_err("conv1d", "input rank", 2, input_shape.len()));
        }
        if weight_shape.len() != 3 {
            return Err(shape_err("conv1d", "weight rank", 3, weight_shape.len()));
        }
        let (c_in, t_in) = (input_shape[0], input_shape[1]);
        let (c_out, cin_per_group, kernel) = (weight_shape[0], weight_shape[1], weight_shape[2]);
        if geom.groups == 0 || c_in % geom.groups != 0 {
            return Err(invalid(
                "conv1d",
                format!("input channels {c_in} not divisible by groups {}", geom.groups),
            ));
        }
        if c_out % geom.groups != 0 {
            return Err(invalid(
                "conv1d",
                format!("output channels {c_out} not divisible by groups {}", geom.groups),
            ));
        }
        if cin_per_group != c_in / geom.groups {
            return Err(shape_err(
                "conv1d",
                "weight input channels per group",
                c_in / geom.groups,
                cin_per_group,
            ));
        }
        if let Some(b) = bias_len {
            if b != c_out {
                return Err(shape_err("conv1d", "bias length", c_out, b));
            }
        }
        let t_out = geom.output_len(t_in, kernel)?;
        Ok(Self {
            c_in,
            t_in,
            c_out,
            kernel,
            t_out,
            geom,
        })
    }

    fn group_of(&self, o: usize) -> (usize, usize) {
        let out_per_group = self.c_out / self.geom.groups;
        let in_per_group = self.c_in / self.geom.groups;
        let g = o / out_per_group;
        (g * in_per_group, in_per_group)
    }
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

#[inline]
fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    let mut acc = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        acc += a * b;
    }
    acc
}

pub fn conv1d_forward<T: Scalar>(
    dims: &ConvDims,
    input: &[T],
    weight: &[T],
    bias: Option<&[T]>,
) -> Vec<T> {
    let ConvDims {
        t_in,
        c_out,
        kernel,
        t_out,
        geom,
        ..
    } = *dims;
    let mut out = vec![T::zero(); c_out * t_out];
    for o in 0..c_out {
        let (first_in, in_per_group) = dims.group_of(o);
        let row = &mut out[o * t_out..(o + 1) * t_out];
        if let Some(b) = bias {
            row.iter_mut().for_each(|v| *v = b[o]);
        }
        for ig in 0..in_per_group {
            let x = &input[(first_in + ig) * t_in..(first_in + ig + 1) * t_in];
            for k in 0..kernel {
                let w = weight[(o * in_per_group + ig) * kernel + k];
                let Some((t0, t1, start)) = geom.tap_range(k, t_in, t_out) else {
                    continue;
                };
                if geom.stride == 1 {
                    axpy(w, &x[start..start + (t1 - t0)], &mut row[t0..t1]);
                } else {
                    for (j, t) in (t0..t1).enumerate() {
                        row[t] += w * x[start + j * geom.stride];
                    }
                }
            }
        }
    }
    out
}

/// Gradient of conv1d with respect to its input (the adjoint map).
pub fn conv1d_backward_input<T: Scalar>(dims: &ConvDims, grad_out: &[T], weight: &[T]) -> Vec<T> {
    let ConvDims {
        c_in,
        t_in,
        c_out,
        kernel,
        t_out,
        geom,
    } = *dims;
    let mut grad_in = vec![T::zero(); c_in * t_in];
    for o in 0..c_out {
        let (first_in, in_per_group) = dims.group_of(o);
        let g = &grad_out[o * t_out..(o + 1) * t_out];
        for ig in 0..in_per_group {
            let gx = &mut grad_in[(first_in + ig) * t_in..(first_in + ig + 1) * t_in];
            for k in 0..kernel {
                let w = weight[(o * in_per_group + ig) * kernel + k];
                let Some((t0, t1, start)) = geom.tap_range(k, t_in, t_out) else {
                    continue;
                };
                if geom.stride == 1 {
                    axpy(w, &g[t0..t1], &mut gx[start..start + (t1 - t0)]);
                } else {
                    for (j, t) in (t0..t1).enumerate() {
                        gx[start + j * geom.stride] += w * g[t];
                    }
                }
            }
        }
    }
    grad_in
}

/// Gradients of conv1d with respect to weight and bias.
pub fn conv1d_backward_params<T: Scalar>(
    dims: &ConvDims,
    grad_out: &[T],
    input: &[T],
) -> (Vec<T>, Vec<T>) {
    let ConvDims {
        t_in,
        c_out,
        kernel,
        t_out,
        geom,
        ..
    } = *dims;
    let in_per_group = dims.c_in / geom.groups;
    let mut grad_w = vec![T::zero(); c_out * in_per_group * kernel];
    let mut grad_b = vec![T::zero(); c_out];
    for o in 0..c_out {
        let (first_in, _) = dims.group_of(o);
        let g = &grad_out[o * t_out..(o + 1) * t_out];
        grad_b[o] = g.iter().copied().sum();
        for ig in 0..in_per_group {
            let x = &input[(first_in + ig) * t_in..(first_in + ig + 1) * t_in];
            for k in 0..kernel {
                let Some((t0, t1, start)) = geom.tap_range(k, t_in, t_out) else {
                    continue;
                };
                let acc = if geom.stride == 1 {
                    dot(&g[t0..t1], &x[start..start + (t1 - t0)])
                } else {
                    (t0..t1)
                        .enumerate()
                        .map(|(j, t)| g[t] * x[start + j * geom.stride])
                        .sum()
                };
                grad_w[(o * in_per_group + ig) * kernel + k] = acc;
            }
        }
    }
    (grad_w, grad_b)
}

/// Shapes of a transposed convolution (overlap-add), no padding.
#[derive(Debug, Clone, Copy)]
pub struct TransposeDims {
    pub c_in: usize,
    pub t_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub t_out: usize,
}

impl TransposeDims {
    pub fn new(input_shape: &[usize], weight_shape: &[usize], stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(invalid("conv_transpose1d", "stride must be >= 1"));
        }
        if input_shape.len() != 2 {
            return Err(shape_err("conv_transpose1d", "input rank", 2, input_shape.len()));
        }
        if weight_shape.len() != 3 {
            return Err(shape_err("conv_transpose1d", "weight rank", 3, weight_shape.len()));
        }
        if weight_shape[0] != input_shape[0] {
            return Err(shape_err(
                "conv_transpose1d",
                "weight input channels",
                input_shape[0],
                weight_shape[0],
            ));
        }
        let (c_in, t_in) = (input_shape[0], input_shape[1]);
        let (c_out, kernel) = (weight_shape[1], weight_shape[2]);
        Ok(Self {
            c_in,
            t_in,
            c_out,
            kernel,
            stride,
            t_out: (t_in - 1) * stride + kernel,
        })
    }
}

pub fn conv_transpose1d_forward<T: Scalar>(dims: &TransposeDims, input: &[T], weight: &[T]) -> Vec<T> {
    let TransposeDims {
        c_in,
        t_in,
        c_out,
        kernel,
        stride,
        t_out,
    } = *dims;
    let mut out = vec![T::zero(); c_out * t_out];
    for i in 0..c_in {
        let x = &input[i * t_in..(i + 1) * t_in];
        for o in 0..c_out {
            let w = &weight[(i * c_out + o) * kernel..(i * c_out + o + 1) * kernel];
            let y = &mut out[o * t_out..(o + 1) * t_out];
            for (t, &xv) in x.iter().enumerate() {
                axpy(xv, w, &mut y[t * stride..t * stride + kernel]);
            }
        }
    }
    out
}

pub fn conv_transpose1d_backward<T: Scalar>(
    dims: &TransposeDims,
    grad_out: &[T],
    input: &[T],
    weight: &[T],
) -> (Vec<T>, Vec<T>) {
    let TransposeDims {
        c_in,
        t_in,
        c_out,
        kernel,
        stride,
        t_out,
    } = *dims;
    let mut grad_in = vec![T::zero(); c_in * t_in];
    let mut grad_w = vec![T::zero(); c_in * c_out * kernel];
    for i in 0..c_in {
        let x = &input[i * t_in..(i + 1) * t_in];
        for o in 0..c_out {
            let base = (i * c_out + o) * kernel;
            let w = &weight[base..base + kernel];
            let g = &grad_out[o * t_out..(o + 1) * t_out];
            let gw = &mut grad_w[base..base + kernel];
            for t in 0..t_in {
                let window = &g[t * stride..t * stride + kernel];
                grad_in[i * t_in + t] += dot(w, window);
                axpy(x[t], window, gw);
            }
        }
    }
    (grad_in, grad_w)
}
