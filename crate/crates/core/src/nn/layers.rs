//! Layer primitives with exact backward passes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Tensor4;
use crate::math;
use crate::{Error, Result};

/// Convolution weights `[out_channels, in_channels, k, k]` plus one bias per
/// output channel, borrowed from a flat parameter buffer.
#[derive(Debug, Clone, Copy)]
pub struct Filter<'a> {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub weight: &'a [f64],
    pub bias: &'a [f64],
}

impl Filter<'_> {
    fn check(&self, x: &Tensor4) -> Result<()> {
        let expected = self.out_channels * self.in_channels * self.kernel * self.kernel;
        if self.weight.len() != expected || self.bias.len() != self.out_channels {
            return Err(Error::ShapeMismatch(format!(
                "filter {}x{}x{k}x{k} has {} weights and {} biases",
                self.out_channels,
                self.in_channels,
                self.weight.len(),
                self.bias.len(),
                k = self.kernel
            )));
        }
        if x.c != self.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "input has {} channels, filter expects {}",
                x.c, self.in_channels
            )));
        }
        Ok(())
    }

    #[inline]
    fn w(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> f64 {
        self.weight[((oc * self.in_channels + ic) * self.kernel + ky) * self.kernel + kx]
    }
}

/// Output spatial size of a convolution, or an error if the kernel does not
/// fit the padded input.
pub fn conv_output_size(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 || input + 2 * pad < kernel {
        return Err(Error::ShapeMismatch(format!(
            "kernel {kernel} stride {stride} pad {pad} does not fit input {input}"
        )));
    }
    Ok((input + 2 * pad - kernel) / stride + 1)
}

/// Output indices `o` in `0..out` with `0 <= o * stride + k - pad < input`.
#[inline]
fn valid_range(out: usize, input: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    let lo = if pad > k {
        (pad - k).div_ceil(stride).min(out)
    } else {
        0
    };
    let hi = if input + pad > k {
        ((input + pad - k - 1) / stride + 1).min(out)
    } else {
        0
    };
    (lo, hi.max(lo))
}

/// Zero-padded cross-correlation.
pub fn conv2d_forward(x: &Tensor4, f: &Filter<'_>, stride: usize, pad: usize) -> Result<Tensor4> {
    f.check(x)?;
    let oh = conv_output_size(x.h, f.kernel, stride, pad)?;
    let ow = conv_output_size(x.w, f.kernel, stride, pad)?;
    let mut out = Tensor4::zeros(x.n, f.out_channels, oh, ow);
    for n in 0..x.n {
        for oc in 0..f.out_channels {
            let base = out.index(n, oc, 0, 0);
            let plane = &mut out.data[base..base + oh * ow];
            plane.fill(f.bias[oc]);
            for ic in 0..x.c {
                let src = &x.data[x.index(n, ic, 0, 0)..][..x.h * x.w];
                for ky in 0..f.kernel {
                    let (oy0, oy1) = valid_range(oh, x.h, ky, stride, pad);
                    for kx in 0..f.kernel {
                        let wv = f.w(oc, ic, ky, kx);
                        let (ox0, ox1) = valid_range(ow, x.w, kx, stride, pad);
                        if ox0 == ox1 {
                            continue;
                        }
                        for oy in oy0..oy1 {
                            let iy = oy * stride + ky - pad;
                            let row_out = &mut plane[oy * ow..(oy + 1) * ow];
                            let row_in = &src[iy * x.w..(iy + 1) * x.w];
                            if stride == 1 {
                                let shift = ox0 + kx - pad;
                                for (o, &i) in row_out[ox0..ox1]
                                    .iter_mut()
                                    .zip(&row_in[shift..shift + (ox1 - ox0)])
                                {
                                    *o += wv * i;
                                }
                            } else {
                                for ox in ox0..ox1 {
                                    row_out[ox] += wv * row_in[ox * stride + kx - pad];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of a scalar loss with respect to a convolution's input,
/// weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor4,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn conv2d_backward(
    grad_out: &Tensor4,
    x: &Tensor4,
    f: &Filter<'_>,
    stride: usize,
    pad: usize,
) -> Result<ConvGrads> {
    f.check(x)?;
    let oh = conv_output_size(x.h, f.kernel, stride, pad)?;
    let ow = conv_output_size(x.w, f.kernel, stride, pad)?;
    if grad_out.dims() != [x.n, f.out_channels, oh, ow] {
        return Err(Error::ShapeMismatch(format!(
            "output gradient {:?} does not match expected {:?}",
            grad_out.dims(),
            [x.n, f.out_channels, oh, ow]
        )));
    }
    let k = f.kernel;
    let mut gx = Tensor4::zeros(x.n, x.c, x.h, x.w);
    let mut gw = vec![0.0; f.weight.len()];
    let mut gb = vec![0.0; f.out_channels];
    for n in 0..x.n {
        for oc in 0..f.out_channels {
            let g = &grad_out.data[grad_out.index(n, oc, 0, 0)..][..oh * ow];
            gb[oc] += g.iter().sum::<f64>();
            for ic in 0..x.c {
                let src_base = x.index(n, ic, 0, 0);
                let src = &x.data[src_base..src_base + x.h * x.w];
                for ky in 0..k {
                    let (oy0, oy1) = valid_range(oh, x.h, ky, stride, pad);
                    for kx in 0..k {
                        let widx = ((oc * x.c + ic) * k + ky) * k + kx;
                        let wv = f.weight[widx];
                        let (ox0, ox1) = valid_range(ow, x.w, kx, stride, pad);
                        if ox0 == ox1 {
                            continue;
                        }
                        let mut acc = 0.0;
                        for oy in oy0..oy1 {
                            let iy = oy * stride + ky - pad;
                            let grow = &g[oy * ow..(oy + 1) * ow];
                            let irow = iy * x.w;
                            if stride == 1 {
                                let shift = ox0 + kx - pad;
                                let len = ox1 - ox0;
                                let gslice = &grow[ox0..ox1];
                                acc += gslice
                                    .iter()
                                    .zip(&src[irow + shift..irow + shift + len])
                                    .map(|(a, b)| a * b)
                                    .sum::<f64>();
                                let dst = &mut gx.data[src_base + irow + shift..][..len];
                                for (d, &gv) in dst.iter_mut().zip(gslice) {
                                    *d += wv * gv;
                                }
                            } else {
                                for ox in ox0..ox1 {
                                    let ix = ox * stride + kx - pad;
                                    acc += grow[ox] * src[irow + ix];
                                    gx.data[src_base + irow + ix] += wv * grow[ox];
                                }
                            }
                        }
                        gw[widx] += acc;
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: gx,
        weight: gw,
        bias: gb,
    })
}

pub fn relu(x: &Tensor4) -> Tensor4 {
    Tensor4 {
        data: x.data.iter().map(|&v| v.max(0.0)).collect(),
        ..*x
    }
}

/// Passes gradient where the pre-activation was strictly positive.
pub fn relu_backward(grad_out: &Tensor4, pre: &Tensor4) -> Tensor4 {
    Tensor4 {
        data: grad_out
            .data
            .iter()
            .zip(&pre.data)
            .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
            .collect(),
        ..*grad_out
    }
}

/// 2x2 stride-2 max pooling. The second value holds, for each output, the
/// flat input index of its maximum; ties go to the first element in
/// row-major window order.
pub fn maxpool2x2(x: &Tensor4) -> Result<(Tensor4, Vec<usize>)> {
    if !x.h.is_multiple_of(2) || !x.w.is_multiple_of(2) {
        return Err(Error::OddSpatialDims {
            height: x.h,
            width: x.w,
        });
    }
    let (oh, ow) = (x.h / 2, x.w / 2);
    let mut out = Tensor4::zeros(x.n, x.c, oh, ow);
    let mut argmax = Vec::with_capacity(out.data.len());
    for n in 0..x.n {
        for c in 0..x.c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = x.index(n, c, 2 * oy, 2 * ox);
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let i = x.index(n, c, 2 * oy + dy, 2 * ox + dx);
                        if x.data[i] > x.data[best] {
                            best = i;
                        }
                    }
                    out.data[argmax.len()] = x.data[best];
                    argmax.push(best);
                }
            }
        }
    }
    Ok((out, argmax))
}

/// Scatters `grad_out` to the stored argmax positions of an input shaped
/// `input_dims`.
pub fn maxpool_backward(
    grad_out: &Tensor4,
    argmax: &[usize],
    input_dims: [usize; 4],
) -> Result<Tensor4> {
    if grad_out.data.len() != argmax.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} gradients for {} pooled positions",
            grad_out.data.len(),
            argmax.len()
        )));
    }
    let [n, c, h, w] = input_dims;
    let mut gx = Tensor4::zeros(n, c, h, w);
    for (&g, &i) in grad_out.data.iter().zip(argmax) {
        gx.data[i] += g;
    }
    Ok(gx)
}

/// Fully connected layer: `weight` is `[out, in]` row-major.
pub fn dense_forward(x: &Tensor4, weight: &[f64], bias: &[f64]) -> Result<Tensor4> {
    let fan_in = x.item_len();
    let out = bias.len();
    if weight.len() != out * fan_in {
        return Err(Error::ShapeMismatch(format!(
            "dense weight has {} entries, expected {out}x{fan_in}",
            weight.len()
        )));
    }
    let mut y = Tensor4::zeros(x.n, out, 1, 1);
    for n in 0..x.n {
        let xi = x.item(n);
        for (o, (row, &b)) in weight.chunks_exact(fan_in).zip(bias).enumerate() {
            y.data[n * out + o] = b + row.iter().zip(xi).map(|(w, v)| w * v).sum::<f64>();
        }
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    /// Shaped like the layer input.
    pub input: Tensor4,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn dense_backward(grad_out: &Tensor4, x: &Tensor4, weight: &[f64]) -> Result<DenseGrads> {
    let fan_in = x.item_len();
    let out = grad_out.item_len();
    if grad_out.n != x.n || weight.len() != out * fan_in {
        return Err(Error::ShapeMismatch(format!(
            "dense backward: grad {:?}, input {:?}, {} weights",
            grad_out.dims(),
            x.dims(),
            weight.len()
        )));
    }
    let mut gx = Tensor4::zeros(x.n, x.c, x.h, x.w);
    let mut gw = vec![0.0; weight.len()];
    let mut gb = vec![0.0; out];
    for n in 0..x.n {
        let xi = x.item(n);
        let gi = grad_out.item(n);
        let gxi = &mut gx.data[n * fan_in..(n + 1) * fan_in];
        for (o, &g) in gi.iter().enumerate() {
            gb[o] += g;
            let row = &weight[o * fan_in..(o + 1) * fan_in];
            let grow = &mut gw[o * fan_in..(o + 1) * fan_in];
            for j in 0..fan_in {
                grow[j] += g * xi[j];
                gxi[j] += g * row[j];
            }
        }
    }
    Ok(DenseGrads {
        input: gx,
        weight: gw,
        bias: gb,
    })
}

/// Numerically stable softmax of one row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| math::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Mean cross-entropy over the batch, and its gradient
/// `(softmax - onehot) / batch` with respect to the logits.
pub fn softmax_cross_entropy(logits: &Tensor4, labels: &[usize]) -> Result<(f64, Tensor4)> {
    let classes = logits.item_len();
    if labels.len() != logits.n {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for a batch of {}",
            labels.len(),
            logits.n
        )));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    let batch = logits.n as f64;
    let mut grad = Tensor4::zeros(logits.n, classes, 1, 1);
    let mut loss = 0.0;
    for (n, &label) in labels.iter().enumerate() {
        let row = logits.item(n);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&z| math::exp(z - max)).sum();
        let log_sum = math::ln(sum);
        loss += log_sum - (row[label] - max);
        let g = &mut grad.data[n * classes..(n + 1) * classes];
        for (k, gk) in g.iter_mut().enumerate() {
            let p = math::exp(row[k] - max - log_sum);
            let onehot = if k == label { 1.0 } else { 0.0 };
            *gk = (p - onehot) / batch;
        }
    }
    Ok((loss / batch, grad))
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
