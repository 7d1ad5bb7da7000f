//! The compact CNN: `[conv3x3 -> relu -> maxpool2x2] * blocks -> dense`.
//!
//! All parameters live in one flat buffer so that optimizers, checkpoints
//! and the gradient checker can treat the model as a single vector.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    argmax, conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool2x2,
    maxpool_backward, relu, relu_backward, softmax_cross_entropy, Filter,
};
use super::Tensor4;
use crate::math;
use crate::seed;
use crate::{Error, Result};

pub const KERNEL: usize = 3;

/// Architecture description, enough to rebuild the parameter layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input_channels: usize,
    /// Square input side in pixels.
    pub input_size: usize,
    /// Output channels of each conv block.
    pub conv_channels: Vec<usize>,
    pub relu: bool,
    pub pool: bool,
    pub class_count: usize,
}

impl ArchSpec {
    /// Three blocks of 8, 16 and 32 channels over RGB input.
    pub fn compact(input_size: usize, class_count: usize) -> Self {
        Self {
            input_channels: 3,
            input_size,
            conv_channels: vec![8, 16, 32],
            relu: true,
            pool: true,
            class_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("architecture: {m}")));
        if self.input_channels == 0 || self.input_size == 0 || self.class_count == 0 {
            return bad("channels, input size and class count must be positive");
        }
        if self.conv_channels.contains(&0) {
            return bad("conv blocks need at least one channel");
        }
        if self.pool && !self.input_size.is_multiple_of(1 << self.conv_channels.len()) {
            return bad("input size must be divisible by 2^blocks when pooling");
        }
        Ok(())
    }

    /// Spatial side after all blocks.
    pub fn final_size(&self) -> usize {
        if self.pool {
            self.input_size >> self.conv_channels.len()
        } else {
            self.input_size
        }
    }

    pub fn dense_inputs(&self) -> usize {
        let c = self
            .conv_channels
            .last()
            .copied()
            .unwrap_or(self.input_channels);
        c * self.final_size() * self.final_size()
    }
}

/// Where one layer's parameters sit in the flat buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSlots {
    pub weight: Range<usize>,
    pub bias: Range<usize>,
    pub fan_in: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub convs: Vec<(usize, usize, LayerSlots)>,
    pub dense: LayerSlots,
    pub total: usize,
}

impl Layout {
    pub fn of(arch: &ArchSpec) -> Self {
        let mut offset = 0;
        let mut slots = |weights: usize, biases: usize, fan_in: usize| {
            let s = LayerSlots {
                weight: offset..offset + weights,
                bias: offset + weights..offset + weights + biases,
                fan_in,
            };
            offset += weights + biases;
            s
        };
        let mut convs = Vec::new();
        let mut in_c = arch.input_channels;
        for &out_c in &arch.conv_channels {
            let fan_in = in_c * KERNEL * KERNEL;
            convs.push((in_c, out_c, slots(out_c * fan_in, out_c, fan_in)));
            in_c = out_c;
        }
        let fan_in = arch.dense_inputs();
        let dense = slots(arch.class_count * fan_in, arch.class_count, fan_in);
        Self {
            convs,
            dense,
            total: offset,
        }
    }

    /// Every parameter group as `(name, range)`, in buffer order.
    pub fn groups(&self) -> Vec<(alloc::string::String, Range<usize>)> {
        let mut out = Vec::new();
        for (i, (_, _, s)) in self.convs.iter().enumerate() {
            out.push((format!("conv{i}.weight"), s.weight.clone()));
            out.push((format!("conv{i}.bias"), s.bias.clone()));
        }
        out.push(("dense.weight".into(), self.dense.weight.clone()));
        out.push(("dense.bias".into(), self.dense.bias.clone()));
        out
    }
}

/// Trainable parameters of the compact CNN.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactCnn {
    arch: ArchSpec,
    layout: Layout,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
struct BlockCache {
    input: Tensor4,
    pre: Tensor4,
    pooled_from: Option<([usize; 4], Vec<usize>)>,
}

struct ForwardCache {
    blocks: Vec<BlockCache>,
    dense_input: Tensor4,
}

/// Which side of every ReLU kink and pooling tie a forward pass landed on.
/// Two passes with equal signatures evaluate the same linear piece.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationPattern {
    relu: Vec<bool>,
    pool: Vec<usize>,
}

impl CompactCnn {
    /// He-uniform weights, zero biases.
    pub fn init(arch: ArchSpec, seed_value: u64) -> Result<Self> {
        arch.validate()?;
        let layout = Layout::of(&arch);
        let mut params = vec![0.0; layout.total];
        let mut rng = seed::rng(seed::mix(seed_value, &[0x0068_655f_696e_6974]));
        let layers = layout
            .convs
            .iter()
            .map(|(_, _, s)| s)
            .chain([&layout.dense]);
        for slots in layers {
            let bound = math::sqrt(6.0 / slots.fan_in as f64);
            for p in &mut params[slots.weight.clone()] {
                *p = (2.0 * rng.random::<f64>() - 1.0) * bound;
            }
        }
        Ok(Self {
            arch,
            layout,
            params,
        })
    }

    pub fn from_params(arch: ArchSpec, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let layout = Layout::of(&arch);
        if params.len() != layout.total {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for an architecture with {}",
                params.len(),
                layout.total
            )));
        }
        Ok(Self {
            arch,
            layout,
            params,
        })
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn filter(&self, block: usize) -> Filter<'_> {
        let (in_c, out_c, s) = &self.layout.convs[block];
        Filter {
            out_channels: *out_c,
            in_channels: *in_c,
            kernel: KERNEL,
            weight: &self.params[s.weight.clone()],
            bias: &self.params[s.bias.clone()],
        }
    }

    fn check_input(&self, x: &Tensor4) -> Result<()> {
        let a = &self.arch;
        if x.c != a.input_channels || x.h != a.input_size || x.w != a.input_size {
            return Err(Error::ShapeMismatch(format!(
                "input {:?} does not match {}x{}x{}",
                x.dims(),
                a.input_channels,
                a.input_size,
                a.input_size
            )));
        }
        Ok(())
    }

    fn forward_cached(&self, x: &Tensor4) -> Result<(Tensor4, ForwardCache)> {
        self.check_input(x)?;
        let mut blocks = Vec::with_capacity(self.layout.convs.len());
        let mut h = x.clone();
        for b in 0..self.layout.convs.len() {
            let pre = conv2d_forward(&h, &self.filter(b), 1, KERNEL / 2)?;
            let act = if self.arch.relu {
                relu(&pre)
            } else {
                pre.clone()
            };
            let (next, pooled_from) = if self.arch.pool {
                let dims = act.dims();
                let (p, idx) = maxpool2x2(&act)?;
                (p, Some((dims, idx)))
            } else {
                (act, None)
            };
            blocks.push(BlockCache {
                input: h,
                pre,
                pooled_from,
            });
            h = next;
        }
        let dense_input = h.flatten();
        let d = &self.layout.dense;
        let logits = dense_forward(
            &dense_input,
            &self.params[d.weight.clone()],
            &self.params[d.bias.clone()],
        )?;
        Ok((
            logits,
            ForwardCache {
                blocks,
                dense_input,
            },
        ))
    }

    /// Logits, `n x classes x 1 x 1`.
    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn loss(&self, x: &Tensor4, labels: &[usize]) -> Result<f64> {
        let logits = self.forward(x)?;
        Ok(softmax_cross_entropy(&logits, labels)?.0)
    }

    /// Mean cross-entropy and its exact gradient, laid out like [`Self::params`].
    pub fn loss_and_grad(&self, x: &Tensor4, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
        let (loss, grad, _) = self.loss_grad_logits(x, labels)?;
        Ok((loss, grad))
    }

    /// [`Self::loss_and_grad`] that also hands back the logits.
    pub fn loss_grad_logits(
        &self,
        x: &Tensor4,
        labels: &[usize],
    ) -> Result<(f64, Vec<f64>, Tensor4)> {
        let (logits, cache) = self.forward_cached(x)?;
        let (loss, grad_logits) = softmax_cross_entropy(&logits, labels)?;
        let mut grad = vec![0.0; self.params.len()];

        let d = &self.layout.dense;
        let dg = dense_backward(
            &grad_logits,
            &cache.dense_input,
            &self.params[d.weight.clone()],
        )?;
        grad[d.weight.clone()].copy_from_slice(&dg.weight);
        grad[d.bias.clone()].copy_from_slice(&dg.bias);

        let mut upstream = dg.input;
        for (b, block) in cache.blocks.iter().enumerate().rev() {
            let g_act = match &block.pooled_from {
                Some((dims, idx)) => {
                    let [n, c, h, w] = *dims;
                    let g = upstream.reshape(c, h / 2, w / 2)?;
                    maxpool_backward(&g, idx, [n, c, h, w])?
                }
                None => {
                    let [_, c, h, w] = block.pre.dims();
                    upstream.reshape(c, h, w)?
                }
            };
            let g_pre = if self.arch.relu {
                relu_backward(&g_act, &block.pre)
            } else {
                g_act
            };
            let cg = conv2d_backward(&g_pre, &block.input, &self.filter(b), 1, KERNEL / 2)?;
            let s = &self.layout.convs[b].2;
            grad[s.weight.clone()].copy_from_slice(&cg.weight);
            grad[s.bias.clone()].copy_from_slice(&cg.bias);
            upstream = cg.input;
        }
        Ok((loss, grad, logits))
    }

    pub fn activation_pattern(&self, x: &Tensor4) -> Result<ActivationPattern> {
        Ok(self.loss_with_pattern(x, None)?.1)
    }

    /// Loss (when `labels` is given, else NaN) together with the activation
    /// pattern of the same forward pass.
    pub fn loss_with_pattern(
        &self,
        x: &Tensor4,
        labels: Option<&[usize]>,
    ) -> Result<(f64, ActivationPattern)> {
        let (logits, cache) = self.forward_cached(x)?;
        let loss = match labels {
            Some(l) => softmax_cross_entropy(&logits, l)?.0,
            None => f64::NAN,
        };
        let mut relu = Vec::new();
        let mut pool = Vec::new();
        for b in &cache.blocks {
            if self.arch.relu {
                relu.extend(b.pre.data.iter().map(|&v| v > 0.0));
            }
            if let Some((_, idx)) = &b.pooled_from {
                pool.extend_from_slice(idx);
            }
        }
        Ok((loss, ActivationPattern { relu, pool }))
    }

    /// Predicted class per batch item; ties go to the lowest class index.
    pub fn predict(&self, x: &Tensor4) -> Result<Vec<usize>> {
        let logits = self.forward(x)?;
        Ok((0..logits.n).map(|i| argmax(logits.item(i))).collect())
    }
}
