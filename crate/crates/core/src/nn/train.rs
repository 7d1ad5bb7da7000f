use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{CompactCnn, Tensor4};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Square side images are resized to before entering the network.
    pub input_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            learning_rate: 0.01,
            momentum: 0.9,
            seed: 0,
            input_size: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.input_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs, batch_size and input_size must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// SGD with heavy-ball momentum: `v = mu * v + g; p -= lr * v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64, num_params: usize) -> Self {
        Self {
            learning_rate,
            momentum,
            velocity: alloc::vec![0.0; num_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        for ((p, v), &g) in params.iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = self.momentum * *v + g;
            *p -= self.learning_rate * *v;
        }
    }
}

/// In-memory labelled images, each `c x h x w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
    pub labels: Vec<usize>,
}

impl SampleSet {
    pub fn new(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, item: &[f64], label: usize) -> Result<()> {
        if item.len() != self.c * self.h * self.w {
            return Err(Error::ShapeMismatch(format!(
                "sample of {} values, expected {}x{}x{}",
                item.len(),
                self.c,
                self.h,
                self.w
            )));
        }
        self.data.extend_from_slice(item);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Copies the selected items into one batch tensor.
    pub fn batch(&self, indices: &[usize]) -> (Tensor4, Vec<usize>) {
        let len = self.c * self.h * self.w;
        let mut data = Vec::with_capacity(indices.len() * len);
        for &i in indices {
            data.extend_from_slice(&self.data[i * len..(i + 1) * len]);
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        (
            Tensor4 {
                n: indices.len(),
                c: self.c,
                h: self.h,
                w: self.w,
                data,
            },
            labels,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean of the per-batch losses.
    pub loss: f64,
    /// Accuracy of the in-flight predictions made during the epoch.
    pub train_accuracy: f64,
}

/// Mini-batch SGD over `data`, reshuffled every epoch from `cfg.seed`.
///
/// Batches are processed strictly in order, so the result is a pure
/// function of the model, data and config.
pub fn fit(
    model: &mut CompactCnn,
    data: &SampleSet,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("no training samples".into()));
    }
    let mut opt = Sgd::new(cfg.learning_rate, cfg.momentum, model.num_params());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::rng(seed::mix(
            cfg.seed,
            &[0x7368_7566, epoch as u64],
        )));
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, labels) = data.batch(chunk);
            let (loss, grad, logits) = model.loss_grad_logits(&x, &labels)?;
            correct += (0..logits.n)
                .filter(|&i| super::argmax(logits.item(i)) == labels[i])
                .count();
            opt.step(model.params_mut(), &grad);
            loss_sum += loss;
            batches += 1;
        }
        let metrics = EpochMetrics {
            epoch: epoch + 1,
            loss: loss_sum / batches as f64,
            train_accuracy: correct as f64 / data.len() as f64,
        };
        on_epoch(&metrics);
        history.push(metrics);
    }
    Ok(history)
}

pub fn predict_all(model: &CompactCnn, data: &SampleSet, batch_size: usize) -> Result<Vec<usize>> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut out = Vec::with_capacity(data.len());
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, _) = data.batch(chunk);
        out.extend(model.predict(&x)?);
    }
    Ok(out)
}

/// Fraction of samples whose argmax prediction matches the label.
pub fn accuracy(model: &CompactCnn, data: &SampleSet, batch_size: usize) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidConfig(
            "accuracy of an empty sample set".into(),
        ));
    }
    let preds = predict_all(model, data, batch_size)?;
    let correct = preds
        .iter()
        .zip(&data.labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / data.len() as f64)
}
