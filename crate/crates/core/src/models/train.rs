//! Seeded, deterministic training loops.
//!
//! Class imbalance is handled by per-class resampling to the largest class
//! count each epoch. Per-sample gradients inside a batch are computed in
//! parallel but reduced in sample order, so the result is bit-identical
//! regardless of thread scheduling.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{FrameClassifier, SequenceClassifier, SequenceGrads};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::tensor::sgd::{LrSchedule, Sgd};
use crate::tensor::Tensor;

/// Training hyperparameters. Defaults follow the reference setup: batch 128,
/// learning rate 0.001 decayed by 0.95 every 5000 iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    pub batch: usize,
    pub schedule: LrSchedule,
    pub epochs: usize,
    pub seed: u64,
    /// Global L2 cap on the batch gradient; None disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            batch: 128,
            schedule: LrSchedule::default(),
            epochs: 10,
            seed: 0,
            clip_norm: Some(5.0),
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.epochs == 0 {
            return Err(Error::Config("batch and epochs must be positive".into()));
        }
        Ok(())
    }

    /// Desk-scale preset: small batches buy more SGD steps per epoch, the
    /// decay is tuned for a few hundred iterations, and clipping handles
    /// the occasional BPTT spike.
    pub fn desk_scale(seed: u64, epochs: usize) -> Self {
        TrainHyper {
            batch: 8,
            schedule: LrSchedule {
                base_lr: 0.05,
                decay_factor: 0.95,
                decay_every: 250,
            },
            epochs,
            seed,
            clip_norm: Some(5.0),
        }
    }
}

/// One sequence training sample: a 16-long window into a shared, already
/// preprocessed frame-tensor list.
#[derive(Clone)]
pub struct SeqSample {
    pub frames: Arc<Vec<Tensor<f32>>>,
    pub start: usize,
    pub len: usize,
    pub label: usize,
}

impl SeqSample {
    fn inputs(&self) -> &[Tensor<f32>] {
        &self.frames[self.start..self.start + self.len]
    }
}

/// One per-frame training sample.
#[derive(Clone)]
pub struct FrameSample {
    pub input: Arc<Tensor<f32>>,
    pub label: usize,
}

/// Balanced epoch order: every class resampled (with replacement) up to the
/// largest class count, then shuffled.
fn balanced_epoch_order(
    labels: &[usize],
    class_count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, &l) in labels.iter().enumerate() {
        if l >= class_count {
            return Err(Error::Input(format!("label {l} outside {class_count} classes")));
        }
        by_class[l].push(i);
    }
    if let Some(empty) = by_class.iter().position(|c| c.is_empty()) {
        return Err(Error::Input(format!("class {empty} has no training samples")));
    }
    let target = by_class.iter().map(Vec::len).max().unwrap();
    let mut order = Vec::with_capacity(target * class_count);
    for class in &by_class {
        order.extend_from_slice(class);
        for _ in class.len()..target {
            order.push(class[rng.gen_range(0..class.len())]);
        }
    }
    order.shuffle(rng);
    Ok(order)
}

fn mean_scale(grads: &mut [Tensor<f32>], n: usize) {
    let s = 1.0 / n as f32;
    for g in grads {
        g.scale(s);
    }
}

/// Rescales so the global L2 norm does not exceed `cap` (BPTT can spike).
fn clip_global_norm(grads: &mut [Tensor<f32>], cap: f64) {
    let sq: f64 = grads
        .iter()
        .flat_map(|g| g.data())
        .map(|&v| (v as f64) * (v as f64))
        .sum();
    let norm = sq.sqrt();
    if norm > cap {
        let s = (cap / norm) as f32;
        for g in grads {
            g.scale(s);
        }
    }
}

/// Trains a sequence classifier in place; returns the per-epoch mean loss.
pub fn train_sequence(
    model: &mut SequenceClassifier<f32>,
    samples: &[SeqSample],
    hyper: &TrainHyper,
) -> Result<Vec<f64>> {
    hyper.validate()?;
    if samples.is_empty() {
        return Err(Error::Input("no training samples".into()));
    }
    let class_count = model.class_count();
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let mut rng = substream(hyper.seed, Stream::Sampling);
    let mut sgd = Sgd::new(hyper.schedule)?;
    let mut curve = Vec::with_capacity(hyper.epochs);

    for _ in 0..hyper.epochs {
        let order = balanced_epoch_order(&labels, class_count, &mut rng)?;
        let mut epoch_loss = 0.0f64;
        let mut epoch_n = 0usize;
        for batch in order.chunks(hyper.batch) {
            let results: Vec<(f32, SequenceGrads<f32>)> = batch
                .par_iter()
                .map(|&i| {
                    let s = &samples[i];
                    let (loss, cache) = model.forward_train(s.inputs(), s.label)?;
                    Ok((loss, model.backward(&cache)?))
                })
                .collect::<Result<_>>()?;

            let mut sum = model.zeros_like();
            let mut sum_grads = SequenceGrads {
                backbone: std::mem::replace(&mut sum.backbone, model.backbone.zeros_like()),
                lstm: std::mem::replace(&mut sum.lstm, model.lstm.zeros_like()),
                head: std::mem::replace(&mut sum.head, model.head.zeros_like()),
            };
            let mut batch_loss = 0.0f64;
            for (loss, g) in &results {
                batch_loss += *loss as f64;
                sum_grads.add_assign(g)?;
            }
            let mut grads: Vec<Tensor<f32>> = sum_grads.tensors().into_iter().cloned().collect();
            mean_scale(&mut grads, batch.len());
            if let Some(cap) = hyper.clip_norm {
                clip_global_norm(&mut grads, cap);
            }
            sgd.step(&mut model.tensors_mut(), &grads)?;
            epoch_loss += batch_loss;
            epoch_n += batch.len();
        }
        curve.push(epoch_loss / epoch_n as f64);
    }
    Ok(curve)
}

/// Trains a frame classifier in place; returns the per-epoch mean loss.
pub fn train_frames(
    model: &mut FrameClassifier<f32>,
    samples: &[FrameSample],
    hyper: &TrainHyper,
) -> Result<Vec<f64>> {
    hyper.validate()?;
    if samples.is_empty() {
        return Err(Error::Input("no training samples".into()));
    }
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let mut rng = substream(hyper.seed, Stream::Sampling);
    let mut sgd = Sgd::new(hyper.schedule)?;
    let mut curve = Vec::with_capacity(hyper.epochs);

    for _ in 0..hyper.epochs {
        let order = balanced_epoch_order(&labels, 2, &mut rng)?;
        let mut epoch_loss = 0.0f64;
        let mut epoch_n = 0usize;
        for batch in order.chunks(hyper.batch) {
            let results: Vec<(f32, super::FrameGrads<f32>)> = batch
                .par_iter()
                .map(|&i| {
                    let s = &samples[i];
                    let (loss, cache) = model.forward_train(&s.input, s.label)?;
                    Ok((loss, model.backward(&cache)?))
                })
                .collect::<Result<_>>()?;

            let mut sum_grads = super::FrameGrads {
                backbone: model.backbone.zeros_like(),
                head: model.head.zeros_like(),
            };
            let mut batch_loss = 0.0f64;
            for (loss, g) in &results {
                batch_loss += *loss as f64;
                sum_grads.add_assign(g)?;
            }
            let mut grads: Vec<Tensor<f32>> = sum_grads.tensors().into_iter().cloned().collect();
            mean_scale(&mut grads, batch.len());
            if let Some(cap) = hyper.clip_norm {
                clip_global_norm(&mut grads, cap);
            }
            sgd.step(&mut model.tensors_mut(), &grads)?;
            epoch_loss += batch_loss;
            epoch_n += batch.len();
        }
        curve.push(epoch_loss / epoch_n as f64);
    }
    Ok(curve)
}
