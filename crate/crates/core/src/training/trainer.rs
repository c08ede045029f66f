//! Mini-batch training loop, evaluation, and multi-seed statistics.
//!
//! Per-sample gradients within a batch are computed in parallel and then summed in
//! sample order, so results do not depend on the worker count.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::training::backward::{backward, BackwardMode, Gradients};
use crate::training::loss::{argmax, loss_and_output_grad, LossSpec};
use crate::training::optim::{apply_update_in_place, OptimizerState};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: u32,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub decay_factor: f64,
    pub mode: BackwardMode,
    pub loss: LossSpec,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            lr_initial: 1e-3,
            decay_factor: 0.7,
            mode: BackwardMode::ExactChainRule,
            loss: LossSpec::SoftmaxCrossEntropy,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        OptimizerState::new(self.lr_initial, self.decay_factor)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    pub mean_loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub loss: f64,
    pub accuracy: f64,
}

/// One row of training metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based
    pub epoch: u32,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub wall_ms: f64,
}

struct SampleResult {
    loss: f64,
    correct: bool,
    grads: Gradients,
}

fn sample_gradient(
    model: &Model,
    dataset: &Dataset,
    index: usize,
    mode: BackwardMode,
    loss: LossSpec,
) -> Result<SampleResult> {
    let label = dataset.labels()[index];
    let (y, cache) = model.forward(&dataset.sequences()[index])?;
    let (l, dy) = loss_and_output_grad(&y, label, loss)?;
    let grads = backward(
        &cache,
        &dy,
        &model.params,
        &model.channels,
        &model.config,
        mode,
    )?;
    Ok(SampleResult {
        loss: l,
        correct: argmax(&y) == label,
        grads,
    })
}

fn in_batch(batch: usize, err: Error) -> Error {
    match err {
        Error::NumericFailure { location, detail } => Error::NumericFailure {
            location: format!("batch {batch}, {location}"),
            detail,
        },
        other => other,
    }
}

/// Sample visiting order for `epoch`, reproducible from `seed`.
pub fn epoch_order(len: usize, seed: u64, epoch: u32) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(epoch) + 1);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    order
}

/// One pass over `dataset` in shuffled mini-batches. Gradients are averaged over each
/// batch and applied with the optimizer's current learning rate.
pub fn train_epoch(
    model: &mut Model,
    dataset: &Dataset,
    opt: &OptimizerState,
    mode: BackwardMode,
    loss: LossSpec,
    batch_size: usize,
    seed: u64,
) -> Result<EpochReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput(
            "cannot train on an empty dataset".into(),
        ));
    }
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    check_compatible(&model.config, dataset)?;
    let lr = opt.current_lr();
    let order = epoch_order(dataset.len(), seed, opt.epoch);
    let mut total_loss = 0.0;
    let mut correct = 0usize;

    for (b, batch) in order.chunks(batch_size).enumerate() {
        let results: Vec<Result<SampleResult>> = batch
            .par_iter()
            .map(|&i| sample_gradient(model, dataset, i, mode, loss))
            .collect();
        let mut sum = Gradients::zeros_like(&model.params);
        for r in results {
            let r = r.map_err(|e| in_batch(b, e))?;
            total_loss += r.loss;
            correct += usize::from(r.correct);
            sum.add_assign(&r.grads);
        }
        sum.scale(1.0 / batch.len() as f64);
        apply_update_in_place(&mut model.params, &sum, lr);
        if !model.params.is_finite() {
            return Err(Error::numeric(
                format!("batch {b}"),
                "parameters became non-finite",
            ));
        }
    }

    Ok(EpochReport {
        mean_loss: total_loss / dataset.len() as f64,
        accuracy: correct as f64 / dataset.len() as f64,
    })
}

fn check_compatible(config: &ModelConfig, dataset: &Dataset) -> Result<()> {
    let meta = dataset.meta();
    if meta.seq_len != config.seq_len || meta.input_dim != config.input_dim {
        return Err(Error::InvalidInput(format!(
            "dataset sequences are {}x{}, model expects {}x{}",
            meta.seq_len, meta.input_dim, config.seq_len, config.input_dim
        )));
    }
    if meta.num_classes > config.output_dim {
        return Err(Error::InvalidInput(format!(
            "dataset has {} classes, model has {} outputs",
            meta.num_classes, config.output_dim
        )));
    }
    Ok(())
}

pub fn evaluate(model: &Model, dataset: &Dataset, loss: LossSpec) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput(
            "cannot evaluate on an empty dataset".into(),
        ));
    }
    check_compatible(&model.config, dataset)?;
    let results: Vec<Result<(f64, bool)>> = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let label = dataset.labels()[i];
            let y = model.logits(&dataset.sequences()[i])?;
            let (l, _) = loss_and_output_grad(&y, label, loss)?;
            Ok((l, argmax(&y) == label))
        })
        .collect();
    let mut total = 0.0;
    let mut correct = 0usize;
    for r in results {
        let (l, c) = r?;
        total += l;
        correct += usize::from(c);
    }
    Ok(EvalReport {
        loss: total / dataset.len() as f64,
        accuracy: correct as f64 / dataset.len() as f64,
    })
}

/// Trains for `cfg.epochs` epochs, decaying the learning rate after each one.
/// `on_epoch` sees every record as soon as it is produced.
pub fn fit(
    model: &mut Model,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    let mut opt = OptimizerState::new(cfg.lr_initial, cfg.decay_factor)?;
    let mut records = Vec::with_capacity(cfg.epochs as usize);
    for _ in 0..cfg.epochs {
        let start = Instant::now();
        let lr = opt.current_lr();
        let report = train_epoch(
            model,
            train,
            &opt,
            cfg.mode,
            cfg.loss,
            cfg.batch_size,
            cfg.seed,
        )?;
        let test_acc = match test {
            Some(t) => Some(evaluate(model, t, cfg.loss)?.accuracy),
            None => None,
        };
        let record = EpochRecord {
            epoch: opt.epoch + 1,
            lr,
            train_loss: report.mean_loss,
            train_acc: report.accuracy,
            test_acc,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        on_epoch(&record);
        records.push(record);
        opt.advance_epoch();
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSeedReport {
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// sample standard deviation (n − 1 denominator)
    pub stddev: f64,
}

/// Retrains from scratch once per seed and reports test accuracy statistics.
pub fn multi_seed_eval(
    config: &ModelConfig,
    train_cfg: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
    seeds: &[u64],
) -> Result<MultiSeedReport> {
    if seeds.len() < 2 {
        return Err(Error::InvalidInput(
            "multi-seed evaluation needs at least 2 seeds".into(),
        ));
    }
    let mut accuracies = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let acc = train_and_score(config, train_cfg, train, test, seed).map_err(|e| {
            Error::SeedFailure {
                seed,
                source: Box::new(e),
            }
        })?;
        accuracies.push(acc);
    }
    let (mean, stddev) = mean_and_sample_std(&accuracies);
    Ok(MultiSeedReport {
        seeds: seeds.to_vec(),
        accuracies,
        mean,
        stddev,
    })
}

pub fn train_and_score(
    config: &ModelConfig,
    train_cfg: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
    seed: u64,
) -> Result<f64> {
    let mut model = Model::new(config.clone(), seed)?;
    let cfg = TrainConfig {
        seed,
        ..train_cfg.clone()
    };
    fit(&mut model, train, None, &cfg, |_| {})?;
    Ok(evaluate(&model, test, cfg.loss)?.accuracy)
}

pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
