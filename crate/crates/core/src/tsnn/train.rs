use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::model::{batch_loss, DecoderModel, Mode};
use crate::error::{Error, Result};
use crate::pixelmap::PixelImage;
use crate::scalar::Real;

/// One training pair: pose input, target image and its loss mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Example<T> {
    pub id: u64,
    pub input: Vec<T>,
    pub target: Vec<T>,
    pub mask: Vec<T>,
}

impl<T: Real> Example<T> {
    pub fn new(id: u64, input: Vec<T>, target: &PixelImage<T>) -> Self {
        Self { id, input, target: target.data.clone(), mask: target.channel_mask() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 20, batch_size: 8, lr: 1e-3, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-example loss over the epoch's training steps.
    pub train_loss: f64,
    /// Mean per-example loss on the validation split in eval mode.
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Parameters from the epoch with the lowest validation loss (the
    /// initial model when no epoch ran).
    pub best: DecoderModel<T>,
    pub best_epoch: Option<usize>,
    pub curve: Vec<EpochStats>,
}

/// A model with its optimizer state.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    pub model: DecoderModel<T>,
    pub adam: AdamState<T>,
}

fn stack<T: Real>(batch: &[&Example<T>]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut x = Vec::new();
    let mut t = Vec::new();
    let mut m = Vec::new();
    for e in batch {
        x.extend_from_slice(&e.input);
        t.extend_from_slice(&e.target);
        m.extend_from_slice(&e.mask);
    }
    (x, t, m)
}

impl<T: Real> Trainer<T> {
    pub fn new(model: DecoderModel<T>, lr: f64) -> Self {
        let n = model.num_params();
        Self { model, adam: AdamState::new(n, T::lit(lr)) }
    }

    /// One optimizer step on `batch`; returns the batch loss before the
    /// update.
    pub fn step(&mut self, batch: &[&Example<T>]) -> Result<T> {
        let (x, t, m) = stack(batch);
        let (pred, cache) = self.model.forward_batch(&x, batch.len(), Mode::Train)?;
        let cache = cache.expect("training cache");
        let (loss, d_pred, _) = batch_loss(&pred, &t, &m, batch.len())?;
        let grad = self.model.backward(&cache, &d_pred);
        let blocks = self.model.blocks();
        adam_step(&mut self.adam, &mut self.model.params, &grad, &blocks)?;
        self.model.update_running_stats(&cache);
        self.model.step += 1;
        Ok(loss)
    }
}

/// Batch loss gradient for `batch` without updating anything.
pub fn gradients<T: Real>(model: &DecoderModel<T>, batch: &[&Example<T>]) -> Result<(T, Vec<T>)> {
    if batch.is_empty() {
        return Err(Error::EmptySplit("batch"));
    }
    let (x, t, m) = stack(batch);
    let (pred, cache) = model.forward_batch(&x, batch.len(), Mode::Train)?;
    let (loss, d_pred, _) = batch_loss(&pred, &t, &m, batch.len())?;
    Ok((loss, model.backward(&cache.expect("training cache"), &d_pred)))
}

/// Mean per-example loss in eval mode.
pub fn evaluate<T: Real>(model: &DecoderModel<T>, examples: &[Example<T>], chunk: usize) -> Result<T> {
    if examples.is_empty() {
        return Err(Error::EmptySplit("evaluation"));
    }
    let mut total = T::zero();
    for part in examples.chunks(chunk.max(1)) {
        let refs: Vec<&Example<T>> = part.iter().collect();
        let (x, t, m) = stack(&refs);
        let (pred, _) = model.forward_batch(&x, refs.len(), Mode::Eval)?;
        total += batch_loss(&pred, &t, &m, refs.len())?.0;
    }
    Ok(total / T::lit(examples.len() as f64))
}

/// Mini-batch training with per-epoch reshuffling; keeps the parameters of
/// the best validation epoch.
pub fn train<T: Real>(
    model: DecoderModel<T>,
    train_set: &[Example<T>],
    val_set: &[Example<T>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    if train_set.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if val_set.is_empty() {
        return Err(Error::EmptySplit("val"));
    }
    let mut best = model.clone();
    let mut best_epoch = None;
    let mut best_val = f64::INFINITY;
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut trainer = Trainer::new(model, cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<&Example<T>> = chunk.iter().map(|&i| &train_set[i]).collect();
            sum += trainer.step(&batch)?.as_f64();
        }
        let train_loss = sum / train_set.len() as f64;
        let val_loss = evaluate(&trainer.model, val_set, cfg.batch_size)?.as_f64();
        info!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        curve.push(EpochStats { epoch, train_loss, val_loss });
        if val_loss < best_val {
            best_val = val_loss;
            best = trainer.model.clone();
            best_epoch = Some(epoch);
        }
    }
    Ok(TrainOutcome { best, best_epoch, curve })
}
