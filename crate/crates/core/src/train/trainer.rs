use std::io::Write;
use std::time::Instant;

use super::adamw::{adamw_step, clip_grad_norm, AdamState};
use super::{TrainConfig, TrainError};
use crate::autodiff::checkpoint::{restore, snapshot, NamedTensor};
use crate::autodiff::ops::cross_entropy;
use crate::autodiff::{no_grad, Parameter, Tensor};
use crate::data::{Recording, Stage};
use crate::eval::{cohen_kappa, confusion, ConfusionMatrix};
use crate::model::{argmax_stages, Model};
use crate::rng::SeededRng;
use crate::sigproc::Rate;

pub const LOG_HEADER: &str = "epoch,train_loss,val_kappa,seconds";

/// A recording turned into model inputs (one `[1, 1, n]` tensor per stream)
/// and class indices.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub subject_id: String,
    pub inputs: Vec<Tensor>,
    pub labels: Vec<usize>,
}

impl Prepared {
    pub fn stages(&self) -> Vec<Stage> {
        self.labels.iter().map(|&l| Stage::ALL[l]).collect()
    }
}

/// Picks the named channels, PPG first, for `model`'s streams.
pub fn prepare(rec: &Recording, channels: &[&str], model: &Model) -> Result<Prepared, TrainError> {
    if channels.len() != model.streams() {
        return Err(TrainError::Config(format!(
            "{} variant needs {} channels, got {channels:?}",
            model.config.variant,
            model.streams()
        )));
    }
    let inputs = channels
        .iter()
        .map(|&name| {
            let sig = rec.channel(name).ok_or_else(|| {
                TrainError::Config(format!("recording `{}` has no `{name}` channel", rec.subject_id))
            })?;
            if sig.rate != Rate::MODEL {
                return Err(TrainError::Config(format!(
                    "recording `{}` channel `{name}` is at {} Hz, expected {}",
                    rec.subject_id,
                    sig.rate,
                    Rate::MODEL
                )));
            }
            let n = sig.len();
            if n != rec.n_epochs() * model.config.epoch_samples {
                return Err(TrainError::Config(format!(
                    "recording `{}`: {n} samples for {} epochs of {}",
                    rec.subject_id,
                    rec.n_epochs(),
                    model.config.epoch_samples
                )));
            }
            Ok(Tensor::new(sig.samples.clone(), &[1, 1, n])?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prepared {
        subject_id: rec.subject_id.clone(),
        inputs,
        labels: rec.labels.iter().map(|s| s.index()).collect(),
    })
}

/// Owns the optimizer state for one model.
pub struct Trainer<'m> {
    model: &'m Model,
    params: Vec<Parameter>,
    config: TrainConfig,
    adam: AdamState,
}

impl<'m> Trainer<'m> {
    pub fn new(model: &'m Model, config: &TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let params = model.parameters();
        let adam = AdamState::new(&params);
        Ok(Trainer { model, params, config: config.clone(), adam })
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    /// Mean cross-entropy over every scored epoch in `batch`.
    pub fn loss(&self, batch: &[&Prepared]) -> Result<Tensor, TrainError> {
        let total: usize = batch.iter().map(|p| p.labels.len()).sum();
        if total == 0 {
            return Err(TrainError::Config("empty batch".into()));
        }
        let mut loss: Option<Tensor> = None;
        for item in batch {
            let logits = self.model.forward(&item.inputs)?;
            let e = item.labels.len();
            let ce = cross_entropy(&logits.reshape(&[e, self.model.config.classes])?, &item.labels)?
                .mul_scalar(e as f64 / total as f64);
            loss = Some(match loss {
                Some(l) => l.add(&ce)?,
                None => ce,
            });
        }
        Ok(loss.expect("non-empty batch"))
    }

    /// One optimisation step; returns the batch loss before the update.
    pub fn step(&mut self, batch: &[&Prepared]) -> Result<f64, TrainError> {
        for p in &self.params {
            p.tensor.zero_grad();
        }
        let loss = self.loss(batch)?;
        let value = loss.item();
        if !value.is_finite() {
            return Err(TrainError::NonFiniteLoss { step: self.adam.step + 1 });
        }
        loss.backward()?;
        drop(loss);
        if let Some(c) = self.config.grad_clip {
            clip_grad_norm(&self.params, c);
        }
        adamw_step(&self.params, &mut self.adam, &self.config)?;
        Ok(value)
    }

    /// Pooled confusion matrix over `data`.
    pub fn evaluate(&self, data: &[Prepared]) -> Result<ConfusionMatrix, TrainError> {
        evaluate_pooled(self.model, data)
    }
}

/// Pooled confusion matrix of `model`'s predictions over `data`.
pub fn evaluate_pooled(model: &Model, data: &[Prepared]) -> Result<ConfusionMatrix, TrainError> {
    let mut cm = ConfusionMatrix::default();
    for item in data {
        let pred = no_grad(|| -> Result<_, TrainError> {
            let logits = model.forward(&item.inputs)?;
            let data = logits.data();
            Ok(argmax_stages(&data, model.config.classes))
        })?;
        cm.merge(&confusion(&item.stages(), &pred)?);
    }
    Ok(cm)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_kappa: f64,
    /// Best validation kappa so far, this epoch included.
    pub best_val_kappa: f64,
    pub seconds: f64,
}

impl EpochRecord {
    pub fn csv(&self) -> String {
        format!("{},{},{},{:.3}", self.epoch, self.train_loss, self.val_kappa, self.seconds)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub adam: AdamState,
    pub best_val_kappa: f64,
    pub best_epoch: usize,
    pub epochs_since_best: usize,
    pub history: Vec<EpochRecord>,
}

impl TrainState {
    pub fn new() -> Self {
        TrainState {
            adam: AdamState::default(),
            best_val_kappa: f64::NEG_INFINITY,
            best_epoch: 0,
            epochs_since_best: 0,
            history: Vec::new(),
        }
    }

    /// Records one epoch's validation kappa. Returns whether it is a new
    /// best (strictly greater; ties keep the earlier epoch).
    pub fn observe(&mut self, epoch: usize, val_kappa: f64) -> bool {
        if val_kappa > self.best_val_kappa {
            self.best_val_kappa = val_kappa;
            self.best_epoch = epoch;
            self.epochs_since_best = 0;
            true
        } else {
            self.epochs_since_best += 1;
            false
        }
    }

    pub fn should_stop(&self, patience: usize) -> bool {
        self.epochs_since_best >= patience
    }
}

impl Default for TrainState {
    fn default() -> Self {
        TrainState::new()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the best-kappa epoch; also restored into the model.
    pub best: Vec<NamedTensor>,
    pub state: TrainState,
}

/// Trains until `max_epochs` or until validation kappa has not improved for
/// `patience` epochs, writing one CSV line per epoch to `log`.
pub fn train_loop(
    model: &Model,
    train: &[Prepared],
    val: &[Prepared],
    config: &TrainConfig,
    log: &mut dyn Write,
) -> Result<TrainOutcome, TrainError> {
    if train.is_empty() || val.is_empty() {
        return Err(TrainError::Config(format!(
            "need non-empty train and validation sets, got {} and {}",
            train.len(),
            val.len()
        )));
    }
    let mut trainer = Trainer::new(model, config)?;
    let mut rng = SeededRng::new(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = snapshot(trainer.parameters());
    let mut state = TrainState::new();
    writeln!(log, "{LOG_HEADER}")?;

    for epoch in 1..=config.max_epochs {
        let start = Instant::now();
        rng.shuffle(&mut order);
        let mut losses = Vec::new();
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Prepared> = chunk.iter().map(|&i| &train[i]).collect();
            losses.push(trainer.step(&batch)?);
        }
        let train_loss = losses.iter().sum::<f64>() / losses.len() as f64;
        let val_kappa = cohen_kappa(&trainer.evaluate(val)?)?;
        if state.observe(epoch, val_kappa) {
            best = snapshot(trainer.parameters());
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_kappa,
            best_val_kappa: state.best_val_kappa,
            seconds: start.elapsed().as_secs_f64(),
        };
        writeln!(log, "{}", record.csv())?;
        log::info!("epoch {epoch}: loss {train_loss:.4}, val kappa {val_kappa:.4}");
        state.history.push(record);
        if state.should_stop(config.patience) {
            log::info!("early stop after epoch {epoch}; best epoch {}", state.best_epoch);
            break;
        }
    }
    restore(trainer.parameters(), &best)?;
    state.adam = trainer.adam.clone();
    Ok(TrainOutcome { best, state })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_one_with_falling_kappa() {
        let mut st = TrainState::new();
        let kappas = [0.5, 0.4, 0.3, 0.2];
        let mut stopped_after = None;
        for (i, &k) in kappas.iter().enumerate() {
            st.observe(i + 1, k);
            if st.should_stop(1) {
                stopped_after = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped_after, Some(2));
        assert_eq!(st.best_epoch, 1);
        assert_eq!(st.best_val_kappa, 0.5);
    }

    #[test]
    fn ties_keep_earlier_epoch() {
        let mut st = TrainState::new();
        assert!(st.observe(1, 0.3));
        assert!(!st.observe(2, 0.3));
        assert!(st.observe(3, 0.31));
        assert_eq!((st.best_epoch, st.epochs_since_best), (3, 0));
        assert!(!st.should_stop(1));
    }
}
