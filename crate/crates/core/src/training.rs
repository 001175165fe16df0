//! One-step-ahead training with Adam, step decay and global-norm clipping.

use rayon::prelude::*;

use crate::data::{make_windows_until, TrajectoryDataset, Window};
use crate::error::{Error, Result};
use crate::model::{Bound, Network, ParamStore, StreamPair};
use crate::rng::{streams, RngStream};
use crate::scalar::Scalar;
use crate::tensor::{AdamConfig, AdamState, Tape, Tensor, Var};

/// Anything that maps a stream pair to the next frame on a tape.
pub trait OneStepModel<T: Scalar>: Sync {
    fn history(&self) -> usize;
    fn forward(&self, tape: &mut Tape<T>, bound: &Bound, pair: &StreamPair<T>) -> Result<Var>;
}

impl<T: Scalar> OneStepModel<T> for Network<T> {
    fn history(&self) -> usize {
        Network::history(self)
    }

    fn forward(&self, tape: &mut Tape<T>, bound: &Bound, pair: &StreamPair<T>) -> Result<Var> {
        Network::forward(self, tape, bound, pair)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub decay_factor: f64,
    pub decay_interval: usize,
    pub seed: u64,
    /// Steps after the initial history that training targets may reach; `None` uses every frame.
    pub horizon: Option<usize>,
    pub clip_norm: Option<f64>,
    /// Trailing share of trajectories held out for checkpoint selection.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 5,
            lr: 1e-3,
            weight_decay: 1e-4,
            decay_factor: 0.75,
            decay_interval: 20,
            seed: 0,
            horizon: None,
            clip_norm: Some(1.0),
            val_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.decay_interval == 0 {
            return Err(Error::InvalidConfig("epochs, batch size and decay interval must be positive".into()));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::InvalidConfig(format!("decay factor {} outside (0, 1]", self.decay_factor)));
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 || !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::InvalidConfig("lr, weight decay or validation fraction out of range".into()));
        }
        Ok(())
    }

    /// `lr * decay_factor^floor(epoch / decay_interval)`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.decay_factor.powi((epoch / self.decay_interval) as i32)
    }

    /// Number of held-out trajectories out of `samples`.
    pub fn val_count(&self, samples: usize) -> usize {
        ((samples as f64 * self.val_fraction).round() as usize).min(samples.saturating_sub(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Parameters at the lowest validation (or, without a validation split, training) loss.
    pub best: ParamStore<T>,
    pub best_epoch: usize,
    pub last: ParamStore<T>,
    pub history: Vec<EpochRecord>,
}

/// Per-sample `Σ(p - t)² / Σt²`, averaged over the batch.
pub fn relative_mse<T: Scalar>(pred: &[Tensor<T>], truth: &[Tensor<T>]) -> Result<T> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::shape("relative_mse", &[pred.len()], &[truth.len()]));
    }
    let mut total = T::zero();
    for (p, t) in pred.iter().zip(truth) {
        total += sample_relative_mse(p, t)?;
    }
    Ok(total / T::from_usize_lossy(pred.len()))
}

pub fn sample_relative_mse<T: Scalar>(pred: &Tensor<T>, truth: &Tensor<T>) -> Result<T> {
    if pred.shape() != truth.shape() {
        return Err(Error::shape("relative_mse", pred.shape(), truth.shape()));
    }
    let denom = truth.sum_sq();
    if denom == T::zero() {
        return Err(Error::ZeroReference);
    }
    let num: T = pred.data().iter().zip(truth.data()).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(num / denom)
}

/// Differentiable single-sample relative MSE against a constant target.
pub fn relative_mse_on_tape<T: Scalar>(tape: &mut Tape<T>, pred: Var, truth: &Tensor<T>) -> Result<Var> {
    let denom = truth.sum_sq();
    if denom == T::zero() {
        return Err(Error::ZeroReference);
    }
    let t = tape.constant(truth.clone());
    let diff = tape.sub(pred, t)?;
    let sq = tape.mul(diff, diff)?;
    let s = tape.sum(sq)?;
    tape.scale(s, T::one() / denom)
}

/// Loss and parameter gradients (store order) for one window.
pub fn window_loss_and_grad<T: Scalar, M: OneStepModel<T>>(
    model: &M,
    params: &ParamStore<T>,
    window: &Window<T>,
) -> Result<(T, Vec<Tensor<T>>)> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let pred = model.forward(&mut tape, &bound, &window.pair)?;
    let loss = relative_mse_on_tape(&mut tape, pred, &window.target)?;
    let grads = tape.backward(loss)?;
    Ok((tape.value(loss).data()[0], bound.gradients(&grads, params)))
}

/// Mean one-step relative MSE over `windows`, evaluated without gradients.
pub fn one_step_loss<T: Scalar, M: OneStepModel<T>>(model: &M, params: &ParamStore<T>, windows: &[Window<T>]) -> Result<T> {
    if windows.is_empty() {
        return Err(Error::shape("one_step_loss", &[0], &[1]));
    }
    let losses = windows
        .par_iter()
        .map(|w| {
            let mut tape = Tape::new();
            let bound = params.bind_frozen(&mut tape);
            let pred = model.forward(&mut tape, &bound, &w.pair)?;
            sample_relative_mse(tape.value(pred), &w.target)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.into_iter().sum::<T>() / T::from_usize_lossy(windows.len()))
}

/// Training windows of every sample, limited to targets within the horizon.
pub fn dataset_windows<T: Scalar>(data: &TrajectoryDataset<T>, k: usize, horizon: Option<usize>) -> Result<Vec<Window<T>>> {
    let end = horizon.map_or(data.time, |h| k + 1 + h);
    let mut out = Vec::new();
    for i in 0..data.samples {
        out.extend(make_windows_until(&data.trajectory(i), k, end)?);
    }
    Ok(out)
}

fn clip<T: Scalar>(grads: &mut [Tensor<T>], max_norm: f64) {
    let norm = grads.iter().map(|g| g.sum_sq().to_f64_lossy()).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = T::lit(max_norm / norm);
        for g in grads {
            for v in g.data_mut() {
                *v *= s;
            }
        }
    }
}

/// Trains `model` from `init`. The last `val_fraction` of trajectories is
/// held out; `on_epoch` sees each epoch record as it is completed.
pub fn train<T, M>(
    model: &M,
    init: ParamStore<T>,
    data: &TrajectoryDataset<T>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>>
where
    T: Scalar,
    M: OneStepModel<T>,
{
    cfg.validate()?;
    let k = model.history();
    let n_val = cfg.val_count(data.samples);
    let n_train = data.samples - n_val;
    let train_windows = dataset_windows(&data.subset(0..n_train), k, cfg.horizon)?;
    let val_windows = if n_val > 0 {
        dataset_windows(&data.subset(n_train..data.samples), k, cfg.horizon)?
    } else {
        Vec::new()
    };

    let mut params = init;
    let shapes: Vec<Vec<usize>> = params.iter().map(|(_, t)| t.shape().to_vec()).collect();
    let shape_refs: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
    let mut adam = AdamState::new(
        AdamConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..AdamConfig::default()
        },
        &shape_refs,
    );
    let mut rng = RngStream::new(cfg.seed, streams::SHUFFLE);
    let mut order: Vec<usize> = (0..train_windows.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0, params.clone());

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        adam.set_lr(lr);
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let nan = || Error::EarlyNaN { epoch, batch: b };
            let results = batch
                .par_iter()
                .map(|&i| window_loss_and_grad(model, &params, &train_windows[i]))
                .collect::<Vec<_>>();
            let scale = T::one() / T::from_usize_lossy(batch.len());
            let mut sum: Option<Vec<Tensor<T>>> = None;
            let mut batch_loss = 0.0;
            for r in results {
                let (loss, grads) = r.map_err(|e| match e {
                    Error::NonFinite { .. } => nan(),
                    other => other,
                })?;
                batch_loss += loss.to_f64_lossy();
                match sum.as_mut() {
                    None => sum = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            for (x, y) in a.data_mut().iter_mut().zip(g.data()) {
                                *x += *y;
                            }
                        }
                    }
                }
            }
            let mut grads = sum.expect("batches are nonempty");
            for g in grads.iter_mut() {
                for v in g.data_mut() {
                    *v *= scale;
                }
            }
            if !batch_loss.is_finite() || !grads.iter().all(Tensor::is_finite) {
                return Err(nan());
            }
            if let Some(max) = cfg.clip_norm {
                clip(&mut grads, max);
            }
            let grad_refs: Vec<&Tensor<T>> = grads.iter().collect();
            let mut param_refs: Vec<&mut Tensor<T>> = params.values_mut().collect();
            adam.step(&mut param_refs, &grad_refs)?;
            epoch_loss += batch_loss;
        }
        let train_loss = epoch_loss / train_windows.len() as f64;
        let val_loss = if val_windows.is_empty() {
            None
        } else {
            Some(one_step_loss(model, &params, &val_windows)?.to_f64_lossy())
        };
        let score = val_loss.unwrap_or(train_loss);
        if !score.is_finite() {
            return Err(Error::EarlyNaN { epoch, batch: 0 });
        }
        if score < best.0 {
            best = (score, epoch, params.clone());
        }
        let record = EpochRecord {
            epoch,
            lr,
            train_loss,
            val_loss,
        };
        log::info!(
            "epoch {epoch:4} lr {lr:.3e} train {train_loss:.4e} val {}",
            val_loss.map_or("-".into(), |v| format!("{v:.4e}"))
        );
        on_epoch(&record);
        history.push(record);
    }
    Ok(TrainOutcome {
        best: best.2,
        best_epoch: best.1,
        last: params,
        history,
    })
}
