//! Autoregressive prediction and trained/extrapolated error reports.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Network, ParamStore, StreamPair};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::training::sample_relative_mse;

/// Maps a stream pair to the next frame.
pub trait Predictor<T: Scalar> {
    fn history(&self) -> usize;
    fn predict(&self, pair: &StreamPair<T>) -> Result<Tensor<T>>;
}

/// A network together with its parameters.
pub struct Trained<'a, T> {
    pub network: &'a Network<T>,
    pub params: &'a ParamStore<T>,
}

impl<T: Scalar> Predictor<T> for Trained<'_, T> {
    fn history(&self) -> usize {
        self.network.history()
    }

    fn predict(&self, pair: &StreamPair<T>) -> Result<Tensor<T>> {
        self.network.predict(self.params, pair)
    }
}

/// The last `k + 1` frames seen or predicted.
#[derive(Clone, Debug)]
pub struct RolloutWindow<T> {
    frames: VecDeque<Tensor<T>>,
    step: usize,
}

impl<T: Scalar> RolloutWindow<T> {
    /// Starts from a `[k + 1, spatial...]` history.
    pub fn new(history: &Tensor<T>) -> Result<Self> {
        let shape = history.shape();
        if shape.len() < 2 || shape[0] < 2 {
            return Err(Error::shape("rollout history", shape, &[]));
        }
        let f = history.len() / shape[0];
        let frames = history
            .data()
            .chunks(f)
            .map(|c| Tensor::new(shape[1..].to_vec(), c.to_vec()))
            .collect::<Result<_>>()?;
        Ok(Self { frames, step: 0 })
    }

    pub fn frames(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.frames.iter()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Predictions made so far.
    pub fn step(&self) -> usize {
        self.step
    }

    /// Drops the oldest frame and appends `next`.
    pub fn push(&mut self, next: Tensor<T>) -> Result<()> {
        if next.shape() != self.frames[0].shape() {
            return Err(Error::shape("rollout push", next.shape(), self.frames[0].shape()));
        }
        self.frames.pop_front();
        self.frames.push_back(next);
        self.step += 1;
        Ok(())
    }

    pub fn as_tensor(&self) -> Tensor<T> {
        let mut shape = vec![self.frames.len()];
        shape.extend_from_slice(self.frames[0].shape());
        let data = self.frames.iter().flat_map(|f| f.data().iter().copied()).collect();
        Tensor::new(shape, data).expect("frames share one shape")
    }

    pub fn stream_pair(&self) -> Result<StreamPair<T>> {
        StreamPair::from_window(&self.as_tensor())
    }
}

/// Predicts `steps` frames after `history` (`[k + 1, spatial...]`), feeding
/// each prediction back into the window. Returns `[steps, spatial...]`.
pub fn rollout<T: Scalar, P: Predictor<T>>(model: &P, history: &Tensor<T>, steps: usize) -> Result<Tensor<T>> {
    rollout_observed(model, history, steps, |_| {})
}

/// [`rollout`] that shows `observe` the window before every prediction and once after the last.
pub fn rollout_observed<T: Scalar, P: Predictor<T>>(
    model: &P,
    history: &Tensor<T>,
    steps: usize,
    mut observe: impl FnMut(&RolloutWindow<T>),
) -> Result<Tensor<T>> {
    if steps == 0 {
        return Err(Error::InvalidConfig("rollout needs at least one step".into()));
    }
    if history.shape().first() != Some(&(model.history() + 1)) {
        return Err(Error::shape("rollout history", history.shape(), &[model.history() + 1]));
    }
    let mut window = RolloutWindow::new(history)?;
    let mut out = Vec::with_capacity(steps * (history.len() / history.shape()[0]));
    for step in 0..steps {
        observe(&window);
        let next = model
            .predict(&window.stream_pair()?)
            .map_err(|e| match e {
                Error::NonFinite { .. } => Error::RolloutDiverged { step },
                other => other,
            })?;
        if !next.is_finite() {
            return Err(Error::RolloutDiverged { step });
        }
        out.extend_from_slice(next.data());
        window.push(next)?;
    }
    observe(&window);
    let mut shape = vec![steps];
    shape.extend_from_slice(&history.shape()[1..]);
    Tensor::new(shape, out)
}

/// Per-step error series split at `boundary`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionReport {
    pub per_step: Vec<f64>,
    pub boundary: usize,
    /// Mean over steps `< boundary`; `None` when that range is empty.
    pub trained: Option<f64>,
    /// Mean over steps `>= boundary`; `None` when that range is empty.
    pub extrapolated: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl RegionReport {
    pub fn from_series(per_step: Vec<f64>, boundary: usize) -> Self {
        let b = boundary.min(per_step.len());
        Self {
            trained: mean(&per_step[..b]),
            extrapolated: mean(&per_step[b..]),
            per_step,
            boundary,
        }
    }

    pub fn overall(&self) -> Option<f64> {
        mean(&self.per_step)
    }

    pub fn region(&self, step: usize) -> &'static str {
        if step < self.boundary {
            "trained"
        } else {
            "extrapolated"
        }
    }

    /// Rows `step,model,relative_mse,region`, with header.
    pub fn to_csv(&self, model: &str) -> String {
        let mut s = String::from("step,model,relative_mse,region\n");
        for (i, e) in self.per_step.iter().enumerate() {
            let _ = writeln!(s, "{i},{model},{e:.17e},{}", self.region(i));
        }
        s
    }
}

/// Per-step relative MSE between predicted and true `[steps, spatial...]`
/// blocks, averaged over samples, each step normalized by its own truth.
pub fn evaluate<T: Scalar>(predictions: &[Tensor<T>], truth: &[Tensor<T>], boundary: usize) -> Result<RegionReport> {
    if predictions.len() != truth.len() || predictions.is_empty() {
        return Err(Error::Misaligned(format!(
            "{} predicted samples vs {} true samples",
            predictions.len(),
            truth.len()
        )));
    }
    let steps = predictions[0].shape()[0];
    let mut per_step = vec![0.0; steps];
    for (p, t) in predictions.iter().zip(truth) {
        if p.shape() != t.shape() || p.shape()[0] != steps {
            return Err(Error::Misaligned(format!("shapes {:?} and {:?}", p.shape(), t.shape())));
        }
        let f = p.len() / steps;
        for (s, acc) in per_step.iter_mut().enumerate() {
            let frame = |x: &Tensor<T>| Tensor::new(vec![f], x.data()[s * f..(s + 1) * f].to_vec());
            *acc += sample_relative_mse(&frame(p)?, &frame(t)?)?.to_f64_lossy();
        }
    }
    let n = predictions.len() as f64;
    Ok(RegionReport::from_series(per_step.into_iter().map(|e| e / n).collect(), boundary))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Winner {
    Model(String),
    Tie(Vec<String>),
    /// No model has data in this region.
    Empty,
}

impl std::fmt::Display for Winner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Model(m) => f.write_str(m),
            Self::Tie(ms) => write!(f, "tie({})", ms.join("|")),
            Self::Empty => f.write_str("-"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub models: Vec<String>,
    pub reports: Vec<RegionReport>,
    pub trained: Winner,
    pub extrapolated: Winner,
}

fn winner(models: &[String], values: &[Option<f64>]) -> Winner {
    let best = values.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Winner::Empty;
    }
    let at: Vec<String> = models
        .iter()
        .zip(values)
        .filter(|(_, v)| **v == Some(best))
        .map(|(m, _)| m.clone())
        .collect();
    if at.len() == 1 {
        Winner::Model(at.into_iter().next().expect("one element"))
    } else {
        Winner::Tie(at)
    }
}

/// Lowest error per region; exact equality is reported as a tie.
pub fn compare_models(reports: &[(String, RegionReport)]) -> Result<Comparison> {
    let first = &reports.first().ok_or_else(|| Error::Misaligned("no reports".into()))?.1;
    for (name, r) in reports {
        if r.per_step.len() != first.per_step.len() || r.boundary != first.boundary {
            return Err(Error::Misaligned(format!("report for {name} covers different steps or regions")));
        }
    }
    let models: Vec<String> = reports.iter().map(|(m, _)| m.clone()).collect();
    let trained: Vec<Option<f64>> = reports.iter().map(|(_, r)| r.trained).collect();
    let extrapolated: Vec<Option<f64>> = reports.iter().map(|(_, r)| r.extrapolated).collect();
    Ok(Comparison {
        trained: winner(&models, &trained),
        extrapolated: winner(&models, &extrapolated),
        reports: reports.iter().map(|(_, r)| r.clone()).collect(),
        models,
    })
}

impl Comparison {
    /// One row per region, one column per model, then the winner.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.17e}"));
        let mut s = format!("region,{},winner\n", self.models.join(","));
        let rows: [(&str, Vec<Option<f64>>, String); 3] = [
            ("trained", self.reports.iter().map(|r| r.trained).collect(), self.trained.to_string()),
            (
                "extrapolated",
                self.reports.iter().map(|r| r.extrapolated).collect(),
                self.extrapolated.to_string(),
            ),
            (
                "overall",
                self.reports.iter().map(RegionReport::overall).collect(),
                winner(&self.models, &self.reports.iter().map(RegionReport::overall).collect::<Vec<_>>()).to_string(),
            ),
        ];
        for (name, values, win) in rows {
            let cells: Vec<String> = values.into_iter().map(fmt).collect();
            let _ = writeln!(s, "{name},{},{win}", cells.join(","));
        }
        s
    }
}
