//! Trajectory collections and one-step training windows.

use crate::error::{Error, Result};
use crate::model::StreamPair;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// A batch of solutions `[sample][time][space...]` with generation metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset<T = f64> {
    pub pde: String,
    pub spatial: Vec<usize>,
    pub samples: usize,
    pub time: usize,
    /// Seconds between stored frames.
    pub dt: f64,
    /// Ordered `key=value` metadata (solver parameters, boundary condition, resampling).
    pub params: Vec<(String, String)>,
    pub paper_scale: bool,
    pub seed: u64,
    pub data: Vec<T>,
}

impl<T: Scalar> TrajectoryDataset<T> {
    pub fn new(pde: impl Into<String>, spatial: Vec<usize>, samples: usize, time: usize, dt: f64, data: Vec<T>) -> Result<Self> {
        let frame: usize = spatial.iter().product();
        if data.len() != samples * time * frame || spatial.is_empty() {
            return Err(Error::shape("dataset", &[data.len()], &[samples, time, frame]));
        }
        Ok(Self {
            pde: pde.into(),
            spatial,
            samples,
            time,
            dt,
            params: Vec::new(),
            paper_scale: false,
            seed: 0,
            data,
        })
    }

    pub fn frame_len(&self) -> usize {
        self.spatial.iter().product()
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn set_param(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.params.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.params.push((key, value)),
        }
    }

    /// Sample `i` as a `[time, spatial...]` tensor.
    pub fn trajectory(&self, i: usize) -> Tensor<T> {
        let len = self.time * self.frame_len();
        let mut shape = vec![self.time];
        shape.extend_from_slice(&self.spatial);
        Tensor::new(shape, self.data[i * len..(i + 1) * len].to_vec()).expect("length checked at construction")
    }

    /// Frames `start..start+len` of sample `i`.
    pub fn frames(&self, i: usize, start: usize, len: usize) -> Result<Tensor<T>> {
        if i >= self.samples || start + len > self.time {
            return Err(Error::TooShort {
                time: self.time,
                needed: start + len,
            });
        }
        let f = self.frame_len();
        let base = (i * self.time + start) * f;
        let mut shape = vec![len];
        shape.extend_from_slice(&self.spatial);
        Tensor::new(shape, self.data[base..base + len * f].to_vec())
    }

    /// Samples `range` as a new dataset with the same metadata.
    pub fn subset(&self, range: std::ops::Range<usize>) -> Self {
        let len = self.time * self.frame_len();
        Self {
            samples: range.len(),
            data: self.data[range.start * len..range.end * len].to_vec(),
            ..self.clone()
        }
    }

    pub fn cast<U: Scalar>(&self) -> TrajectoryDataset<U> {
        TrajectoryDataset {
            pde: self.pde.clone(),
            spatial: self.spatial.clone(),
            samples: self.samples,
            time: self.time,
            dt: self.dt,
            params: self.params.clone(),
            paper_scale: self.paper_scale,
            seed: self.seed,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

/// One training pair: streams from frames `start..=start+k`, target frame `start+k+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Window<T> {
    pub start: usize,
    pub pair: StreamPair<T>,
    pub target: Tensor<T>,
}

/// Every sliding window of a `[time, spatial...]` trajectory.
pub fn make_windows<T: Scalar>(trajectory: &Tensor<T>, k: usize) -> Result<Vec<Window<T>>> {
    let time = trajectory.shape().first().copied().unwrap_or(0);
    make_windows_until(trajectory, k, time)
}

/// Windows whose target index is below `end`.
pub fn make_windows_until<T: Scalar>(trajectory: &Tensor<T>, k: usize, end: usize) -> Result<Vec<Window<T>>> {
    let shape = trajectory.shape();
    if shape.len() < 2 {
        return Err(Error::shape("trajectory", shape, &[]));
    }
    let time = shape[0];
    let end = end.min(time);
    if k == 0 || end < k + 2 {
        return Err(Error::TooShort { time: end, needed: k + 2 });
    }
    let f = trajectory.len() / time;
    let frame_shape = shape[1..].to_vec();
    let mut window_shape = vec![k + 1];
    window_shape.extend_from_slice(&frame_shape);
    let data = trajectory.data();
    (0..end - k - 1)
        .map(|t| {
            let w = Tensor::new(window_shape.clone(), data[t * f..(t + k + 1) * f].to_vec())?;
            let target = Tensor::new(frame_shape.clone(), data[(t + k + 1) * f..(t + k + 2) * f].to_vec())?;
            Ok(Window {
                start: t,
                pair: StreamPair::from_window(&w)?,
                target,
            })
        })
        .collect()
}
