//! The two-branch operator and its WNO and transformer baselines.
//!
//! A window of `k + 1` frames is split into an encoder stream (frames `0..k`)
//! and a decoder stream (frames `1..k+1`). Both streams are lifted pointwise
//! by the same affine map `P` from `[k history values, grid coordinates]` to
//! `d_v` channels. The waveformer then runs
//!
//! ```text
//! v1 = wavelet_branch(v_enc, v_dec)
//! v2 = physical_branch(v_enc, v_dec)
//! u  = Q(act(v1 + v2))
//! ```
//!
//! where `Q` is the pointwise two-layer map `d_v -> q_hidden -> 1`.

mod config;
mod params;
mod waveformer;
mod wno;

use std::sync::Arc;

pub use config::{Activation, Example, ModelConfig, ModelKind};
pub use params::{Bound, ParamStore};
pub use waveformer::{physical_branch, physical_token_index, wavelet_branch};
pub use wno::wno_layer;

use crate::error::{Error, Result};
use crate::rng::{streams, RngStream};
use crate::scalar::Scalar;
use crate::tensor::{Tape, Tensor, Var};
use crate::wavelet::WaveletFilter;

/// Encoder and decoder history streams, each `[k, spatial...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamPair<T> {
    enc: Tensor<T>,
    dec: Tensor<T>,
}

impl<T: Scalar> StreamPair<T> {
    /// Checks that `dec` is `enc` shifted forward by one frame.
    pub fn new(enc: Tensor<T>, dec: Tensor<T>) -> Result<Self> {
        if enc.shape() != dec.shape() || enc.shape().len() < 2 {
            return Err(Error::shape("stream pair", enc.shape(), dec.shape()));
        }
        let frame = enc.len() / enc.shape()[0];
        if enc.data()[frame..] != dec.data()[..dec.len() - frame] {
            return Err(Error::Misaligned("decoder stream is not the encoder stream shifted by one frame".into()));
        }
        Ok(Self { enc, dec })
    }

    /// Splits a `[k + 1, spatial...]` window into its two streams.
    pub fn from_window(window: &Tensor<T>) -> Result<Self> {
        let shape = window.shape();
        if shape.len() < 2 || shape[0] < 2 {
            return Err(Error::shape("window", shape, &[]));
        }
        let k = shape[0] - 1;
        let frame = window.len() / shape[0];
        let mut s = shape.to_vec();
        s[0] = k;
        let enc = Tensor::new(s.clone(), window.data()[..k * frame].to_vec())?;
        let dec = Tensor::new(s, window.data()[frame..].to_vec())?;
        Ok(Self { enc, dec })
    }

    pub fn enc(&self) -> &Tensor<T> {
        &self.enc
    }

    pub fn dec(&self) -> &Tensor<T> {
        &self.dec
    }

    pub fn history(&self) -> usize {
        self.enc.shape()[0]
    }

    pub fn spatial(&self) -> &[usize] {
        &self.enc.shape()[1..]
    }
}

/// Model architecture plus cached filter; parameters live in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Network<T> {
    config: ModelConfig,
    filter: Arc<WaveletFilter<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let filter = Arc::new(WaveletFilter::new(config.wavelet));
        Ok(Self { config, filter })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn filter(&self) -> &Arc<WaveletFilter<T>> {
        &self.filter
    }

    pub fn history(&self) -> usize {
        self.config.history
    }

    /// Scaled-uniform weights, zero biases, zero attention output and branch unembedding.
    pub fn init_params(&self, seed: u64) -> ParamStore<T> {
        let mut rng = RngStream::new(seed, streams::MODEL_INIT);
        let mut s = ParamStore::new();
        self.try_init(&mut s, &mut rng).expect("parameter names are unique by construction");
        s
    }

    fn try_init(&self, s: &mut ParamStore<T>, rng: &mut RngStream) -> Result<()> {
        let c = &self.config;
        let n_in = c.history + c.dim;
        s.insert_uniform("lift.w", &[n_in, c.d_v], n_in, rng)?;
        s.insert_zeros("lift.b", &[c.d_v])?;
        match c.kind {
            ModelKind::Waveformer => {
                waveformer::init_branch(s, "wavelet", c, rng)?;
                waveformer::init_branch(s, "physical", c, rng)?;
            }
            ModelKind::Transformer => waveformer::init_branch(s, "physical", c, rng)?,
            ModelKind::Wno => {
                for l in 0..c.wno_layers {
                    wno::init_layer(s, &format!("wno.{l}"), c.d_v, rng)?;
                }
            }
        }
        s.insert_uniform("proj.w1", &[c.d_v, c.q_hidden], c.d_v, rng)?;
        s.insert_zeros("proj.b1", &[c.q_hidden])?;
        s.insert_uniform("proj.w2", &[c.q_hidden, 1], c.q_hidden, rng)?;
        s.insert_zeros("proj.b2", &[1])
    }

    fn check_pair(&self, pair: &StreamPair<T>) -> Result<()> {
        if pair.history() != self.config.history || pair.spatial().len() != self.config.dim {
            return Err(Error::shape(
                "model input",
                pair.enc().shape(),
                &[self.config.history, self.config.dim],
            ));
        }
        Ok(())
    }

    /// Per-point features `[N, k + dim]`: the stream values then coordinates in `[0, 1)`.
    pub fn features(&self, stream: &Tensor<T>) -> Tensor<T> {
        let k = stream.shape()[0];
        let spatial = &stream.shape()[1..];
        let n: usize = spatial.iter().product();
        let width = k + spatial.len();
        Tensor::from_fn(&[n, width], |i| {
            let (p, c) = (i / width, i % width);
            if c < k {
                return stream.data()[c * n + p];
            }
            let axis = c - k;
            let stride: usize = spatial[axis + 1..].iter().product();
            let idx = (p / stride) % spatial[axis];
            T::from_usize_lossy(idx) / T::from_usize_lossy(spatial[axis])
        })
    }

    /// Pointwise affine lift of one stream to `[N, d_v]`.
    pub fn lift(&self, tape: &mut Tape<T>, bound: &Bound, stream: &Tensor<T>) -> Result<Var> {
        let x = tape.constant(self.features(stream));
        let y = tape.matmul(x, bound.get("lift.w")?)?;
        tape.add(y, bound.get("lift.b")?)
    }

    /// Pointwise `d_v -> q_hidden -> 1` map, returned as `[N, 1]`.
    pub fn project(&self, tape: &mut Tape<T>, bound: &Bound, h: Var) -> Result<Var> {
        let y = tape.matmul(h, bound.get("proj.w1")?)?;
        let y = tape.add(y, bound.get("proj.b1")?)?;
        let y = self.config.activation.apply(tape, y)?;
        let y = tape.matmul(y, bound.get("proj.w2")?)?;
        tape.add(y, bound.get("proj.b2")?)
    }

    /// Next-frame prediction with the spatial shape of the input streams.
    pub fn forward(&self, tape: &mut Tape<T>, bound: &Bound, pair: &StreamPair<T>) -> Result<Var> {
        match self.config.kind {
            ModelKind::Waveformer => self.forward_parts(tape, bound, pair, true, true),
            ModelKind::Transformer => self.forward_parts(tape, bound, pair, false, true),
            ModelKind::Wno => self.forward_wno(tape, bound, pair),
        }
    }

    /// Two-branch forward with either branch switched off. At least one must be on.
    pub fn forward_parts(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        pair: &StreamPair<T>,
        use_wavelet: bool,
        use_physical: bool,
    ) -> Result<Var> {
        self.check_pair(pair)?;
        let v_enc = self.lift(tape, bound, pair.enc())?;
        let v_dec = self.lift(tape, bound, pair.dec())?;
        let spatial = pair.spatial();
        let mut parts = Vec::new();
        if use_wavelet {
            parts.push(wavelet_branch(tape, bound, "wavelet", &self.config, &self.filter, v_enc, v_dec, spatial)?);
        }
        if use_physical {
            parts.push(physical_branch(tape, bound, "physical", &self.config, v_enc, v_dec, spatial)?);
        }
        let mut h = *parts
            .first()
            .ok_or_else(|| Error::InvalidConfig("no branch enabled".into()))?;
        for &p in &parts[1..] {
            h = tape.add(h, p)?;
        }
        let h = self.config.activation.apply(tape, h)?;
        let u = self.project(tape, bound, h)?;
        tape.reshape(u, spatial)
    }

    fn forward_wno(&self, tape: &mut Tape<T>, bound: &Bound, pair: &StreamPair<T>) -> Result<Var> {
        self.check_pair(pair)?;
        let spatial = pair.spatial();
        let mut v = self.lift(tape, bound, pair.dec())?;
        for l in 0..self.config.wno_layers {
            let last = l + 1 == self.config.wno_layers;
            v = wno_layer(tape, bound, &format!("wno.{l}"), &self.config, &self.filter, v, spatial, !last)?;
        }
        let u = self.project(tape, bound, v)?;
        tape.reshape(u, spatial)
    }

    /// Inference on a frozen tape.
    pub fn predict(&self, params: &ParamStore<T>, pair: &StreamPair<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let bound = params.bind_frozen(&mut tape);
        let out = self.forward(&mut tape, &bound, pair)?;
        Ok(tape.value(out).clone())
    }
}

#[cfg(test)]
mod tests;
