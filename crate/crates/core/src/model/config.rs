use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tape, Var};
use crate::wavelet::WaveletName;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Waveformer,
    Wno,
    Transformer,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [Self::Waveformer, Self::Wno, Self::Transformer];
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Waveformer => "waveformer",
            Self::Wno => "wno",
            Self::Transformer => "transformer",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model kind '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Gelu,
    Relu,
}

impl Activation {
    pub fn apply<T: Scalar>(self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        match self {
            Self::Gelu => tape.gelu(x),
            Self::Relu => tape.relu(x),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gelu => "gelu",
            Self::Relu => "relu",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gelu" => Ok(Self::Gelu),
            "relu" => Ok(Self::Relu),
            _ => Err(Error::InvalidConfig(format!("unknown activation '{s}'"))),
        }
    }
}

/// The four benchmark problems, used to select architecture defaults.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Example {
    Burgers,
    Ks,
    AllenCahn,
    NavierStokes,
}

impl Example {
    pub const ALL: [Example; 4] = [Self::Burgers, Self::Ks, Self::AllenCahn, Self::NavierStokes];

    pub fn dim(self) -> usize {
        match self {
            Self::Burgers | Self::Ks => 1,
            Self::AllenCahn | Self::NavierStokes => 2,
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Burgers => "burgers",
            Self::Ks => "ks",
            Self::AllenCahn => "allen-cahn",
            Self::NavierStokes => "navier-stokes",
        })
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown example '{s}'")))
    }
}

/// Architecture hyperparameters shared by all three model kinds.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Frames per stream (k).
    pub history: usize,
    /// Lifted channel width (d_v).
    pub d_v: usize,
    /// Hidden width of the projection Q.
    pub q_hidden: usize,
    pub wavelet: WaveletName,
    pub levels: usize,
    pub n_enc: usize,
    pub n_dec: usize,
    pub d_model: usize,
    pub n_heads: usize,
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
    /// Physical-branch token stride along each axis.
    pub stride: usize,
    pub activation: Activation,
    /// Wavelet integral layers (WNO only).
    pub wno_layers: usize,
}

impl ModelConfig {
    /// Published architecture for `kind` on `example`.
    pub fn preset(kind: ModelKind, example: Example) -> Self {
        let dim = example.dim();
        let (history, levels, d_v, wavelet) = match example {
            Example::Burgers => (51, 3, 80, WaveletName::Db6),
            Example::Ks => (51, 3, 80, WaveletName::Db4),
            Example::AllenCahn => (10, 4, 40, WaveletName::Db4),
            Example::NavierStokes => (14, 4, 40, WaveletName::Db4),
        };
        let mut cfg = Self {
            kind,
            history,
            d_v,
            q_hidden: 128,
            wavelet,
            levels,
            n_enc: 1,
            n_dec: 2,
            d_model: d_v,
            n_heads: 2,
            dim,
            stride: if dim == 1 { 1 } else { 4 },
            activation: Activation::Gelu,
            wno_layers: if dim == 1 { 3 } else { 4 },
        };
        match kind {
            ModelKind::Waveformer => {}
            ModelKind::Wno => {
                cfg.levels = 3;
                cfg.wavelet = if dim == 1 { WaveletName::Db6 } else { WaveletName::Db4 };
            }
            ModelKind::Transformer => {
                cfg.d_v = if example == Example::NavierStokes { 40 } else { 32 };
                cfg.d_model = cfg.d_v;
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.history == 0 {
            return bad("history must be at least 1".into());
        }
        if self.d_v == 0 || self.q_hidden == 0 || self.d_model == 0 {
            return bad("widths must be positive".into());
        }
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        if self.n_enc == 0 || self.n_dec == 0 {
            return bad("encoder and decoder block counts must be at least 1".into());
        }
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return bad(format!("d_model {} not divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.d_model % 2 != 0 && self.kind != ModelKind::Wno {
            return bad(format!("d_model {} must be even for the positional encoding", self.d_model));
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        if self.dim != 1 && self.dim != 2 {
            return bad(format!("dim must be 1 or 2, got {}", self.dim));
        }
        if self.wno_layers == 0 {
            return bad("wno_layers must be at least 1".into());
        }
        Ok(())
    }
}
