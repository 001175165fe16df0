//! `key = value` run configuration with `#` comments.
//!
//! A `preset` selects architecture and training defaults; every other key
//! overrides one field. Keys may appear in any order and the last occurrence
//! of a repeated key wins.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;
use waveformer_core::model::{Activation, Example, ModelConfig, ModelKind};
use waveformer_core::training::TrainConfig;
use waveformer_core::wavelet::WaveletName;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("UnknownKey: `{key}` on line {line}")]
    UnknownKey { key: String, line: usize },
    #[error("BadValue: `{key} = {value}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("line {line} is not `key = value`: {text}")]
    Syntax { line: usize, text: String },
}

const MODEL_KEYS: &[&str] = &[
    "history", "d_v", "q_hidden", "wavelet", "levels", "n_enc", "n_dec", "d_model", "n_heads", "dim", "stride", "activation",
    "wno_layers",
];
const TRAIN_KEYS: &[&str] = &[
    "epochs", "batch_size", "lr", "weight_decay", "decay_factor", "decay_interval", "seed", "horizon", "clip_norm", "val_fraction",
];
pub const PRESETS: &[&str] = &["burgers", "ks", "allen-cahn", "navier-stokes", "desk-burgers", "toy"];

/// Resolved model and training settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub warnings: Vec<String>,
}

/// Table-style defaults for `preset` and `kind`.
pub fn preset(name: &str, kind: ModelKind) -> Result<(ModelConfig, TrainConfig), ConfigError> {
    let bad = || ConfigError::BadValue {
        key: "preset".into(),
        value: name.into(),
        reason: format!("expected one of {}", PRESETS.join(", ")),
    };
    let train = TrainConfig::default();
    match name {
        "desk-burgers" => {
            let mut m = ModelConfig::preset(kind, Example::Burgers);
            m.history = 10;
            m.q_hidden = 64;
            m.stride = 2;
            (m.d_v, m.d_model) = match kind {
                ModelKind::Waveformer | ModelKind::Wno => (32, 32),
                // Physical branch only: wider to match the waveformer parameter count.
                ModelKind::Transformer => (DESK_TRANSFORMER_WIDTH, DESK_TRANSFORMER_WIDTH),
            };
            let t = TrainConfig {
                epochs: 100,
                horizon: Some(20),
                ..train
            };
            Ok((m, t))
        }
        "toy" => {
            let mut m = ModelConfig::preset(kind, Example::Burgers);
            m.history = 4;
            m.d_v = 8;
            m.d_model = 8;
            m.q_hidden = 8;
            m.levels = 2;
            m.wavelet = WaveletName::Db4;
            m.stride = 4;
            m.n_dec = 1;
            m.wno_layers = 2;
            let t = TrainConfig {
                epochs: 2,
                horizon: Some(8),
                ..train
            };
            Ok((m, t))
        }
        other => {
            let example = Example::from_str(other).map_err(|_| bad())?;
            let (batch_size, horizon) = match example {
                Example::Burgers => (5, 60),
                Example::Ks => (2, 60),
                Example::AllenCahn => (5, 25),
                Example::NavierStokes => (10, 21),
            };
            let t = TrainConfig {
                batch_size,
                horizon: Some(horizon),
                ..train
            };
            Ok((ModelConfig::preset(kind, example), t))
        }
    }
}

const DESK_TRANSFORMER_WIDTH: usize = 46;

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V, ConfigError>
where
    V::Err: std::fmt::Display,
{
    value.parse::<V>().map_err(|e| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn positive(key: &str, value: &str) -> Result<usize, ConfigError> {
    match parse::<usize>(key, value)? {
        0 => Err(ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
            reason: "must be at least 1".into(),
        }),
        v => Ok(v),
    }
}

fn optional<V: FromStr>(key: &str, value: &str) -> Result<Option<V>, ConfigError>
where
    V::Err: std::fmt::Display,
{
    if value.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn apply(m: &mut ModelConfig, t: &mut TrainConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "history" => m.history = positive(key, value)?,
        "d_v" => m.d_v = positive(key, value)?,
        "q_hidden" => m.q_hidden = positive(key, value)?,
        "wavelet" => m.wavelet = parse(key, value)?,
        "levels" => m.levels = positive(key, value)?,
        "n_enc" => m.n_enc = positive(key, value)?,
        "n_dec" => m.n_dec = positive(key, value)?,
        "d_model" => m.d_model = positive(key, value)?,
        "n_heads" => m.n_heads = positive(key, value)?,
        "dim" => m.dim = positive(key, value)?,
        "stride" => m.stride = positive(key, value)?,
        "activation" => m.activation = parse::<Activation>(key, value)?,
        "wno_layers" => m.wno_layers = positive(key, value)?,
        "epochs" => t.epochs = positive(key, value)?,
        "batch_size" => t.batch_size = positive(key, value)?,
        "lr" => t.lr = parse(key, value)?,
        "weight_decay" => t.weight_decay = parse(key, value)?,
        "decay_factor" => t.decay_factor = parse(key, value)?,
        "decay_interval" => t.decay_interval = positive(key, value)?,
        "seed" => t.seed = parse(key, value)?,
        "horizon" => t.horizon = optional(key, value)?,
        "clip_norm" => t.clip_norm = optional(key, value)?,
        "val_fraction" => t.val_fraction = parse(key, value)?,
        _ => unreachable!("keys are checked before applying"),
    }
    Ok(())
}

/// Parses config text. `kind` from the command line takes precedence over a `model` key.
pub fn parse_config(text: &str, kind: Option<ModelKind>) -> Result<RunConfig, ConfigError> {
    let mut entries: Vec<(String, String, usize)> = Vec::new();
    let mut warnings = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        let (k, v) = (k.trim().to_ascii_lowercase(), v.trim().to_string());
        if k != "preset" && k != "model" && !MODEL_KEYS.contains(&k.as_str()) && !TRAIN_KEYS.contains(&k.as_str()) {
            return Err(ConfigError::UnknownKey { key: k, line: i + 1 });
        }
        if let Some(prev) = entries.iter().position(|(pk, _, _)| *pk == k) {
            warnings.push(format!(
                "`{k}` set on line {} and again on line {}; using `{v}`",
                entries[prev].2,
                i + 1
            ));
            entries.remove(prev);
        }
        entries.push((k, v, i + 1));
    }
    let get = |key: &str| entries.iter().find(|(k, _, _)| k == key).map(|(_, v, _)| v.as_str());
    let file_kind = get("model").map(|v| parse::<ModelKind>("model", v)).transpose()?;
    if let (Some(cli), Some(file)) = (kind, file_kind) {
        if cli != file {
            warnings.push(format!("config says model = {file}, command line says {cli}; using {cli}"));
        }
    }
    let kind = kind.or(file_kind).unwrap_or(ModelKind::Waveformer);
    let preset_name = get("preset").unwrap_or("burgers").to_ascii_lowercase();
    let (mut model, mut train) = preset(&preset_name, kind)?;
    for (k, v, _) in &entries {
        if k != "preset" && k != "model" {
            apply(&mut model, &mut train, k, v)?;
        }
    }
    let invalid = |e: waveformer_core::Error| ConfigError::BadValue {
        key: "config".into(),
        value: preset_name.clone(),
        reason: e.to_string(),
    };
    model.validate().map_err(invalid)?;
    train.validate().map_err(invalid)?;
    Ok(RunConfig {
        preset: preset_name,
        model,
        train,
        warnings,
    })
}

impl RunConfig {
    /// Canonical text listing every key; parsing it reproduces this config.
    pub fn to_text(&self) -> String {
        let (m, t) = (&self.model, &self.train);
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        let mut s = String::new();
        let _ = writeln!(s, "preset = {}", self.preset);
        let _ = writeln!(s, "model = {}", m.kind);
        for (k, v) in [
            ("history", m.history.to_string()),
            ("d_v", m.d_v.to_string()),
            ("q_hidden", m.q_hidden.to_string()),
            ("wavelet", m.wavelet.to_string()),
            ("levels", m.levels.to_string()),
            ("n_enc", m.n_enc.to_string()),
            ("n_dec", m.n_dec.to_string()),
            ("d_model", m.d_model.to_string()),
            ("n_heads", m.n_heads.to_string()),
            ("dim", m.dim.to_string()),
            ("stride", m.stride.to_string()),
            ("activation", m.activation.to_string()),
            ("wno_layers", m.wno_layers.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("lr", format!("{:?}", t.lr)),
            ("weight_decay", format!("{:?}", t.weight_decay)),
            ("decay_factor", format!("{:?}", t.decay_factor)),
            ("decay_interval", t.decay_interval.to_string()),
            ("seed", t.seed.to_string()),
            ("horizon", opt(t.horizon.map(|h| h.to_string()))),
            ("clip_norm", opt(t.clip_norm.map(|c| format!("{c:?}")))),
            ("val_fraction", format!("{:?}", t.val_fraction)),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_burgers_preset_uses_table_defaults() {
        let c = parse_config("preset = burgers\n", None).unwrap();
        let m = &c.model;
        assert_eq!((m.d_v, m.q_hidden, m.levels, m.n_enc, m.n_dec), (80, 128, 3, 1, 2));
        assert_eq!(m.wavelet, WaveletName::Db6);
        assert_eq!(c.train.batch_size, 5);
        assert_eq!(parse_config("", None).unwrap(), c);
    }

    #[test]
    fn zero_levels_is_a_bad_value() {
        assert!(matches!(
            parse_config("levels = 0", None),
            Err(ConfigError::BadValue { key, .. }) if key == "levels"
        ));
    }

    #[test]
    fn unknown_keys_and_syntax_errors() {
        assert_eq!(
            parse_config("# comment\nd_vv = 3", None),
            Err(ConfigError::UnknownKey {
                key: "d_vv".into(),
                line: 2
            })
        );
        assert!(matches!(parse_config("levels 3", None), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config("preset = huge", None), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn duplicate_key_last_wins_with_warning() {
        let c = parse_config("d_v = 16\nlevels = 2 # trailing comment\nd_v = 24\n", None).unwrap();
        assert_eq!(c.model.d_v, 24);
        assert_eq!(c.model.levels, 2);
        assert_eq!(c.warnings.len(), 1);
        assert!(c.warnings[0].contains("d_v"));
    }

    #[test]
    fn command_line_kind_wins() {
        let c = parse_config("model = wno\npreset = desk-burgers", Some(ModelKind::Transformer)).unwrap();
        assert_eq!(c.model.kind, ModelKind::Transformer);
        assert_eq!(c.warnings.len(), 1);
        assert_eq!(parse_config("model = wno", None).unwrap().model.kind, ModelKind::Wno);
    }

    #[test]
    fn canonical_text_round_trips() {
        for p in PRESETS {
            for kind in ModelKind::ALL {
                let c = parse_config(&format!("preset = {p}\nhorizon = none\nlr = 3e-4"), Some(kind)).unwrap();
                let again = parse_config(&c.to_text(), None).unwrap();
                assert_eq!((&again.model, &again.train), (&c.model, &c.train), "{p}/{kind}");
            }
        }
    }

    #[test]
    fn desk_preset_matches_acceptance_setup() {
        let c = parse_config("preset = desk-burgers", None).unwrap();
        assert_eq!((c.model.history, c.train.epochs, c.train.batch_size, c.train.lr), (10, 100, 5, 1e-3));
        assert_eq!((c.train.decay_factor, c.train.decay_interval), (0.75, 20));
    }

    #[test]
    fn desk_transformer_has_a_matched_parameter_budget() {
        use waveformer_core::model::Network;
        let count = |kind| {
            let c = parse_config("preset = desk-burgers", Some(kind)).unwrap();
            Network::<f64>::new(c.model).unwrap().init_params(0).scalar_count() as f64
        };
        let ratio = count(ModelKind::Transformer) / count(ModelKind::Waveformer);
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }
}
