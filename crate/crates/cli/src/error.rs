use std::fmt;

use crate::config::ConfigError;
use crate::format::FormatError;

/// Failure class of a command; each maps to one process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Class {
    Usage,
    Io,
    Numeric,
}

impl Class {
    pub fn exit_code(self) -> i32 {
        match self {
            Class::Usage => 1,
            Class::Io => 2,
            Class::Numeric => 3,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub class: Class,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self {
            class: Class::Usage,
            message: msg.into(),
        }
    }

    pub fn io(msg: impl Into<String>) -> Self {
        Self {
            class: Class::Io,
            message: msg.into(),
        }
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Self {
            class: Class::Numeric,
            message: msg.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class.exit_code()
    }

    /// Prefixes the message with `context` (usually a file name).
    pub fn context(mut self, context: impl fmt::Display) -> Self {
        self.message = format!("{context}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Diagnostics are a single line.
        write!(f, "{}", self.message.replace('\n', " "))
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        Self::io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<waveformer_core::Error> for CliError {
    fn from(e: waveformer_core::Error) -> Self {
        use waveformer_core::Error as E;
        let class = match &e {
            E::InvalidConfig(_) | E::UnknownWavelet(_) | E::BadLength { .. } | E::OddWidth(_) => Class::Usage,
            E::ShapeMismatch { .. }
            | E::Misaligned(_)
            | E::TooShort { .. }
            | E::MissingParam(_)
            | E::DuplicateParam(_)
            | E::NotScalar(_)
            | E::DetachedRoot => Class::Io,
            E::NonFinite { .. } | E::ZeroReference | E::EarlyNaN { .. } | E::RolloutDiverged { .. } => Class::Numeric,
        };
        let name = match &e {
            E::ShapeMismatch { .. } => "Misaligned",
            E::Misaligned(_) => "Misaligned",
            E::TooShort { .. } => "TooShort",
            E::NonFinite { .. } => "NonFinite",
            E::ZeroReference => "ZeroReference",
            E::EarlyNaN { .. } => "EarlyNaN",
            E::RolloutDiverged { .. } => "RolloutDiverged",
            E::BadLength { .. } => "BadLength",
            E::UnknownWavelet(_) => "UnknownWavelet",
            _ => "error",
        };
        Self {
            class,
            message: format!("{name}: {e}"),
        }
    }
}

impl From<waveformer_pde::Error> for CliError {
    fn from(e: waveformer_pde::Error) -> Self {
        use waveformer_pde::Error as E;
        match e {
            E::Core(inner) => inner.into(),
            E::Unstable { .. } => Self::numeric(format!("Unstable: {e}")),
            E::DegenerateField => Self::numeric(format!("DegenerateField: {e}")),
            E::BadLength(_) => Self::usage(format!("BadLength: {e}")),
            E::InvalidConfig(_) => Self::usage(e.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_class() {
        let e: CliError = waveformer_core::Error::Misaligned("x".into()).into();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().starts_with("Misaligned"));
        let e: CliError = waveformer_core::Error::RolloutDiverged { step: 4 }.into();
        assert_eq!(e.exit_code(), 3);
        let e: CliError = waveformer_core::Error::InvalidConfig("x".into()).into();
        assert_eq!(e.exit_code(), 1);
        assert_eq!(CliError::io("a\nb").to_string(), "a b");
    }
}
