use thiserror::Error;

use crate::approx::ApproxError;
use crate::compiler::CompileError;
use crate::model::ModelError;
use crate::mpc::MpcError;
use crate::polyalg::PolyError;

/// Process exit codes used by the command-line tool.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const EXPANSION_TOO_LARGE: i32 = 3;
    pub const FIELD_OVERFLOW: i32 = 4;
    pub const FINGERPRINT_MISMATCH: i32 = 5;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use exit_code::*;
        match self {
            Error::Model(ModelError::Io(_)) => OTHER,
            Error::Model(_) | Error::Approx(_) | Error::Config(_) => VALIDATION,
            Error::Poly(p) if p.is_expansion_limit() => EXPANSION_TOO_LARGE,
            Error::Poly(_) => VALIDATION,
            Error::Compile(c) if c.is_expansion_limit() => EXPANSION_TOO_LARGE,
            Error::Compile(CompileError::SelfCheck { .. }) => OTHER,
            Error::Compile(CompileError::Model(ModelError::Io(_))) => OTHER,
            Error::Compile(_) => VALIDATION,
            Error::Mpc(MpcError::Overflow { .. }) => FIELD_OVERFLOW,
            Error::Mpc(MpcError::FingerprintMismatch { .. }) => FINGERPRINT_MISMATCH,
            Error::Mpc(MpcError::Io { .. }) => OTHER,
            Error::Mpc(_) => VALIDATION,
            Error::Io { .. } | Error::Csv(_) => OTHER,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_codes() {
        let expansion = Error::Compile(CompileError::ExpansionTooLarge {
            degree: 900,
            degree_cap: 40,
            terms: 1e30,
            term_cap: 5_000_000,
        });
        assert_eq!(expansion.exit_code(), 3);
        assert_eq!(Error::Poly(PolyError::TooManyTerms { terms: 9, cap: 1 }).exit_code(), 3);
        assert_eq!(Error::Mpc(MpcError::Overflow { value: 1.0, bound: 0.5 }).exit_code(), 4);
        let fp = MpcError::FingerprintMismatch {
            expected: "a".into(),
            found: "b".into(),
        };
        assert_eq!(Error::Mpc(fp).exit_code(), 5);
        assert_eq!(Error::Model(ModelError::Parse("x".into())).exit_code(), 2);
    }
}
