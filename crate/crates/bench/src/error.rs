use std::path::PathBuf;

use thiserror::Error;

/// Everything the harness can fail with.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] kquad_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Input(String),
    #[error("{method}, m = {m}, trial {trial}: {source}")]
    Trial { method: String, m: usize, trial: usize, source: kquad_core::Error },
}

impl BenchError {
    pub fn input(msg: impl Into<String>) -> Self {
        BenchError::Input(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for numerical breakdowns, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Core(e) | BenchError::Trial { source: e, .. } if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(BenchError::input("x").exit_code(), 1);
        assert_eq!(BenchError::from(kquad_core::Error::invalid("x")).exit_code(), 1);
        assert_eq!(BenchError::from(kquad_core::Error::numerical("x")).exit_code(), 2);
        let trial = |source| BenchError::Trial { method: "arls".into(), m: 4, trial: 1, source };
        assert_eq!(trial(kquad_core::Error::numerical("x")).exit_code(), 2);
        let e = trial(kquad_core::Error::invalid("bad"));
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().starts_with("arls, m = 4, trial 1:"));
    }
}
