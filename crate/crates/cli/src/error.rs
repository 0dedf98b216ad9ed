use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] coxbvm::Error),

    #[error("cannot access {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("bad configuration file {}: {source}", path.display())]
    Config { path: PathBuf, source: serde_json::Error },

    #[error("{0}")]
    Invalid(String),

    #[error("dataset fails validation: {0}")]
    Validation(String),

    #[error("diagnostics failed: {0}")]
    Verdict(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(coxbvm::Error::Io(_)) | CliError::Io { .. } => 3,
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_error_class() {
        assert_eq!(CliError::Core(coxbvm::Error::Numerical("x".into())).exit_code(), 2);
        assert_eq!(CliError::Core(coxbvm::Error::Config("x".into())).exit_code(), 1);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(CliError::Io { path: "a".into(), source: io }.exit_code(), 3);
        assert_eq!(CliError::Verdict("ks".into()).exit_code(), 1);
    }
}
