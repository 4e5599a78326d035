use rose_core::RoseError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error(transparent)]
    Core(#[from] RoseError),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit status. 2 is left to argument-parsing errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => 3,
            CliError::Core(e) => match e {
                RoseError::InvalidParameter(_) | RoseError::EmptyEnsemble => 3,
                RoseError::FitDiverged(_) => 4,
                RoseError::InsufficientData { .. } => 5,
                RoseError::NonFiniteState { .. } => 6,
                RoseError::Io(_) | RoseError::Csv(_) | RoseError::Json(_) => 1,
            },
            CliError::Io { .. } => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct() {
        let codes = [
            CliError::ConfigInvalid(String::new()).exit_code(),
            CliError::Core(RoseError::FitDiverged(String::new())).exit_code(),
            CliError::Core(RoseError::InsufficientData { got: 1, need: 3 }).exit_code(),
            CliError::Core(RoseError::NonFiniteState { time: 0.0 }).exit_code(),
        ];
        for (i, a) in codes.iter().enumerate() {
            assert!(*a != 0 && *a != 1 && *a != 2);
            assert!(codes[i + 1..].iter().all(|b| b != a));
        }
    }
}
