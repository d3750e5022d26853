use std::path::PathBuf;

use asif_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}, line {line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{}: missing required column `{column}`", path.display())]
    MissingColumn { path: PathBuf, column: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("empty acceptance region: no grid value of tau has p-value above alpha")]
    EmptyAcceptanceRegion,
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 1 for statistical infeasibility, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::EmptyAcceptanceRegion
            | CliError::Core(CoreError::Infeasible { .. })
            | CliError::Core(CoreError::SupportExhausted { .. }) => 1,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::EmptyAcceptanceRegion.exit_code(), 1);
        assert_eq!(CliError::Core(CoreError::Infeasible { pairs: 3, min_pairs: 10 }).exit_code(), 1);
        assert_eq!(CliError::Core(CoreError::MissingOutcome).exit_code(), 2);
        let e = CliError::MissingColumn { path: "d.csv".into(), column: "w".into() };
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("`w`"));
    }
}
