use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] igssm::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for infeasible configurations, 4 for
    /// failed checks and 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Core(igssm::Error::Infeasible(_)) => 3,
            Self::Core(igssm::Error::Io(_) | igssm::Error::Csv(_)) => 1,
            Self::Core(_) => 2,
            Self::Io(_) => 1,
            Self::Check(_) => 4,
        }
    }
}
