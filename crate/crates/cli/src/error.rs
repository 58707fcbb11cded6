use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] levirotor::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 config, 3 numerical failure, 4 escape, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(e) => model_exit_code(e),
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

pub fn model_exit_code(e: &levirotor::Error) -> u8 {
    match e {
        levirotor::Error::InvalidParameter { .. } => 2,
        levirotor::Error::Escaped { .. } => 4,
        _ => 3,
    }
}
