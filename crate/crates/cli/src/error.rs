use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or missing inputs; nothing has been written.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Study(#[from] dtnwave::Error),

    #[error("cannot write outputs: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
