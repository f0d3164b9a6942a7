use std::fmt;

/// Command failure, sorted by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments. Exit code 2.
    Config(String),
    /// Missing, unreadable or mismatched input data. Exit code 3.
    Data(String),
    /// An internal check failed. Exit code 4.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<tof_mcl::Error> for CliError {
    fn from(e: tof_mcl::Error) -> Self {
        use tof_mcl::Error as E;
        match e {
            E::InvalidInput(_) | E::InvalidSpec(_) => CliError::Config(e.to_string()),
            E::InvalidMap(_) | E::Format(_) | E::Io(_) | E::UndefinedMetric(_) => {
                CliError::Data(e.to_string())
            }
            E::Consistency(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
