/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Sampling(String),
    Internal(String),
}

impl CliError {
    pub fn usage(e: dtameta::Error) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Sampling(_) => 4,
            CliError::Internal(_) => 5,
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Sampling(_) => "sampling",
            CliError::Internal(_) => "internal",
        }
    }

    /// `error[<class>]: <message>` on one line.
    pub fn line(&self) -> String {
        let (CliError::Usage(m) | CliError::Data(m) | CliError::Sampling(m) | CliError::Internal(m)) = self;
        format!("error[{}]: {}", self.tag(), m.replace('\n', " "))
    }
}

impl From<dtameta::Error> for CliError {
    fn from(e: dtameta::Error) -> Self {
        use dtameta::Error as E;
        let msg = e.to_string();
        match e {
            E::Argument(_) | E::Capability(_) => CliError::Usage(msg),
            E::Initialization(_) | E::Domain(_) => CliError::Sampling(msg),
            E::Precondition(_) | E::Layout(_) => CliError::Internal(msg),
            _ if e.is_data_error() => CliError::Data(msg),
            _ => CliError::Internal(msg),
        }
    }
}
