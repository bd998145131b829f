use greyfit::GreyError;

pub const EXIT_PARSE: i32 = 2;
pub const EXIT_SINGULAR: i32 = 3;
pub const EXIT_BLOW_UP: i32 = 4;
pub const EXIT_DOMAIN: i32 = 5;
pub const EXIT_CONFIG: i32 = 6;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input.
    Parse(String),
    /// Inconsistent flags or an invalid configuration.
    Config(String),
    Io(String),
    Model(GreyError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => 1,
            CliError::Model(e) => match e {
                GreyError::InvalidSeries(_) | GreyError::Dimension(_) => EXIT_PARSE,
                GreyError::SingularDesign { .. } => EXIT_SINGULAR,
                GreyError::BlowUp { .. } => EXIT_BLOW_UP,
                GreyError::Domain(_) | GreyError::Singularity(_) => EXIT_DOMAIN,
                GreyError::Config { .. } | GreyError::InvalidSpec(_) | GreyError::InvalidArgument(_) => {
                    EXIT_CONFIG
                }
                _ => 1,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Model(e) => e.kind(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl From<GreyError> for CliError {
    fn from(e: GreyError) -> Self {
        CliError::Model(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
