//! Library surface of the command-line crate: configuration, file
//! formats, point codecs and the command implementations the `archbo`
//! binary wires to its arguments. Kept importable so tests and scripts
//! can parse the emitted artifacts with the same code that wrote them.

pub mod compare;
pub mod config;
pub mod output;
pub mod points;
pub mod report;
pub mod run;

/// Failure carrying the exit status it maps to: 2 for usage and
/// configuration problems, 3 for IO.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (CliError::Config(msg) | CliError::Io(msg)) = self;
        write!(f, "{msg}")
    }
}

impl std::error::Error for CliError {}
