use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// One problem found while reading a configuration file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// 1-based line number, `None` for problems that are not tied to a line (missing keys).
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", join_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("{0}")]
    Domain(String),

    #[error("negative population {value:e} at cell {cell:?}, step {step}, local Mach {mach:.4}")]
    Stability {
        cell: [usize; 3],
        step: u64,
        value: f64,
        mach: f64,
    },

    #[error("lattice velocity {speed:.4} exceeds Mach guard {limit} at cell {cell:?}, step {step}")]
    Mach {
        cell: [usize; 3],
        step: u64,
        speed: f64,
        limit: f64,
    },

    #[error("non-finite value in cell {cell:?} at step {step}")]
    Integrity { cell: [usize; 3], step: u64 },

    #[error("negative energy density {value:e} at cell {cell:?}, step {step}")]
    Energy {
        cell: [usize; 3],
        step: u64,
        value: f64,
    },

    #[error("energy balance off by {residual:e} at step {step} (deposited {deposited:e}, lattice units)")]
    EnergyBalance { step: u64, residual: f64, deposited: f64 },

    #[error("powder generation: {0}")]
    Powder(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config_single(key: &str, message: impl Into<String>) -> Self {
        Error::Config(vec![ConfigIssue {
            line: None,
            key: key.to_string(),
            message: message.into(),
        }])
    }

    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Powder(_) => 2,
            Error::Stability { .. } | Error::Mach { .. } | Error::Integrity { .. } => 3,
            Error::Energy { .. } | Error::EnergyBalance { .. } => 4,
            Error::File { .. } | Error::Io(_) | Error::Csv(_) => 5,
        }
    }

    /// Short label used in sweep result rows.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Powder(_) => "config",
            Error::Stability { .. } | Error::Mach { .. } | Error::Integrity { .. } => "stability",
            Error::Energy { .. } | Error::EnergyBalance { .. } => "energy",
            Error::File { .. } | Error::Io(_) | Error::Csv(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
