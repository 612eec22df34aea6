use std::io;

use gramforge::categories::CategoryError;
use gramforge::corpus::CorpusError;
use gramforge::grammar::{GenerateError, GrammarSyntaxError, MutationError, ParseError};
use gramforge::induction::InductionError;
use gramforge::oracle::{NgramError, OracleError};
use gramforge::poc::PocError;
use gramforge::probmatrix::{FillError, MatrixError, MatrixFileError};
use gramforge::wsd::WsdError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    OracleUnavailable(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::OracleUnavailable(_) => 3,
            CliError::Data(_) => 4,
        }
    }

    fn from_oracle(e: &OracleError, message: String) -> Self {
        match e {
            OracleError::Unavailable(_) => CliError::OracleUnavailable(message),
            _ => CliError::Data(message),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::from_oracle(&e, e.to_string())
    }
}

impl From<FillError> for CliError {
    fn from(e: FillError) -> Self {
        match &e {
            FillError::Oracle { source, .. } => CliError::from_oracle(source, e.to_string()),
            FillError::Matrix(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<InductionError> for CliError {
    fn from(e: InductionError) -> Self {
        match &e {
            InductionError::Oracle(source) => CliError::from_oracle(source, e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PocError> for CliError {
    fn from(e: PocError) -> Self {
        match e {
            PocError::Induction(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_errors!(
    io::Error,
    serde_json::Error,
    CorpusError,
    NgramError,
    MatrixError,
    MatrixFileError,
    WsdError,
    CategoryError,
    GrammarSyntaxError,
    ParseError,
    GenerateError,
    MutationError
);
