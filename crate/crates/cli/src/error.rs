//! Error-to-exit-code contract: 2 validation, 3 realm, 4 size, 5 invariant
//! violation (the `verify` command).

use std::fmt;

use rho_privacy::bounds::BoundsError;
use rho_privacy::mechanisms::MechanismError;
use rho_privacy::model::ModelError;
use rho_privacy::oracle::OracleError;
use rho_privacy::privacy::PrivacyError;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Realm(String),
    Size(String),
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Realm(_) => 3,
            CliError::Size(_) => 4,
            CliError::Invariant(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "validation error: {msg}"),
            CliError::Realm(msg) => write!(f, "realm error: {msg}"),
            CliError::Size(msg) => write!(f, "size error: {msg}"),
            CliError::Invariant(msg) => write!(f, "invariant violation: {msg}"),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(err: ModelError) -> Self {
        CliError::Validation(err.to_string())
    }
}

impl From<MechanismError> for CliError {
    fn from(err: MechanismError) -> Self {
        match err {
            MechanismError::RhoOutOfRealm { .. } => CliError::Realm(err.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<PrivacyError> for CliError {
    fn from(err: PrivacyError) -> Self {
        match err {
            PrivacyError::EnumerationTooLarge { .. } => CliError::Size(format!(
                "{err}; use --simulate for a Monte-Carlo estimate or raise --cap"
            )),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<BoundsError> for CliError {
    fn from(err: BoundsError) -> Self {
        match err {
            BoundsError::RhoOutOfRealm { .. } => CliError::Realm(err.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(err: OracleError) -> Self {
        match err {
            OracleError::SearchSpaceTooLarge { .. } => CliError::Size(err.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Validation(format!("io: {err}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Validation(format!("json: {err}"))
    }
}
