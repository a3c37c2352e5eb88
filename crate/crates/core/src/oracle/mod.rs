//! Accuracy oracles: anything that maps a [`Selection`] to an accuracy.
//!
//! Two implementations ship with the crate. [`SurrogateModel`] is a fully
//! deterministic synthetic evaluator for desk-scale runs. [`ExternalOracle`]
//! talks newline-delimited JSON to a remote evaluator over a subprocess's
//! standard streams or a TCP socket; [`serve`] is the matching server side.

mod protocol;
mod session;
mod surrogate;

use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{ModelProfile, ProfileError, Selection};

pub use protocol::{serve, Message, PROTOCOL_VERSION};
pub use session::{ExternalOracle, SessionOptions, TranscriptEntry, DEFAULT_TIMEOUT};
pub use surrogate::{SurrogateConfig, SurrogateModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    /// Small set used as search fitness.
    Proxy,
    /// Larger set used only for reporting.
    Heldout,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Proxy => "proxy",
            Split::Heldout => "heldout",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRequest {
    pub selection: Selection,
    pub split: Split,
    pub tag: String,
}

impl EvalRequest {
    pub fn new(selection: Selection, split: Split, tag: impl Into<String>) -> Self {
        EvalRequest {
            selection,
            split,
            tag: tag.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: f64,
    pub split: Split,
    pub tag: String,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("selection does not match the oracle's profile: {0}")]
    Misaligned(#[source] ProfileError),
    #[error("protocol error ({reason}) on line: {line}")]
    Protocol { line: String, reason: String },
    #[error("remote evaluator reported: {0}")]
    RemoteFailure(String),
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("remote profile is invalid: {0}")]
    InvalidProfile(#[source] ProfileError),
    #[error("transcript mismatch: {0}")]
    Transcript(String),
    #[error("remote closed the connection")]
    Closed,
    #[error("invalid surrogate: {0}")]
    InvalidSurrogate(String),
    #[error("bad oracle address `{0}`: expected surrogate, cmd:<command> or tcp:<host:port>")]
    BadAddress(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl OracleError {
    pub(crate) fn protocol(line: &str, reason: impl Into<String>) -> Self {
        const MAX: usize = 240;
        let line = if line.len() > MAX {
            let mut cut = MAX;
            while !line.is_char_boundary(cut) {
                cut -= 1;
            }
            format!("{}...", &line[..cut])
        } else {
            line.to_string()
        };
        OracleError::Protocol {
            line,
            reason: reason.into(),
        }
    }
}

/// An accuracy evaluator bound to one model profile.
pub trait Oracle: Send {
    fn profile(&self) -> &ModelProfile;

    fn evaluate(&mut self, request: &EvalRequest) -> Result<EvalResult, OracleError>;

    /// Evaluates several requests; results come back in request order.
    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Result<Vec<EvalResult>, OracleError> {
        requests.iter().map(|r| self.evaluate(r)).collect()
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn profile(&self) -> &ModelProfile {
        (**self).profile()
    }
    fn evaluate(&mut self, request: &EvalRequest) -> Result<EvalResult, OracleError> {
        (**self).evaluate(request)
    }
    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Result<Vec<EvalResult>, OracleError> {
        (**self).evaluate_batch(requests)
    }
}

/// Where an oracle lives, as written on the command line:
/// `surrogate`, `cmd:<program and args>` or `tcp:<host:port>`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum OracleAddress {
    #[default]
    Surrogate,
    Command(Vec<String>),
    Tcp(String),
}

impl FromStr for OracleAddress {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || OracleError::BadAddress(s.to_string());
        if s == "surrogate" {
            Ok(OracleAddress::Surrogate)
        } else if let Some(cmd) = s.strip_prefix("cmd:") {
            let argv = shlex::split(cmd).filter(|a| !a.is_empty()).ok_or_else(bad)?;
            Ok(OracleAddress::Command(argv))
        } else if let Some(addr) = s.strip_prefix("tcp:") {
            if addr.is_empty() {
                Err(bad())
            } else {
                Ok(OracleAddress::Tcp(addr.to_string()))
            }
        } else {
            Err(bad())
        }
    }
}

impl std::fmt::Display for OracleAddress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleAddress::Surrogate => f.write_str("surrogate"),
            OracleAddress::Command(argv) => write!(
                f,
                "cmd:{}",
                shlex::try_join(argv.iter().map(String::as_str)).unwrap_or_default()
            ),
            OracleAddress::Tcp(addr) => write!(f, "tcp:{addr}"),
        }
    }
}

impl Serialize for OracleAddress {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OracleAddress {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_addresses() {
        assert_eq!("surrogate".parse::<OracleAddress>().unwrap(), OracleAddress::Surrogate);
        assert_eq!(
            "cmd:python3 -m adapter --model 'vit b'"
                .parse::<OracleAddress>()
                .unwrap(),
            OracleAddress::Command(vec![
                "python3".into(),
                "-m".into(),
                "adapter".into(),
                "--model".into(),
                "vit b".into()
            ])
        );
        assert_eq!(
            "tcp:127.0.0.1:9000".parse::<OracleAddress>().unwrap(),
            OracleAddress::Tcp("127.0.0.1:9000".into())
        );
        for bad in ["", "cmd:", "tcp:", "http://x", "cmd:'unterminated"] {
            assert!(bad.parse::<OracleAddress>().is_err(), "{bad}");
        }
    }

    #[test]
    fn address_round_trips_through_json() {
        let a: OracleAddress = "cmd:rankprune serve --seed 3".parse().unwrap();
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<OracleAddress>(&text).unwrap(), a);
    }

    #[test]
    fn long_protocol_lines_are_truncated() {
        let line = "x".repeat(1000);
        match OracleError::protocol(&line, "bad") {
            OracleError::Protocol { line, .. } => assert!(line.len() < 300),
            _ => unreachable!(),
        }
    }
}
