//! Message schema of the newline-delimited JSON protocol, and a server loop
//! that exposes any [`Oracle`] through it.
//!
//! ```text
//! -> {"type":"hello","version":1}
//! <- {"type":"hello","version":1,"pipelining":true}
//! -> {"type":"describe"}
//! <- {"type":"profile","layers":[{"layer_id":...,"magnitude":[...],"taylor":[...]}]}
//! -> {"type":"evaluate","tag":"e0","split":"proxy","kept":{"block0":[0,3]}}
//! <- {"type":"result","tag":"e0","accuracy":0.91}
//! -> {"type":"shutdown"}
//! ```
//!
//! Remote failures are reported as `{"type":"error","message":...}`, with
//! the request's `tag` when there is one.

use std::io::{BufRead, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{EvalRequest, Oracle, Split};
use crate::profile::{LayerDocument, Selection};

pub const PROTOCOL_VERSION: u32 = 1;

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        version: u32,
        /// Set by a remote that accepts several in-flight requests.
        #[serde(default, skip_serializing_if = "is_false")]
        pipelining: bool,
    },
    Describe,
    Profile {
        layers: Vec<LayerDocument>,
    },
    Evaluate {
        tag: String,
        split: Split,
        kept: IndexMap<String, Vec<usize>>,
    },
    Result {
        tag: String,
        accuracy: f64,
    },
    Shutdown,
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tag: Option<String>,
        message: String,
    },
}

impl Message {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("protocol messages serialize")
    }

    pub fn evaluate(request: &EvalRequest) -> Self {
        Message::Evaluate {
            tag: request.tag.clone(),
            split: request.split,
            kept: request.selection.kept().clone(),
        }
    }
}

/// Answers protocol requests read from `input` until `shutdown` or end of
/// input. A bad request gets an error message; it never ends the loop.
pub fn serve<O, R, W>(oracle: &mut O, input: R, mut output: W) -> std::io::Result<()>
where
    O: Oracle + ?Sized,
    R: BufRead,
    W: Write,
{
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Message>(&line) {
            Ok(Message::Hello { version, .. }) if version == PROTOCOL_VERSION => Message::Hello {
                version: PROTOCOL_VERSION,
                pipelining: true,
            },
            Ok(Message::Hello { version, .. }) => Message::Error {
                tag: None,
                message: format!("unsupported protocol version {version}"),
            },
            Ok(Message::Describe) => Message::Profile {
                layers: oracle.profile().to_document().layers,
            },
            Ok(Message::Evaluate { tag, split, kept }) => match Selection::new(oracle.profile(), kept) {
                Err(e) => Message::Error {
                    tag: Some(tag),
                    message: e.to_string(),
                },
                Ok(selection) => match oracle.evaluate(&EvalRequest::new(selection, split, tag.clone())) {
                    Ok(r) => Message::Result {
                        tag,
                        accuracy: r.accuracy,
                    },
                    Err(e) => Message::Error {
                        tag: Some(tag),
                        message: e.to_string(),
                    },
                },
            },
            Ok(Message::Shutdown) => break,
            Ok(other) => Message::Error {
                tag: None,
                message: format!("unexpected request {}", other.to_line()),
            },
            Err(e) => Message::Error {
                tag: None,
                message: format!("malformed request: {e}"),
            },
        };
        writeln!(output, "{}", reply.to_line())?;
        output.flush()?;
    }
    Ok(())
}
