//! Client side of the protocol: subprocess, TCP and transcript-replay
//! transports behind one session type.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::protocol::{Message, PROTOCOL_VERSION};
use super::{EvalRequest, EvalResult, Oracle, OracleAddress, OracleError};
use crate::profile::{validate_profile, ModelProfile, ProfileDocument};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Debug, Clone)]
pub struct SessionOptions {
    /// Longest wait for any single response line.
    pub timeout: Duration,
    /// Append every exchanged line to this `.jsonl` transcript.
    pub record: Option<PathBuf>,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            timeout: DEFAULT_TIMEOUT,
            record: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Request,
    Response,
}

/// One transcript line: `{"direction":"request","message":{...}}`, with the
/// message embedded byte-for-byte. Lines that are not JSON are recorded as
/// JSON strings.
#[derive(Debug, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub message: Box<RawValue>,
}

impl TranscriptEntry {
    fn new(direction: Direction, line: &str) -> Self {
        let message = RawValue::from_string(line.to_string()).unwrap_or_else(|_| {
            RawValue::from_string(serde_json::to_string(line).expect("strings serialize"))
                .expect("a JSON string is valid JSON")
        });
        TranscriptEntry { direction, message }
    }
}

trait Transport: Send {
    fn send(&mut self, line: &str) -> Result<(), OracleError>;
    fn recv(&mut self, timeout: Duration) -> Result<String, OracleError>;
}

/// A writer plus a background thread that feeds incoming lines into a
/// channel, so reads can time out.
struct StreamTransport {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
}

impl StreamTransport {
    fn new<R: Read + Send + 'static>(reader: R, writer: Box<dyn Write + Send>) -> Self {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        StreamTransport { writer, lines: rx }
    }
}

impl Transport for StreamTransport {
    fn send(&mut self, line: &str) -> Result<(), OracleError> {
        let res = self
            .writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.write_all(b"\n"))
            .and_then(|_| self.writer.flush());
        match res {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Err(OracleError::Closed),
            other => Ok(other?),
        }
    }

    fn recv(&mut self, timeout: Duration) -> Result<String, OracleError> {
        match self.lines.recv_timeout(timeout) {
            Ok(line) => Ok(line?),
            Err(RecvTimeoutError::Timeout) => Err(OracleError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(OracleError::Closed),
        }
    }
}

/// Plays back a recorded transcript, insisting that every outgoing line is
/// byte-identical to the recorded request.
struct ReplayTransport {
    entries: std::vec::IntoIter<TranscriptEntry>,
    position: usize,
}

impl ReplayTransport {
    fn next(&mut self, want: Direction) -> Result<TranscriptEntry, OracleError> {
        self.position += 1;
        match self.entries.next() {
            Some(e) if e.direction == want => Ok(e),
            Some(e) => Err(OracleError::Transcript(format!(
                "entry {} is a {:?}, expected a {want:?}",
                self.position, e.direction
            ))),
            None => Err(OracleError::Closed),
        }
    }
}

impl Transport for ReplayTransport {
    fn send(&mut self, line: &str) -> Result<(), OracleError> {
        let entry = self.next(Direction::Request)?;
        if entry.message.get() == line {
            Ok(())
        } else {
            Err(OracleError::Transcript(format!(
                "request at entry {} differs: recorded {}, sent {line}",
                self.position,
                entry.message.get()
            )))
        }
    }

    fn recv(&mut self, _timeout: Duration) -> Result<String, OracleError> {
        Ok(self.next(Direction::Response)?.message.get().to_string())
    }
}

/// A live session with a remote evaluator. Opening it performs the hello
/// handshake and fetches the profile.
pub struct ExternalOracle {
    transport: Box<dyn Transport>,
    recorder: Option<BufWriter<File>>,
    child: Option<Child>,
    profile: ModelProfile,
    pipelining: bool,
    timeout: Duration,
    closed: bool,
}

impl std::fmt::Debug for ExternalOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalOracle")
            .field("channels", &self.profile.total_channels())
            .field("pipelining", &self.pipelining)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl ExternalOracle {
    pub fn open(address: &OracleAddress, options: &SessionOptions) -> Result<Self, OracleError> {
        match address {
            OracleAddress::Command(argv) => Self::spawn(argv, options),
            OracleAddress::Tcp(addr) => Self::connect(addr, options),
            OracleAddress::Surrogate => Err(OracleError::BadAddress(address.to_string())),
        }
    }

    /// Runs `argv` and speaks the protocol over its stdin/stdout.
    pub fn spawn(argv: &[String], options: &SessionOptions) -> Result<Self, OracleError> {
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| OracleError::BadAddress(String::new()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let transport = StreamTransport::new(stdout, Box::new(stdin));
        Self::start(Box::new(transport), Some(child), options)
    }

    pub fn connect(addr: &str, options: &SessionOptions) -> Result<Self, OracleError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        let transport = StreamTransport::new(reader, Box::new(stream));
        Self::start(Box::new(transport), None, options)
    }

    /// Session over an existing pair of byte streams.
    pub fn from_streams<R, W>(reader: R, writer: W, options: &SessionOptions) -> Result<Self, OracleError>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        Self::start(Box::new(StreamTransport::new(reader, Box::new(writer))), None, options)
    }

    /// Session that answers from a recorded transcript and fails on the
    /// first request that differs from the recording.
    pub fn replay(path: &Path, options: &SessionOptions) -> Result<Self, OracleError> {
        let text = std::fs::read_to_string(path)?;
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str::<TranscriptEntry>(l)
                    .map_err(|e| OracleError::Transcript(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let transport = ReplayTransport {
            entries: entries.into_iter(),
            position: 0,
        };
        Self::start(Box::new(transport), None, options)
    }

    fn start(
        transport: Box<dyn Transport>,
        child: Option<Child>,
        options: &SessionOptions,
    ) -> Result<Self, OracleError> {
        let recorder = match &options.record {
            Some(path) => Some(BufWriter::new(File::create(path)?)),
            None => None,
        };
        let mut session = ExternalOracle {
            transport,
            recorder,
            child,
            profile: placeholder_profile(),
            pipelining: false,
            timeout: options.timeout,
            closed: false,
        };
        session.handshake()?;
        session.profile = session.fetch_profile()?;
        Ok(session)
    }

    fn send(&mut self, message: &Message) -> Result<(), OracleError> {
        let line = message.to_line();
        self.record(Direction::Request, &line)?;
        self.transport.send(&line)
    }

    fn recv_line(&mut self) -> Result<String, OracleError> {
        let line = self.transport.recv(self.timeout)?;
        self.record(Direction::Response, &line)?;
        Ok(line)
    }

    fn recv(&mut self) -> Result<(String, Message), OracleError> {
        let line = self.recv_line()?;
        match serde_json::from_str::<Message>(&line) {
            Ok(m) => Ok((line, m)),
            Err(e) => Err(OracleError::protocol(&line, format!("not a protocol message: {e}"))),
        }
    }

    fn record(&mut self, direction: Direction, line: &str) -> Result<(), OracleError> {
        if let Some(rec) = &mut self.recorder {
            let entry = serde_json::to_string(&TranscriptEntry::new(direction, line)).expect("entries serialize");
            writeln!(rec, "{entry}")?;
            rec.flush()?;
        }
        Ok(())
    }

    fn handshake(&mut self) -> Result<(), OracleError> {
        self.send(&Message::Hello {
            version: PROTOCOL_VERSION,
            pipelining: false,
        })?;
        match self.recv()? {
            (_, Message::Hello { version, pipelining }) if version == PROTOCOL_VERSION => {
                self.pipelining = pipelining;
                Ok(())
            }
            (_, Message::Error { message, .. }) => Err(OracleError::RemoteFailure(message)),
            (line, _) => Err(OracleError::protocol(&line, "expected a version 1 hello")),
        }
    }

    /// Asks the remote to describe its model and validates the answer.
    pub fn fetch_profile(&mut self) -> Result<ModelProfile, OracleError> {
        self.send(&Message::Describe)?;
        let line = self.recv_line()?;
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| OracleError::protocol(&line, format!("not JSON: {e}")))?;
        match value.get("type").and_then(|t| t.as_str()) {
            Some("error") => {
                let message = value.get("message").and_then(|m| m.as_str()).unwrap_or("unspecified");
                return Err(OracleError::RemoteFailure(message.to_string()));
            }
            None | Some("profile") => {}
            Some(other) => {
                return Err(OracleError::protocol(
                    &line,
                    format!("expected a profile, got `{other}`"),
                ));
            }
        }
        let doc: ProfileDocument = serde_json::from_value(value)
            .map_err(|e| OracleError::protocol(&line, format!("invalid profile document: {e}")))?;
        validate_profile(doc).map_err(OracleError::InvalidProfile)
    }

    pub fn pipelining(&self) -> bool {
        self.pipelining
    }

    /// Sends `shutdown` and waits for a spawned remote to exit.
    pub fn shutdown(mut self) -> Result<(), OracleError> {
        self.close()
    }

    fn close(&mut self) -> Result<(), OracleError> {
        if self.closed {
            return Ok(());
        }
        self.closed = true;
        let sent = self.send(&Message::Shutdown);
        if let Some(mut child) = self.child.take() {
            let deadline = Instant::now() + Duration::from_secs(5);
            loop {
                if child.try_wait()?.is_some() {
                    break;
                }
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    break;
                }
                thread::sleep(Duration::from_millis(10));
            }
        }
        sent
    }

    fn check_result(line: &str, accuracy: f64) -> Result<f64, OracleError> {
        if accuracy.is_finite() && (0.0..=1.0).contains(&accuracy) {
            Ok(accuracy)
        } else {
            Err(OracleError::protocol(
                line,
                format!("accuracy {accuracy} outside [0, 1]"),
            ))
        }
    }
}

impl Drop for ExternalOracle {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

fn placeholder_profile() -> ModelProfile {
    validate_profile(ProfileDocument {
        layers: vec![crate::profile::LayerDocument {
            layer_id: String::new(),
            magnitude: vec![0.0, 0.0],
            taylor: vec![0.0, 0.0],
        }],
    })
    .expect("placeholder is valid")
}

impl Oracle for ExternalOracle {
    fn profile(&self) -> &ModelProfile {
        &self.profile
    }

    fn evaluate(&mut self, request: &EvalRequest) -> Result<EvalResult, OracleError> {
        request
            .selection
            .check_against(&self.profile)
            .map_err(OracleError::Misaligned)?;
        self.send(&Message::evaluate(request))?;
        match self.recv()? {
            (line, Message::Result { tag, accuracy }) if tag == request.tag => Ok(EvalResult {
                accuracy: Self::check_result(&line, accuracy)?,
                split: request.split,
                tag,
            }),
            (_, Message::Error { message, .. }) => Err(OracleError::RemoteFailure(message)),
            (line, Message::Result { tag, .. }) => Err(OracleError::protocol(
                &line,
                format!("response tag `{tag}` does not match request `{}`", request.tag),
            )),
            (line, _) => Err(OracleError::protocol(&line, "expected a result")),
        }
    }

    /// With a pipelining remote every request is sent before any response is
    /// read, and responses are matched back by tag in whatever order they
    /// arrive.
    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Result<Vec<EvalResult>, OracleError> {
        if !self.pipelining || requests.len() < 2 {
            return requests.iter().map(|r| self.evaluate(r)).collect();
        }
        let mut index = HashMap::with_capacity(requests.len());
        for (i, r) in requests.iter().enumerate() {
            r.selection
                .check_against(&self.profile)
                .map_err(OracleError::Misaligned)?;
            if index.insert(r.tag.as_str(), i).is_some() {
                return Err(OracleError::protocol(&r.tag, "duplicate request tag in batch"));
            }
        }
        for r in requests {
            self.send(&Message::evaluate(r))?;
        }
        let mut out: Vec<Option<EvalResult>> = vec![None; requests.len()];
        let mut first_error = None;
        for _ in 0..requests.len() {
            let (line, msg) = self.recv()?;
            let (tag, outcome) = match msg {
                Message::Result { tag, accuracy } => {
                    let acc = Self::check_result(&line, accuracy);
                    (tag, acc)
                }
                Message::Error {
                    tag: Some(tag),
                    message,
                } => (tag, Err(OracleError::RemoteFailure(message))),
                Message::Error { tag: None, message } => return Err(OracleError::RemoteFailure(message)),
                _ => return Err(OracleError::protocol(&line, "expected a result")),
            };
            let i = match index.get(tag.as_str()) {
                Some(&i) if out[i].is_none() => i,
                Some(_) => return Err(OracleError::protocol(&line, format!("tag `{tag}` answered twice"))),
                None => return Err(OracleError::protocol(&line, format!("unknown tag `{tag}`"))),
            };
            match outcome {
                Ok(accuracy) => {
                    out[i] = Some(EvalResult {
                        accuracy,
                        split: requests[i].split,
                        tag,
                    })
                }
                Err(e) => {
                    // keep reading so the stream stays in step
                    out[i] = Some(EvalResult {
                        accuracy: f64::NAN,
                        split: requests[i].split,
                        tag,
                    });
                    first_error.get_or_insert(e);
                }
            }
        }
        match first_error {
            Some(e) => Err(e),
            None => Ok(out.into_iter().map(|r| r.expect("every tag answered")).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{serve, Split, SurrogateConfig};
    use crate::profile::Selection;
    use std::net::TcpListener;

    fn surrogate() -> crate::oracle::SurrogateModel {
        SurrogateConfig {
            layers: 2,
            channels: 6,
            ..Default::default()
        }
        .build()
        .unwrap()
    }

    /// A TCP remote that answers with `respond` for each request line.
    fn scripted_remote<F>(mut respond: F) -> String
    where
        F: FnMut(&str) -> Vec<String> + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut writer = stream.try_clone().unwrap();
            for line in BufReader::new(stream).lines() {
                let line = line.unwrap();
                for reply in respond(&line) {
                    writeln!(writer, "{reply}").unwrap();
                }
            }
        });
        addr
    }

    fn profile_line() -> String {
        Message::Profile {
            layers: surrogate().profile().to_document().layers,
        }
        .to_line()
    }

    fn basic_replies(line: &str) -> Vec<String> {
        let msg: Message = serde_json::from_str(line).unwrap();
        match msg {
            Message::Hello { .. } => vec![r#"{"type":"hello","version":1}"#.to_string()],
            Message::Describe => vec![profile_line()],
            Message::Evaluate { tag, .. } => vec![format!(r#"{{"type":"result","tag":"{tag}","accuracy":0.75}}"#)],
            _ => vec![],
        }
    }

    #[test]
    fn tcp_echo_contract() {
        let addr = scripted_remote(basic_replies);
        let mut s = ExternalOracle::connect(&addr, &SessionOptions::default()).unwrap();
        assert!(!s.pipelining());
        assert_eq!(s.profile().total_channels(), 12);
        let sel = Selection::keep_all(s.profile());
        let r = s.evaluate(&EvalRequest::new(sel, Split::Proxy, "t1")).unwrap();
        assert_eq!(r.tag, "t1");
        assert_eq!(r.accuracy, 0.75);
    }

    #[test]
    fn malformed_line_is_named() {
        let addr = scripted_remote(|line| {
            if line.contains("evaluate") {
                vec!["{oops".to_string()]
            } else {
                basic_replies(line)
            }
        });
        let mut s = ExternalOracle::connect(&addr, &SessionOptions::default()).unwrap();
        let sel = Selection::keep_all(s.profile());
        match s.evaluate(&EvalRequest::new(sel, Split::Proxy, "t1")) {
            Err(OracleError::Protocol { line, .. }) => assert_eq!(line, "{oops"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn remote_error_and_timeout() {
        let addr = scripted_remote(|line| {
            if line.contains("\"t1\"") {
                vec![r#"{"type":"error","tag":"t1","message":"cuda oom"}"#.to_string()]
            } else if line.contains("\"t2\"") {
                vec![]
            } else {
                basic_replies(line)
            }
        });
        let opts = SessionOptions {
            timeout: Duration::from_millis(200),
            record: None,
        };
        let mut s = ExternalOracle::connect(&addr, &opts).unwrap();
        let sel = Selection::keep_all(s.profile());
        match s.evaluate(&EvalRequest::new(sel.clone(), Split::Proxy, "t1")) {
            Err(OracleError::RemoteFailure(m)) => assert_eq!(m, "cuda oom"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            s.evaluate(&EvalRequest::new(sel, Split::Proxy, "t2")),
            Err(OracleError::Timeout(_))
        ));
    }

    #[test]
    fn describe_errors() {
        let missing_taylor = r#"{"type":"profile","layers":[{"layer_id":"a","magnitude":[1,2]}]}"#;
        let addr = scripted_remote(move |line| {
            if line.contains("describe") {
                vec![missing_taylor.to_string()]
            } else {
                basic_replies(line)
            }
        });
        match ExternalOracle::connect(&addr, &SessionOptions::default()) {
            Err(OracleError::Protocol { reason, .. }) => assert!(reason.contains("taylor"), "{reason}"),
            other => panic!("{other:?}"),
        }
        let one_channel = r#"{"layers":[{"layer_id":"a","magnitude":[1],"taylor":[1]}]}"#;
        let addr = scripted_remote(move |line| {
            if line.contains("describe") {
                vec![one_channel.to_string()]
            } else {
                basic_replies(line)
            }
        });
        assert!(matches!(
            ExternalOracle::connect(&addr, &SessionOptions::default()),
            Err(OracleError::InvalidProfile(crate::ProfileError::EmptyLayer { .. }))
        ));
    }

    #[test]
    fn pipelined_out_of_order_responses() {
        // holds every evaluate until four are in, then answers in reverse
        let mut held = Vec::new();
        let addr = scripted_remote(move |line| {
            let msg: Message = serde_json::from_str(line).unwrap();
            match msg {
                Message::Hello { .. } => vec![r#"{"type":"hello","version":1,"pipelining":true}"#.to_string()],
                Message::Evaluate { tag, kept, .. } => {
                    let n: usize = kept.values().map(Vec::len).sum();
                    held.push(format!(
                        r#"{{"type":"result","tag":"{tag}","accuracy":{}}}"#,
                        n as f64 / 100.0
                    ));
                    if held.len() == 4 {
                        held.drain(..).rev().collect()
                    } else {
                        vec![]
                    }
                }
                _ => basic_replies(line),
            }
        });
        let mut s = ExternalOracle::connect(&addr, &SessionOptions::default()).unwrap();
        assert!(s.pipelining());
        let p = s.profile().clone();
        let reqs: Vec<EvalRequest> = (0..4)
            .map(|k| {
                let kept = p
                    .layers()
                    .iter()
                    .map(|l| (l.layer_id().to_string(), (0..=k).collect()))
                    .collect();
                EvalRequest::new(Selection::new(&p, kept).unwrap(), Split::Proxy, format!("e{k}"))
            })
            .collect();
        let out = s.evaluate_batch(&reqs).unwrap();
        for (k, r) in out.iter().enumerate() {
            assert_eq!(r.tag, format!("e{k}"));
            assert_eq!(r.accuracy, (2 * (k + 1)) as f64 / 100.0);
        }
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("session.jsonl");
        let (client_read, server_write) = pipe_pair();
        let (server_read, client_write) = pipe_pair();
        thread::spawn(move || {
            let mut m = surrogate();
            serve(&mut m, BufReader::new(server_read), server_write).unwrap();
        });
        let opts = SessionOptions {
            record: Some(path.clone()),
            ..Default::default()
        };
        let mut live = ExternalOracle::from_streams(client_read, client_write, &opts).unwrap();
        let p = live.profile().clone();
        let reqs = |p: &ModelProfile| -> Vec<EvalRequest> {
            (0..3)
                .map(|k| {
                    let kept = p
                        .layers()
                        .iter()
                        .map(|l| (l.layer_id().to_string(), (k..l.channels()).collect()))
                        .collect();
                    EvalRequest::new(Selection::new(p, kept).unwrap(), Split::Heldout, format!("r{k}"))
                })
                .collect()
        };
        let live_out = live.evaluate_batch(&reqs(&p)).unwrap();
        live.shutdown().unwrap();

        let mut replay = ExternalOracle::replay(&path, &SessionOptions::default()).unwrap();
        assert_eq!(replay.profile(), &p);
        assert_eq!(replay.evaluate_batch(&reqs(&p)).unwrap(), live_out);

        // a different request sequence is caught
        let mut replay = ExternalOracle::replay(&path, &SessionOptions::default()).unwrap();
        let mut other = reqs(&p);
        other[0].tag = "zzz".into();
        assert!(matches!(replay.evaluate_batch(&other), Err(OracleError::Transcript(_))));
    }

    /// In-process byte pipe built on a channel.
    fn pipe_pair() -> (PipeReader, PipeWriter) {
        let (tx, rx) = mpsc::channel();
        (
            PipeReader {
                rx,
                buf: Vec::new(),
                pos: 0,
            },
            PipeWriter { tx },
        )
    }

    struct PipeWriter {
        tx: mpsc::Sender<Vec<u8>>,
    }

    impl Write for PipeWriter {
        fn write(&mut self, data: &[u8]) -> std::io::Result<usize> {
            self.tx
                .send(data.to_vec())
                .map_err(|_| std::io::Error::from(std::io::ErrorKind::BrokenPipe))?;
            Ok(data.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    struct PipeReader {
        rx: Receiver<Vec<u8>>,
        buf: Vec<u8>,
        pos: usize,
    }

    impl Read for PipeReader {
        fn read(&mut self, out: &mut [u8]) -> std::io::Result<usize> {
            if self.pos == self.buf.len() {
                match self.rx.recv() {
                    Ok(b) => {
                        self.buf = b;
                        self.pos = 0;
                    }
                    Err(_) => return Ok(0),
                }
            }
            let n = out.len().min(self.buf.len() - self.pos);
            out[..n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
            self.pos += n;
            Ok(n)
        }
    }
}
