//! Client for an external encoder process speaking line-delimited JSON.
//!
//! The process first prints a handshake
//! `{"protocol_version":1,"dim":D,"model_name":S}`, then answers each request
//! `{"id":I,"text":T}` with `{"id":I,"vec":[...]}` or `{"id":I,"error":E}`.
//! Responses may come back in any order; at most [`DEFAULT_WINDOW`] requests
//! are in flight at once.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{EmbeddingVector, Encoder, EncoderInfo, EncoderKind};
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_WINDOW: usize = 256;
pub const BRIDGE_ENV: &str = "FSRC_BRIDGE_CMD";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeHandshake {
    pub protocol_version: u32,
    pub dim: usize,
    pub model_name: String,
}

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    text: &'a str,
}

#[derive(Deserialize)]
struct Response {
    id: u64,
    #[serde(default)]
    vec: Option<Vec<f64>>,
    #[serde(default)]
    error: Option<String>,
}

struct Session {
    writer: Option<Box<dyn Write + Send>>,
    reader: Box<dyn BufRead + Send>,
    next_id: u64,
}

pub struct BridgeEncoder {
    handshake: BridgeHandshake,
    command: Option<String>,
    window: usize,
    session: Mutex<Session>,
    child: Option<Child>,
}

fn unavailable(msg: impl std::fmt::Display) -> Error {
    Error::BridgeUnavailable(msg.to_string())
}

impl BridgeEncoder {
    /// Starts `command` through `sh -c` and reads its handshake.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| unavailable(format!("cannot start {command:?}: {e}")))?;
        let writer = child.stdin.take().expect("piped stdin");
        let reader = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut bridge = Self::from_streams(reader, writer)?;
        bridge.command = Some(command.to_owned());
        bridge.child = Some(child);
        Ok(bridge)
    }

    /// Starts the command named by `FSRC_BRIDGE_CMD`.
    pub fn from_env() -> Result<Self> {
        let command = std::env::var(BRIDGE_ENV).map_err(|_| unavailable(format!("{BRIDGE_ENV} is not set")))?;
        Self::spawn(&command)
    }

    /// Wraps already-connected streams; reads the handshake immediately.
    pub fn from_streams(
        mut reader: impl BufRead + Send + 'static,
        writer: impl Write + Send + 'static,
    ) -> Result<Self> {
        let mut line = String::new();
        if reader.read_line(&mut line).map_err(unavailable)? == 0 {
            return Err(unavailable("bridge closed before its handshake"));
        }
        let handshake: BridgeHandshake =
            serde_json::from_str(line.trim_end()).map_err(|e| unavailable(format!("bad handshake: {e}")))?;
        if handshake.protocol_version != PROTOCOL_VERSION {
            return Err(unavailable(format!("unsupported protocol version {}", handshake.protocol_version)));
        }
        if handshake.dim == 0 {
            return Err(unavailable("handshake dim must be positive"));
        }
        Ok(BridgeEncoder {
            handshake,
            command: None,
            window: DEFAULT_WINDOW,
            session: Mutex::new(Session { writer: Some(Box::new(writer)), reader: Box::new(reader), next_id: 0 }),
            child: None,
        })
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window.max(1);
        self
    }

    pub fn handshake(&self) -> &BridgeHandshake {
        &self.handshake
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.iter().any(|t| t.is_empty()) {
            return Err(Error::EmptyText);
        }
        let mut guard = self.session.lock().map_err(|_| unavailable("bridge session poisoned"))?;
        let session = &mut *guard;
        let first_id = session.next_id;
        session.next_id += texts.len() as u64;
        let writer = session.writer.as_mut().ok_or_else(|| unavailable("bridge input closed"))?;
        let reader = &mut session.reader;
        let dim = self.handshake.dim;

        let (credit_tx, credit_rx) = mpsc::channel::<()>();
        for _ in 0..self.window.min(texts.len()) {
            credit_tx.send(()).expect("receiver alive");
        }
        std::thread::scope(|scope| {
            let sender = scope.spawn(move || -> Result<()> {
                for (offset, text) in texts.iter().enumerate() {
                    if credit_rx.recv().is_err() {
                        // Reader gave up; stop writing.
                        return Ok(());
                    }
                    let mut line = serde_json::to_vec(&Request { id: first_id + offset as u64, text })?;
                    line.push(b'\n');
                    writer.write_all(&line).map_err(unavailable)?;
                    writer.flush().map_err(unavailable)?;
                }
                Ok(())
            });

            let mut results: HashMap<u64, EmbeddingVector> = HashMap::with_capacity(texts.len());
            let mut line = String::new();
            let received = (|| -> Result<()> {
                while results.len() < texts.len() {
                    line.clear();
                    if reader.read_line(&mut line).map_err(unavailable)? == 0 {
                        return Err(unavailable("bridge closed its output mid-request"));
                    }
                    let response: Response = serde_json::from_str(line.trim_end())
                        .map_err(|e| unavailable(format!("bad response line: {e}")))?;
                    if response.id < first_id || response.id >= first_id + texts.len() as u64 {
                        return Err(unavailable(format!("unexpected response id {}", response.id)));
                    }
                    if let Some(err) = response.error {
                        return Err(unavailable(format!("request {} failed: {err}", response.id)));
                    }
                    let values = response.vec.ok_or_else(|| unavailable("response without vec or error"))?;
                    if values.len() != dim {
                        return Err(Error::DimensionMismatch(values.len(), dim));
                    }
                    if results.insert(response.id, EmbeddingVector::new(values)?).is_some() {
                        return Err(unavailable(format!("duplicate response id {}", response.id)));
                    }
                    let _ = credit_tx.send(());
                }
                Ok(())
            })();
            drop(credit_tx);
            let sent = sender.join().expect("bridge writer thread panicked");
            received?;
            sent?;
            Ok((0..texts.len() as u64).map(|i| results.remove(&(first_id + i)).expect("all ids received")).collect())
        })
    }
}

impl Encoder for BridgeEncoder {
    fn info(&self) -> EncoderInfo {
        let mut metadata = BTreeMap::new();
        metadata.insert("model_name".into(), self.handshake.model_name.clone());
        metadata.insert("protocol_version".into(), self.handshake.protocol_version.to_string());
        if let Some(cmd) = &self.command {
            metadata.insert("command".into(), cmd.clone());
        }
        EncoderInfo { kind: EncoderKind::Bridged, dim: self.handshake.dim, metadata }
    }

    fn dim(&self) -> usize {
        self.handshake.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        Ok(self.request(&[text])?.pop().expect("one response"))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        self.request(texts)
    }
}

impl Drop for BridgeEncoder {
    fn drop(&mut self) {
        if let Ok(session) = self.session.get_mut() {
            // Closing stdin asks the bridge to shut down.
            session.writer = None;
        }
        if let Some(child) = &mut self.child {
            let _ = child.wait();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::features::fnv1a64;
    use std::io::{pipe, PipeReader, PipeWriter};

    /// In-process stand-in for a bridge: hash-derived vectors, answers in
    /// reversed blocks of `block` to exercise out-of-order handling.
    fn fake_bridge(dim: usize, block: usize, fail_on: Option<&'static str>) -> BridgeEncoder {
        let (req_r, req_w): (PipeReader, PipeWriter) = pipe().unwrap();
        let (resp_r, mut resp_w) = pipe().unwrap();
        std::thread::spawn(move || {
            writeln!(resp_w, r#"{{"protocol_version":1,"dim":{dim},"model_name":"fake"}}"#).unwrap();
            let mut pending = Vec::new();
            let flush = |pending: &mut Vec<(u64, String)>, out: &mut PipeWriter| {
                for (id, text) in pending.drain(..).rev() {
                    let line = if Some(text.as_str()) == fail_on {
                        format!(r#"{{"id":{id},"error":"boom"}}"#)
                    } else {
                        let h = fnv1a64(text.as_bytes());
                        let vec: Vec<f64> = (0..dim).map(|i| ((h >> (i % 64)) & 0xff) as f64 / 255.0 - 0.5).collect();
                        serde_json::json!({"id": id, "vec": vec}).to_string()
                    };
                    if writeln!(out, "{line}").is_err() {
                        return;
                    }
                }
                let _ = out.flush();
            };
            for line in BufReader::new(req_r).lines() {
                let Ok(line) = line else { break };
                let v: serde_json::Value = serde_json::from_str(&line).unwrap();
                pending.push((v["id"].as_u64().unwrap(), v["text"].as_str().unwrap().to_owned()));
                if pending.len() >= block {
                    flush(&mut pending, &mut resp_w);
                }
            }
            flush(&mut pending, &mut resp_w);
        });
        BridgeEncoder::from_streams(BufReader::new(resp_r), req_w).unwrap()
    }

    #[test]
    fn handshake_and_shape() {
        let bridge = fake_bridge(6, 1, None);
        assert_eq!(bridge.handshake().model_name, "fake");
        assert_eq!(bridge.info().kind, EncoderKind::Bridged);
        assert_eq!(bridge.embed("hello").unwrap().dim(), 6);
    }

    #[test]
    fn out_of_order_responses_are_reassembled() {
        let bridge = fake_bridge(4, 7, None).with_window(16);
        let texts: Vec<String> = (0..1001).map(|i| format!("sentence {i}")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        // 994 is a multiple of the reversal block, so every block is flushed.
        let got = bridge.embed_batch(&refs[..994]).unwrap();
        let single = fake_bridge(4, 1, None);
        for (i, v) in got.iter().enumerate().step_by(97) {
            assert_eq!(v, &single.embed(refs[i]).unwrap());
        }
        // Ids continue across calls.
        let again = bridge.embed_batch(&refs[994..]).unwrap();
        assert_eq!(again[5], single.embed(refs[999]).unwrap());
    }

    #[test]
    fn deterministic_vectors_for_identical_text() {
        let bridge = fake_bridge(8, 1, None);
        assert_eq!(bridge.embed("same").unwrap(), bridge.embed("same").unwrap());
    }

    #[test]
    fn per_request_error_surfaces() {
        let bridge = fake_bridge(3, 1, Some("bad"));
        assert!(matches!(bridge.embed("bad"), Err(Error::BridgeUnavailable(_))));
    }

    #[test]
    fn bad_handshake() {
        let input = BufReader::new(&b"{\"protocol_version\":2,\"dim\":3,\"model_name\":\"x\"}\n"[..]);
        assert!(matches!(BridgeEncoder::from_streams(input, Vec::new()), Err(Error::BridgeUnavailable(_))));
        let empty = BufReader::new(&b""[..]);
        assert!(BridgeEncoder::from_streams(empty, Vec::new()).is_err());
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let input = BufReader::new(
            &b"{\"protocol_version\":1,\"dim\":3,\"model_name\":\"x\"}\n{\"id\":0,\"vec\":[1.0,2.0]}\n"[..],
        );
        let bridge = BridgeEncoder::from_streams(input, Vec::new()).unwrap();
        assert!(matches!(bridge.embed("t"), Err(Error::DimensionMismatch(2, 3))));
    }

    #[test]
    fn request_wire_format() {
        let line = serde_json::to_string(&Request { id: 7, text: "a \"q\"" }).unwrap();
        assert_eq!(line, r#"{"id":7,"text":"a \"q\""}"#);
    }

    #[test]
    fn missing_env_is_unavailable() {
        if std::env::var(BRIDGE_ENV).is_err() {
            assert!(matches!(BridgeEncoder::from_env(), Err(Error::BridgeUnavailable(_))));
        }
    }
}
