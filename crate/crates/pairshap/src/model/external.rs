//! Predictor backed by a child process speaking a line protocol over
//! stdin/stdout: the child prints `READY <feature_count>` on startup, then
//! answers each `PREDICT <n>` request (followed by n CSV rows) with n lines,
//! one decimal number per line.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::model::{OutputKind, Predictor};

/// How to start and talk to the child process.
#[derive(Debug, Clone)]
pub struct ExternalConfig {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    /// Rows per PREDICT request; large batches are split into chunks.
    pub batch_size: usize,
    /// Maximum wait for the handshake or any reply line.
    pub timeout: Duration,
    pub output_kind: OutputKind,
}

impl ExternalConfig {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            batch_size: 256,
            timeout: Duration::from_secs(30),
            output_kind: OutputKind::Regression,
        }
    }
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

/// External predictor. One process is spawned up front and reused across
/// calls; access is serialized so callers may share it freely.
pub struct ExternalPredictor {
    config: ExternalConfig,
    session: Mutex<Session>,
    feature_count: usize,
}

impl ExternalPredictor {
    pub fn spawn(config: ExternalConfig) -> Result<Self> {
        if config.command.is_empty() {
            return Err(Error::InvalidConfig {
                detail: "external predictor command is empty".into(),
            });
        }
        let display = config.command.join(" ");
        let mut child = Command::new(&config.command[0])
            .args(&config.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|source| Error::ProcessSpawn {
                command: display.clone(),
                source,
            })?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");

        // Reads happen on a dedicated thread so replies can be awaited with a
        // timeout; the thread exits when the child closes stdout.
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let mut session = Session {
            child,
            stdin,
            lines: rx,
        };
        let handshake = next_line(&mut session, config.timeout)?;
        let feature_count = parse_handshake(&handshake)?;
        Ok(Self {
            config,
            session: Mutex::new(session),
            feature_count,
        })
    }
}

fn parse_handshake(line: &str) -> Result<usize> {
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next()) {
        (Some("READY"), Some(n)) => n.parse().map_err(|_| Error::ProcessFailure {
            detail: format!("bad handshake line: {line:?}"),
        }),
        _ => Err(Error::ProcessFailure {
            detail: format!("expected READY handshake, got {line:?}"),
        }),
    }
}

fn next_line(session: &mut Session, timeout: Duration) -> Result<String> {
    match session.lines.recv_timeout(timeout) {
        Ok(Ok(line)) => Ok(line),
        Ok(Err(e)) => Err(Error::ProcessFailure {
            detail: format!("read error: {e}"),
        }),
        Err(RecvTimeoutError::Timeout) => Err(Error::ProcessTimeout {
            seconds: timeout.as_secs(),
        }),
        Err(RecvTimeoutError::Disconnected) => {
            let status = session
                .child
                .try_wait()
                .ok()
                .flatten()
                .map(|s| format!("exit status {s}"))
                .unwrap_or_else(|| "stream closed".into());
            Err(Error::ProcessFailure {
                detail: format!("process stopped replying ({status})"),
            })
        }
    }
}

impl Predictor for ExternalPredictor {
    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn output_kind(&self) -> OutputKind {
        self.config.output_kind
    }

    fn predict(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>> {
        for row in batch {
            if row.len() != self.feature_count {
                return Err(Error::DimensionMismatch {
                    expected: self.feature_count,
                    got: row.len(),
                });
            }
        }
        let mut session = self.session.lock().expect("session lock");
        let mut out = Vec::with_capacity(batch.len());
        for chunk in batch.chunks(self.config.batch_size.max(1)) {
            let mut request = format!("PREDICT {}\n", chunk.len());
            for row in chunk {
                let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                request.push_str(&cells.join(","));
                request.push('\n');
            }
            session
                .stdin
                .write_all(request.as_bytes())
                .and_then(|_| session.stdin.flush())
                .map_err(|e| Error::ProcessFailure {
                    detail: format!("write failed: {e}"),
                })?;
            for i in 0..chunk.len() {
                let line = next_line(&mut session, self.config.timeout).map_err(|e| match e {
                    // A short reply surfaces as a closed stream once the child
                    // stops producing lines for this request.
                    Error::ProcessFailure { .. } => Error::ReplyCount {
                        expected: chunk.len(),
                        got: i,
                    },
                    other => other,
                })?;
                let trimmed = line.trim();
                let v: f64 = trimmed.parse().map_err(|_| Error::ReplyParse {
                    line: i,
                    value: trimmed.to_string(),
                })?;
                out.push(v);
            }
        }
        Ok(out)
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        if let Ok(mut session) = self.session.lock() {
            let _ = session.child.kill();
            let _ = session.child.wait();
        }
    }
}
