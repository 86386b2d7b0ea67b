//! Adapter for an external simulator/detector process speaking the
//! line-delimited protocol in [`super::protocol`].

use std::collections::VecDeque;
use std::io::{BufRead, BufReader};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use super::protocol::{parse_line, write_line, Hello, HelloReply, Request, Response, PROTOCOL_VERSION};
use super::SystemUnderTest;
use crate::error::{Error, Result};
use crate::types::{EvaluatedTestCase, ImageCharacteristics};

const STDERR_TAIL: usize = 20;

#[derive(Debug, Clone)]
pub struct ExternalSutOptions {
    pub key_points: usize,
    /// Maximum wait for any single reply.
    pub timeout: Duration,
}

impl Default for ExternalSutOptions {
    fn default() -> Self {
        Self { key_points: crate::types::DEFAULT_KEY_POINTS, timeout: Duration::from_secs(30) }
    }
}

struct Channel {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    /// Set after the first failure; the stream can no longer be trusted.
    broken: Option<String>,
}

/// External process SUT. Requests are serialized over one process channel,
/// so concurrent callers are answered in the order they acquire it.
pub struct ExternalSut {
    command: String,
    options: ExternalSutOptions,
    channel: Mutex<Channel>,
    stderr: Arc<Mutex<VecDeque<String>>>,
    evaluations: AtomicU64,
}

impl std::fmt::Debug for ExternalSut {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalSut").field("command", &self.command).finish_non_exhaustive()
    }
}

impl ExternalSut {
    /// Runs `command` through `sh -c` and performs the handshake.
    pub fn spawn(command: &str, options: ExternalSutOptions) -> Result<Self> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(command);
        Self::from_command(cmd, command.to_string(), options)
    }

    pub fn from_command(mut cmd: Command, label: String, options: ExternalSutOptions) -> Result<Self> {
        cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
        let mut child = cmd
            .spawn()
            .map_err(|e| Error::Transport(format!("cannot start '{label}': {e}")))?;
        let stdin = child.stdin.take().ok_or_else(|| Error::Transport("child stdin unavailable".into()))?;
        let stdout = child.stdout.take().ok_or_else(|| Error::Transport("child stdout unavailable".into()))?;
        let stderr_pipe = child.stderr.take().ok_or_else(|| Error::Transport("child stderr unavailable".into()))?;

        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        let stderr = Arc::new(Mutex::new(VecDeque::new()));
        let tail = Arc::clone(&stderr);
        thread::spawn(move || {
            for line in BufReader::new(stderr_pipe).lines().map_while(std::io::Result::ok) {
                let mut t = tail.lock().unwrap_or_else(|e| e.into_inner());
                if t.len() == STDERR_TAIL {
                    t.pop_front();
                }
                t.push_back(line);
            }
        });

        let sut = Self {
            command: label,
            options,
            channel: Mutex::new(Channel { child, stdin, lines: rx, broken: None }),
            stderr,
            evaluations: AtomicU64::new(0),
        };
        sut.handshake()?;
        Ok(sut)
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn diagnostic(&self, msg: String) -> String {
        let tail = self.stderr.lock().unwrap_or_else(|e| e.into_inner());
        if tail.is_empty() {
            msg
        } else {
            let joined: Vec<&str> = tail.iter().map(String::as_str).collect();
            format!("{msg}; stderr: {}", joined.join(" | "))
        }
    }

    fn read_reply(&self, ch: &mut Channel) -> Result<String> {
        match ch.lines.recv_timeout(self.options.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(Error::Transport(format!("reading from '{}': {e}", self.command))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Transport(format!(
                "'{}' did not answer within {:?}",
                self.command, self.options.timeout
            ))),
            Err(RecvTimeoutError::Disconnected) => {
                // give the stderr reader a moment to collect the last words
                thread::sleep(Duration::from_millis(20));
                let status = ch.child.try_wait().ok().flatten();
                Err(Error::Transport(match status {
                    Some(s) => format!("'{}' exited ({s})", self.command),
                    None => format!("'{}' closed its output", self.command),
                }))
            }
        }
    }

    /// Sends one record and parses one reply, poisoning the channel on failure.
    fn exchange<T, F>(&self, request: &impl serde::Serialize, parse: F) -> Result<T>
    where
        F: FnOnce(&str) -> Result<T>,
    {
        let mut ch = self.channel.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(reason) = &ch.broken {
            return Err(Error::Transport(format!("channel unusable after earlier failure: {reason}")));
        }
        let result = write_line(&mut ch.stdin, request)
            .map_err(|e| Error::Transport(format!("writing to '{}': {e}", self.command)))
            .and_then(|()| self.read_reply(&mut ch))
            .and_then(|line| parse(&line));
        if let Err(e) = &result {
            ch.broken = Some(e.to_string());
        }
        result.map_err(|e| match e {
            Error::Transport(m) => Error::Transport(self.diagnostic(m)),
            Error::Protocol(m) => Error::Protocol(self.diagnostic(m)),
            other => other,
        })
    }

    fn handshake(&self) -> Result<()> {
        let hello = Hello { hello: PROTOCOL_VERSION, k: self.options.key_points };
        self.exchange(&hello, |line| {
            let reply: HelloReply = parse_line(line, "handshake reply")?;
            if reply.ok {
                Ok(())
            } else {
                Err(Error::Protocol("external process refused the handshake".into()))
            }
        })
    }
}

impl SystemUnderTest for ExternalSut {
    fn key_points(&self) -> usize {
        self.options.key_points
    }

    fn evaluate(&self, ic: &ImageCharacteristics) -> Result<EvaluatedTestCase> {
        let k = self.options.key_points;
        let test = self.exchange(&Request::from(ic), |line| {
            let resp: Response = parse_line(line, "response")?;
            resp.into_test(*ic, k)
        })?;
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        Ok(test)
    }

    fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }
}

impl Drop for ExternalSut {
    fn drop(&mut self) {
        let ch = self.channel.get_mut().unwrap_or_else(|e| e.into_inner());
        let _ = ch.child.kill();
        let _ = ch.child.wait();
    }
}
