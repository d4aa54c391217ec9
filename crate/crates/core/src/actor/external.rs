//! External actors over line-delimited JSON (child process) or HTTP.
//!
//! Request: `{"step", "full_state", "abstract_state": {prop: bool},
//! "feedback", "allowed_actions"}`. Response: `{"action": name}`, where a
//! null action gives up on the current decision.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{DecisionContext, Policy, PolicyError};

/// One request/response exchange with an external agent.
pub trait Transport: Send {
    fn exchange(&mut self, request: &str) -> Result<String, PolicyError>;
}

/// Talks to a child process: one JSON request per stdin line, one JSON
/// response per stdout line.
pub struct StdioTransport {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl StdioTransport {
    pub fn spawn(program: &str, args: &[String], timeout: Duration) -> Result<Self, PolicyError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PolicyError::Transport(format!("cannot start `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            timeout,
        })
    }
}

impl Transport for StdioTransport {
    fn exchange(&mut self, request: &str) -> Result<String, PolicyError> {
        writeln!(self.stdin, "{request}")
            .and_then(|()| self.stdin.flush())
            .map_err(|e| PolicyError::Transport(e.to_string()))?;
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(PolicyError::Transport(e.to_string())),
            Err(RecvTimeoutError::Timeout) => Err(PolicyError::Timeout(self.timeout.as_millis() as u64)),
            Err(RecvTimeoutError::Disconnected) => Err(PolicyError::Transport("agent closed its output".into())),
        }
    }
}

impl Drop for StdioTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// POSTs each request to a single endpoint. Plain `http://` only.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    timeout: Duration,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(true)
            .build()
            .into();
        Self {
            agent,
            url: url.into(),
            timeout,
        }
    }
}

impl Transport for HttpTransport {
    fn exchange(&mut self, request: &str) -> Result<String, PolicyError> {
        let response = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(request);
        let mut response = match response {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(PolicyError::Timeout(self.timeout.as_millis() as u64)),
            Err(e) => return Err(PolicyError::Transport(e.to_string())),
        };
        response
            .body_mut()
            .read_to_string()
            .map_err(|e| PolicyError::Transport(e.to_string()))
    }
}

#[derive(Serialize)]
struct Request<'a> {
    step: usize,
    full_state: &'a str,
    abstract_state: Map<String, Value>,
    feedback: Option<&'a str>,
    allowed_actions: Option<&'a [String]>,
}

#[derive(Deserialize)]
struct Response {
    action: Option<String>,
}

pub struct ExternalPolicy {
    transport: Box<dyn Transport>,
    send_allowed: bool,
}

impl ExternalPolicy {
    pub fn new(transport: Box<dyn Transport>, send_allowed: bool) -> Self {
        Self {
            transport,
            send_allowed,
        }
    }
}

impl Policy for ExternalPolicy {
    fn name(&self) -> &str {
        "external"
    }

    fn wants_allowed_set(&self) -> bool {
        self.send_allowed
    }

    fn propose(&mut self, ctx: &DecisionContext<'_>) -> Result<Option<String>, PolicyError> {
        let abstract_state = ctx
            .vocab
            .observations()
            .iter()
            .zip(ctx.abstract_state.bits())
            .map(|(p, b)| (p.name.clone(), Value::Bool(*b)))
            .collect();
        let request = Request {
            step: ctx.step,
            full_state: ctx.full_state,
            abstract_state,
            feedback: ctx.feedback,
            allowed_actions: ctx.allowed_actions,
        };
        let body = serde_json::to_string(&request).map_err(|e| PolicyError::Malformed(e.to_string()))?;
        let reply = self.transport.exchange(&body)?;
        let response: Response =
            serde_json::from_str(&reply).map_err(|e| PolicyError::Malformed(format!("{e}: {reply}")))?;
        match response.action {
            Some(name) if ctx.vocab.action_index(&name).is_none() => Err(PolicyError::UnknownAction(name)),
            other => Ok(other),
        }
    }
}
