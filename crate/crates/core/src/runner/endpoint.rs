//! Transports carrying one request line and one response line per decision.

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use thiserror::Error;

use super::wire::{PolicyRequest, PolicyResponse};

#[derive(Debug, Error)]
pub enum EndpointError {
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("policy closed the connection")]
    Closed,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A policy reachable by exchanging newline-terminated JSON records.
pub trait PolicyEndpoint {
    /// Sends one request line and waits for one response line.
    fn exchange(&mut self, request: &str, timeout: Duration) -> Result<String, EndpointError>;
}

impl<E: PolicyEndpoint + ?Sized> PolicyEndpoint for Box<E> {
    fn exchange(&mut self, request: &str, timeout: Duration) -> Result<String, EndpointError> {
        (**self).exchange(request, timeout)
    }
}

/// Decision logic answering with raw action text.
pub trait Policy {
    fn act(&mut self, request: &PolicyRequest) -> String;
}

impl<F: FnMut(&PolicyRequest) -> String> Policy for F {
    fn act(&mut self, request: &PolicyRequest) -> String {
        self(request)
    }
}

/// Answers one request line; requests that do not decode get an empty action.
pub fn answer_line<P: Policy + ?Sized>(policy: &mut P, line: &str) -> String {
    let text = match serde_json::from_str::<PolicyRequest>(line) {
        Ok(req) => policy.act(&req),
        Err(_) => String::new(),
    };
    serde_json::to_string(&PolicyResponse::new(text)).expect("response serializes")
}

/// Runs a policy in the calling thread, still going through the wire encoding.
pub struct InProcess<P>(pub P);

impl<P: Policy> PolicyEndpoint for InProcess<P> {
    fn exchange(&mut self, request: &str, _timeout: Duration) -> Result<String, EndpointError> {
        Ok(answer_line(&mut self.0, request))
    }
}

/// Serves a policy over a line stream until the input ends.
pub fn serve<P: Policy + ?Sized>(policy: &mut P, input: impl BufRead, mut output: impl Write) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(output, "{}", answer_line(policy, &line))?;
        output.flush()?;
    }
    Ok(())
}

/// A policy process spawned through the shell, spoken to over stdin/stdout.
/// The shell gets its own process group so dropping the endpoint also stops
/// anything it started.
pub struct ExecEndpoint {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<io::Result<String>>,
}

impl ExecEndpoint {
    pub fn spawn(command: &str) -> io::Result<Self> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(command).stdin(Stdio::piped()).stdout(Stdio::piped());
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
        let mut child = cmd.spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { child, stdin, lines })
    }
}

impl PolicyEndpoint for ExecEndpoint {
    fn exchange(&mut self, request: &str, timeout: Duration) -> Result<String, EndpointError> {
        writeln!(self.stdin, "{request}")?;
        self.stdin.flush()?;
        match self.lines.recv_timeout(timeout) {
            Ok(line) => Ok(line?),
            Err(RecvTimeoutError::Timeout) => Err(EndpointError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(EndpointError::Closed),
        }
    }
}

impl Drop for ExecEndpoint {
    fn drop(&mut self) {
        #[cfg(unix)]
        if let Ok(pgid) = libc::pid_t::try_from(self.child.id()) {
            // SAFETY: signals only the group created for this child.
            unsafe {
                libc::kill(-pgid, libc::SIGKILL);
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct TcpEndpoint {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl TcpEndpoint {
    pub fn connect(addr: &str) -> io::Result<Self> {
        let writer = TcpStream::connect(addr)?;
        writer.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(writer.try_clone()?),
            writer,
        })
    }
}

impl PolicyEndpoint for TcpEndpoint {
    fn exchange(&mut self, request: &str, timeout: Duration) -> Result<String, EndpointError> {
        writeln!(self.writer, "{request}")?;
        self.writer.flush()?;
        self.reader.get_ref().set_read_timeout(Some(timeout))?;
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => Err(EndpointError::Closed),
            Ok(_) => Ok(line.trim_end_matches(['\r', '\n']).to_string()),
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                Err(EndpointError::Timeout(timeout))
            }
            Err(e) => Err(e.into()),
        }
    }
}
