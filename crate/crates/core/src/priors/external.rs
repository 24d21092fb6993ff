use std::io::BufReader;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::debug;

use super::protocol::{self, FrameError};
use super::DenoiserPrior;
use crate::error::{Error, ExternalError, Result};
use crate::image::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalDenoiserConfig {
    pub program: String,
    pub args: Vec<String>,
    /// Per-reply deadline.
    pub timeout: Duration,
}

impl ExternalDenoiserConfig {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        ExternalDenoiserConfig {
            program: program.into(),
            args,
            timeout: Duration::from_secs(60),
        }
    }

    /// Splits a shell-style command line into program and arguments.
    pub fn from_command_line(line: &str) -> Result<Self> {
        let mut words = shell_words::split(line)
            .map_err(|e| Error::Parameter(format!("cannot parse command `{line}`: {e}")))?;
        if words.is_empty() {
            return Err(Error::Parameter("empty denoiser command".into()));
        }
        let program = words.remove(0);
        Ok(Self::new(program, words))
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn display(&self) -> String {
        std::iter::once(self.program.as_str())
            .chain(self.args.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

enum ReaderMsg {
    Header((usize, usize, usize)),
    Block(Image),
    Failed(FrameError),
}

struct Session {
    child: Child,
    requests: Option<Sender<Vec<u8>>>,
    replies: Receiver<ReaderMsg>,
    writer: Option<JoinHandle<std::io::Result<()>>>,
}

impl Session {
    fn spawn(cfg: &ExternalDenoiserConfig) -> Result<Self> {
        let mut child = Command::new(&cfg.program)
            .args(&cfg.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| ExternalError::Spawn {
                command: cfg.display(),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        let (req_tx, req_rx) = mpsc::channel::<Vec<u8>>();
        let writer = thread::spawn(move || write_loop(stdin, req_rx));

        let (rep_tx, rep_rx) = mpsc::channel();
        thread::spawn(move || {
            let mut r = BufReader::new(stdout);
            loop {
                let dims = match protocol::read_reply_header(&mut r) {
                    Ok(d) => d,
                    Err(e) => {
                        let _ = rep_tx.send(ReaderMsg::Failed(e));
                        return;
                    }
                };
                if rep_tx.send(ReaderMsg::Header(dims)).is_err() {
                    return;
                }
                let msg = match protocol::read_block(&mut r, dims) {
                    Ok(img) => ReaderMsg::Block(img),
                    Err(e) => ReaderMsg::Failed(e),
                };
                let failed = matches!(msg, ReaderMsg::Failed(_));
                if rep_tx.send(msg).is_err() || failed {
                    return;
                }
            }
        });
        debug!("spawned denoiser `{}` (pid {})", cfg.display(), child.id());
        Ok(Session {
            child,
            requests: Some(req_tx),
            replies: rep_rx,
            writer: Some(writer),
        })
    }

    fn recv(&mut self, deadline: Instant, timeout: Duration) -> Result<ReaderMsg> {
        let left = deadline.saturating_duration_since(Instant::now());
        match self.replies.recv_timeout(left) {
            Ok(msg) => Ok(msg),
            Err(RecvTimeoutError::Timeout) => Err(ExternalError::Timeout {
                seconds: timeout.as_secs_f64(),
            }
            .into()),
            Err(RecvTimeoutError::Disconnected) => Err(ExternalError::Exited.into()),
        }
    }

    fn failure(&mut self, e: FrameError) -> Error {
        match e {
            FrameError::Eof => {
                // prefer a write-side error if the child hung up on us
                self.requests.take();
                if let Some(Err(w)) = self.writer.take().map(|h| h.join().unwrap_or(Ok(()))) {
                    if w.kind() != std::io::ErrorKind::BrokenPipe {
                        return ExternalError::Pipe(w).into();
                    }
                }
                ExternalError::Exited.into()
            }
            FrameError::Malformed(m) => ExternalError::MalformedReply(m).into(),
            FrameError::Io(e) => ExternalError::Pipe(e).into(),
        }
    }

    fn round_trip(&mut self, frame: Vec<u8>, expected: (usize, usize, usize), timeout: Duration) -> Result<Image> {
        let deadline = Instant::now() + timeout;
        self.requests
            .as_ref()
            .expect("live session")
            .send(frame)
            .map_err(|_| ExternalError::Exited)?;
        let got = match self.recv(deadline, timeout)? {
            ReaderMsg::Header(dims) => dims,
            ReaderMsg::Failed(e) => return Err(self.failure(e)),
            ReaderMsg::Block(_) => unreachable!("block before header"),
        };
        if got != expected {
            return Err(ExternalError::ShapeMismatch { expected, got }.into());
        }
        match self.recv(deadline, timeout)? {
            ReaderMsg::Block(img) => Ok(img),
            ReaderMsg::Failed(e) => Err(self.failure(e)),
            ReaderMsg::Header(_) => unreachable!("header twice"),
        }
    }

    fn shutdown(mut self) {
        self.requests.take();
        let grace = Instant::now() + Duration::from_millis(500);
        loop {
            match self.child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) if Instant::now() < grace => thread::sleep(Duration::from_millis(5)),
                _ => {
                    let _ = self.child.kill();
                    let _ = self.child.wait();
                    break;
                }
            }
        }
    }

    fn kill(mut self) {
        self.requests.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn write_loop(mut stdin: ChildStdin, frames: Receiver<Vec<u8>>) -> std::io::Result<()> {
    for frame in frames {
        protocol::write_frame(&mut stdin, &frame)?;
    }
    Ok(())
}

/// Denoiser served by a child process over the framed protocol in
/// [`protocol`]. The child is spawned on first use and kept for every
/// level of the solve; any failure terminates it and the next call spawns
/// a fresh one.
pub struct ExternalDenoiser {
    cfg: ExternalDenoiserConfig,
    session: Option<Session>,
    label: String,
}

impl ExternalDenoiser {
    pub fn new(cfg: ExternalDenoiserConfig) -> Self {
        let label = format!("external({})", cfg.display());
        ExternalDenoiser {
            cfg,
            session: None,
            label,
        }
    }

    pub fn config(&self) -> &ExternalDenoiserConfig {
        &self.cfg
    }
}

impl DenoiserPrior for ExternalDenoiser {
    fn denoise(&mut self, deconvolved: &Image, observed: &Image, level: usize) -> Result<Image> {
        deconvolved.ensure_same_shape(observed, "external prior")?;
        if self.session.is_none() {
            self.session = Some(Session::spawn(&self.cfg)?);
        }
        let frame = protocol::encode_request(level, deconvolved, observed);
        let session = self.session.as_mut().unwrap();
        match session.round_trip(frame, deconvolved.dims(), self.cfg.timeout) {
            Ok(img) => Ok(img),
            Err(e) => {
                self.session.take().unwrap().kill();
                Err(e)
            }
        }
    }

    fn name(&self) -> &str {
        &self.label
    }
}

impl Drop for ExternalDenoiser {
    fn drop(&mut self) {
        if let Some(s) = self.session.take() {
            s.shutdown();
        }
    }
}

/// One-shot convenience: spawns the child, denoises once, shuts it down.
pub fn external_denoise(
    deconvolved: &Image,
    observed: &Image,
    level: usize,
    cfg: &ExternalDenoiserConfig,
) -> Result<Image> {
    ExternalDenoiser::new(cfg.clone()).denoise(deconvolved, observed, level)
}
