//! Where the flow for each global iteration comes from.

use std::io::Write;
use std::process::{Command, Stdio};
use std::thread;

use crate::error::{Error, ExternalError, Result};
use crate::flow::MotionFlowMap;
use crate::image::Image;
use crate::io::{encode_png, BitDepth};

pub trait FlowProvider {
    /// Flow for the image entering global iteration `iteration` (1-based).
    fn flow_for(&mut self, image: &Image, iteration: usize) -> Result<MotionFlowMap>;
}

impl<F> FlowProvider for F
where
    F: FnMut(&Image, usize) -> Result<MotionFlowMap>,
{
    fn flow_for(&mut self, image: &Image, iteration: usize) -> Result<MotionFlowMap> {
        self(image, iteration)
    }
}

/// Returns the same stored map every iteration.
#[derive(Debug, Clone)]
pub struct StoredFlow(pub MotionFlowMap);

impl FlowProvider for StoredFlow {
    fn flow_for(&mut self, image: &Image, _iteration: usize) -> Result<MotionFlowMap> {
        self.0.ensure_matches(image.width(), image.height())?;
        Ok(self.0.clone())
    }
}

/// Runs an estimator per iteration: the image goes to its stdin as a 16-bit
/// PNG, an `MFLO` flow is read back from its stdout.
#[derive(Debug, Clone)]
pub struct ExternalFlowEstimator {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalFlowEstimator {
    pub fn from_command_line(line: &str) -> Result<Self> {
        let mut words = shell_words::split(line)
            .map_err(|e| Error::Parameter(format!("cannot parse command `{line}`: {e}")))?;
        if words.is_empty() {
            return Err(Error::Parameter("empty flow command".into()));
        }
        let program = words.remove(0);
        Ok(ExternalFlowEstimator { program, args: words })
    }
}

impl FlowProvider for ExternalFlowEstimator {
    fn flow_for(&mut self, image: &Image, _iteration: usize) -> Result<MotionFlowMap> {
        let png = encode_png(image, BitDepth::Sixteen)?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| ExternalError::Spawn {
                command: self.program.clone(),
                source,
            })?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let feeder = thread::spawn(move || stdin.write_all(&png));
        let output = child.wait_with_output().map_err(ExternalError::Pipe)?;
        // a child that ignores its input may close the pipe early
        let _ = feeder.join();
        if !output.status.success() {
            return Err(ExternalError::Failed(format!("flow command exited with {}", output.status)).into());
        }
        let flow = MotionFlowMap::from_bytes(&output.stdout)
            .map_err(|e| ExternalError::MalformedReply(format!("flow command output: {e}")))?;
        flow.ensure_matches(image.width(), image.height())?;
        Ok(flow)
    }
}
