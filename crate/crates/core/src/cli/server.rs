//! Child side of the denoiser protocol, for use with `--prior external`.

use std::io::{self, BufReader, BufWriter, Write};

use log::debug;

use super::{usage, CliError, ServerArgs, UsageError};
use crate::error::{Error, ExternalError};
use crate::image::{gaussian_smooth, Image};
use crate::priors::protocol::{encode_reply, read_request, write_frame, FrameError};
use crate::priors::{tv_denoise, TvParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServerMode {
    /// Echo the deconvolved image.
    Identity,
    Gaussian { sigma: f64 },
    Tv { weight: f64, inner_iters: usize },
}

impl ServerMode {
    pub fn apply(&self, deconvolved: &Image) -> crate::Result<Image> {
        match *self {
            ServerMode::Identity => Ok(deconvolved.clone()),
            ServerMode::Gaussian { sigma } => gaussian_smooth(deconvolved, sigma),
            ServerMode::Tv { weight, inner_iters } => {
                tv_denoise(deconvolved, weight, inner_iters, TvParams::default().step)
            }
        }
    }
}

fn mode(args: &ServerArgs) -> Result<ServerMode, UsageError> {
    let m = match args.mode.as_str() {
        "identity" => ServerMode::Identity,
        "gaussian" => {
            if !(args.sigma.is_finite() && args.sigma > 0.0) {
                return Err(UsageError(format!("--sigma must be > 0, got {}", args.sigma)));
            }
            ServerMode::Gaussian { sigma: args.sigma }
        }
        "tv" => {
            TvParams::uniform(args.weight).validate().map_err(usage)?;
            ServerMode::Tv {
                weight: args.weight,
                inner_iters: args.tv_iters,
            }
        }
        other => {
            return Err(UsageError(format!(
                "unknown mode `{other}` (expected identity, gaussian or tv)"
            )))
        }
    };
    Ok(m)
}

/// Answers requests until the input stream closes.
pub fn serve(mode: ServerMode, input: impl io::Read, output: impl Write) -> crate::Result<usize> {
    let mut reader = BufReader::new(input);
    let mut writer = BufWriter::new(output);
    let mut served = 0;
    loop {
        let request = match read_request(&mut reader) {
            Ok(Some(r)) => r,
            Ok(None) => return Ok(served),
            Err(FrameError::Io(e)) => return Err(ExternalError::Pipe(e).into()),
            Err(e) => return Err(Error::Format(format!("bad request: {e}"))),
        };
        debug!("request {}: level {}, {:?}", served + 1, request.level, request.deconvolved.dims());
        let reply = mode.apply(&request.deconvolved)?;
        write_frame(&mut writer, &encode_reply(&reply)).map_err(ExternalError::Pipe)?;
        writer.flush().map_err(ExternalError::Pipe)?;
        served += 1;
    }
}

pub(super) fn run(args: ServerArgs) -> Result<(), CliError> {
    let mode = mode(&args)?;
    let stdin = io::stdin().lock();
    let stdout = io::stdout().lock();
    let served = serve(mode, stdin, stdout)?;
    debug!("served {served} requests");
    Ok(())
}
