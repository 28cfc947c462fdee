use std::io::{BufReader, BufWriter};
use std::net::{TcpListener, TcpStream};

use super::wire::{read_frame, write_frame, Frame, WireError, PROTOCOL_VERSION};
use crate::coordinates::coordinate;
use crate::model::build_problem;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkerOptions {
    /// Fault injection: exit the process without replying once this many
    /// jobs have been received.
    pub crash_after: Option<usize>,
}

enum Outcome {
    Closed,
    Shutdown,
}

/// Accept coordinators one at a time until one sends `shutdown`.
pub fn serve_worker(listener: TcpListener, opts: WorkerOptions) -> Result<(), WireError> {
    let mut jobs = 0usize;
    for stream in listener.incoming() {
        let stream = stream?;
        match serve_connection(stream, opts, &mut jobs) {
            Ok(Outcome::Shutdown) => return Ok(()),
            Ok(Outcome::Closed) | Err(_) => continue,
        }
    }
    Ok(())
}

fn reject(w: &mut BufWriter<TcpStream>, msg: String) -> Result<Outcome, WireError> {
    let _ = write_frame(w, &Frame::Error { msg });
    Ok(Outcome::Closed)
}

fn serve_connection(stream: TcpStream, opts: WorkerOptions, jobs: &mut usize) -> Result<Outcome, WireError> {
    stream.set_nodelay(true)?;
    let mut r = BufReader::new(stream.try_clone()?);
    let mut w = BufWriter::new(stream);
    match read_frame(&mut r)? {
        Frame::Hello { version } if version == PROTOCOL_VERSION => write_frame(&mut w, &Frame::Ready)?,
        Frame::Hello { version } => {
            return reject(&mut w, format!("protocol version {version} not supported (expected {PROTOCOL_VERSION})"))
        }
        Frame::Shutdown => return Ok(Outcome::Shutdown),
        other => return reject(&mut w, format!("expected hello, got {other:?}")),
    }
    let (program, cfg) = match read_frame(&mut r)? {
        Frame::Header {
            first_stage,
            second_stage,
            config,
        } => match build_problem(first_stage, second_stage) {
            Ok(p) => (p, config),
            Err(e) => return reject(&mut w, format!("invalid program: {e}")),
        },
        Frame::Shutdown => return Ok(Outcome::Shutdown),
        _ => return reject(&mut w, "expected header".into()),
    };
    loop {
        match read_frame(&mut r) {
            Ok(Frame::Job { k, mut scenario }) => {
                *jobs += 1;
                if opts.crash_after.is_some_and(|n| *jobs > n) {
                    std::process::exit(17);
                }
                scenario.k = k;
                if let Err(e) = program.check_scenario(&scenario) {
                    return reject(&mut w, format!("job {k}: {e}"));
                }
                write_frame(&mut w, &Frame::result(&coordinate(&program, &scenario, &cfg)))?;
            }
            Ok(Frame::Shutdown) => return Ok(Outcome::Shutdown),
            Ok(other) => return reject(&mut w, format!("expected job, got {other:?}")),
            Err(WireError::Io(e)) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(Outcome::Closed),
            Err(e) => {
                let _ = write_frame(&mut w, &Frame::Error { msg: e.to_string() });
                return Err(e);
            }
        }
    }
}
