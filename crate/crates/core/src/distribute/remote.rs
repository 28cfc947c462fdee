use std::collections::VecDeque;
use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use thiserror::Error;

use super::wire::{read_frame, write_frame, Frame, PROTOCOL_VERSION};
use crate::coordinates::{Coordinate, CoordinateConfig};
use crate::model::{ModelError, Scenario, StochasticProgram};

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("no worker reachable: {0}")]
    NoWorkers(String),
    #[error("all workers lost with {} of {total} results in hand", completed.len())]
    AllWorkersLost { completed: Vec<Coordinate>, total: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RemoteOptions {
    pub connect_timeout: Duration,
    /// Send `shutdown` to every worker once the batch is complete.
    pub shutdown_workers: bool,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        RemoteOptions {
            connect_timeout: Duration::from_secs(5),
            shutdown_workers: false,
        }
    }
}

struct Shared {
    queue: VecDeque<usize>,
    results: Vec<Option<Coordinate>>,
    remaining: usize,
    connected: usize,
}

struct Board {
    state: Mutex<Shared>,
    changed: Condvar,
}

impl Board {
    /// Next job index, or `None` once every result is in.
    fn take(&self) -> Option<usize> {
        let mut s = self.state.lock().unwrap();
        loop {
            if s.remaining == 0 {
                return None;
            }
            if let Some(i) = s.queue.pop_front() {
                return Some(i);
            }
            s = self.changed.wait(s).unwrap();
        }
    }

    fn finish(&self, i: usize, c: Coordinate) {
        let mut s = self.state.lock().unwrap();
        if s.results[i].is_none() {
            s.results[i] = Some(c);
            s.remaining -= 1;
        }
        self.changed.notify_all();
    }

    fn requeue(&self, i: Option<usize>) {
        let mut s = self.state.lock().unwrap();
        if let Some(i) = i {
            if s.results[i].is_none() {
                s.queue.push_front(i);
            }
        }
        self.changed.notify_all();
    }
}

fn connect(endpoint: &str, timeout: Duration) -> Result<TcpStream, String> {
    let addrs = endpoint.to_socket_addrs().map_err(|e| format!("{endpoint}: {e}"))?;
    let mut last = format!("{endpoint}: no address");
    for a in addrs {
        match TcpStream::connect_timeout(&a, timeout) {
            Ok(s) => return Ok(s),
            Err(e) => last = format!("{endpoint}: {e}"),
        }
    }
    Err(last)
}

type Conn = (BufReader<TcpStream>, BufWriter<TcpStream>);

fn handshake(stream: TcpStream, header: &Frame) -> Result<Conn, String> {
    stream.set_nodelay(true).map_err(|e| e.to_string())?;
    let mut r = BufReader::new(stream.try_clone().map_err(|e| e.to_string())?);
    let mut w = BufWriter::new(stream);
    write_frame(&mut w, &Frame::Hello { version: PROTOCOL_VERSION }).map_err(|e| e.to_string())?;
    match read_frame(&mut r).map_err(|e| e.to_string())? {
        Frame::Ready => {}
        Frame::Error { msg } => return Err(msg),
        other => return Err(format!("expected ready, got {other:?}")),
    }
    write_frame(&mut w, header).map_err(|e| e.to_string())?;
    Ok((r, w))
}

fn drive(board: &Board, conn: &mut Conn, scenarios: &[Scenario], in_flight: &mut Option<usize>) -> Result<(), String> {
    let (r, w) = conn;
    while let Some(i) = board.take() {
        *in_flight = Some(i);
        let k = scenarios[i].k;
        write_frame(w, &Frame::Job { k, scenario: scenarios[i].clone() }).map_err(|e| e.to_string())?;
        match read_frame(r).map_err(|e| e.to_string())? {
            Frame::Result { k: got, kappa, sigma, status } if got == k => {
                board.finish(i, Coordinate { k, kappa, sigma, status });
                *in_flight = None;
            }
            Frame::Error { msg } => return Err(msg),
            other => return Err(format!("unexpected reply to job {k}: {other:?}")),
        }
    }
    Ok(())
}

/// Same output as [`super::run_parallel_coordinates`], computed by remote
/// workers. A job whose worker disconnects goes back on the queue; the first
/// result for an index wins.
pub fn coordinate_remote(
    endpoints: &[String],
    program: &StochasticProgram,
    scenarios: &[Scenario],
    cfg: &CoordinateConfig,
    opts: &RemoteOptions,
) -> Result<Vec<Coordinate>, RemoteError> {
    if endpoints.is_empty() {
        return Err(RemoteError::NoWorkers("no endpoints given".into()));
    }
    if scenarios.is_empty() {
        return Ok(Vec::new());
    }
    let prepared = cfg.prepare(program, scenarios)?;
    let header = Frame::Header {
        first_stage: prepared.first_stage().clone(),
        second_stage: prepared.template().clone(),
        config: *cfg,
    };
    let board = Board {
        state: Mutex::new(Shared {
            queue: (0..scenarios.len()).collect(),
            results: vec![None; scenarios.len()],
            remaining: scenarios.len(),
            connected: 0,
        }),
        changed: Condvar::new(),
    };
    let failures: Vec<String> = thread::scope(|scope| {
        let handles: Vec<_> = endpoints
            .iter()
            .map(|ep| {
                let (board, header) = (&board, &header);
                scope.spawn(move || -> Result<(), String> {
                    let stream = connect(ep, opts.connect_timeout)?;
                    let mut conn = handshake(stream, header)?;
                    board.state.lock().unwrap().connected += 1;
                    let mut in_flight = None;
                    let outcome = drive(board, &mut conn, scenarios, &mut in_flight);
                    match outcome {
                        Ok(()) => {
                            if opts.shutdown_workers {
                                let _ = write_frame(&mut conn.1, &Frame::Shutdown);
                            }
                            Ok(())
                        }
                        Err(e) => {
                            board.requeue(in_flight);
                            Err(format!("{ep}: {e}"))
                        }
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .filter_map(|h| h.join().expect("coordinator thread panicked").err())
            .collect()
    });
    let state = board.state.into_inner().unwrap();
    if state.remaining == 0 {
        return Ok(state.results.into_iter().map(|c| c.expect("complete")).collect());
    }
    if state.connected == 0 {
        return Err(RemoteError::NoWorkers(failures.join("; ")));
    }
    Err(RemoteError::AllWorkersLost {
        completed: state.results.into_iter().flatten().collect(),
        total: scenarios.len(),
    })
}
