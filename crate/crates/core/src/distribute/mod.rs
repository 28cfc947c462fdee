//! Parallel coordinate computation: an in-process thread pool and a TCP
//! coordinator/worker pair speaking length-prefixed JSON frames.

mod pool;
mod remote;
pub mod wire;
mod worker;

pub use pool::run_parallel_coordinates;
pub use remote::{coordinate_remote, RemoteError, RemoteOptions};
pub use worker::{serve_worker, WorkerOptions};
