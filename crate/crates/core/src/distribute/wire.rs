//! Frames: a 4-byte big-endian length, then that many bytes of JSON.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coordinates::{Coordinate, CoordinateConfig, CoordinateStatus};
use crate::model::{FirstStage, Scenario, ScenarioTemplate};

pub const PROTOCOL_VERSION: u32 = 1;
/// Frames larger than this are treated as protocol violations.
pub const MAX_FRAME: u32 = 256 << 20;

#[derive(Debug, Error)]
pub enum WireError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(u32),
    #[error("bad frame: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Frame {
    Hello {
        version: u32,
    },
    Ready,
    Header {
        first_stage: FirstStage,
        second_stage: ScenarioTemplate,
        config: CoordinateConfig,
    },
    Job {
        k: usize,
        scenario: Scenario,
    },
    Result {
        k: usize,
        kappa: Option<f64>,
        sigma: Option<f64>,
        status: CoordinateStatus,
    },
    Shutdown,
    Error {
        msg: String,
    },
}

impl Frame {
    pub fn result(c: &Coordinate) -> Frame {
        Frame::Result {
            k: c.k,
            kappa: c.kappa,
            sigma: c.sigma,
            status: c.status,
        }
    }
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<(), WireError> {
    let body = serde_json::to_vec(frame)?;
    let len = u32::try_from(body.len()).map_err(|_| WireError::TooLarge(u32::MAX))?;
    if len > MAX_FRAME {
        return Err(WireError::TooLarge(len));
    }
    w.write_all(&len.to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Frame, WireError> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME {
        return Err(WireError::TooLarge(len));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    Ok(serde_json::from_slice(&body)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn framing_is_length_prefixed() {
        let mut buf = Vec::new();
        write_frame(&mut buf, &Frame::Hello { version: 1 }).unwrap();
        let body = br#"{"type":"hello","version":1}"#;
        assert_eq!(&buf[..4], &(body.len() as u32).to_be_bytes());
        assert_eq!(&buf[4..], body);
        assert_eq!(read_frame(&mut buf.as_slice()).unwrap(), Frame::Hello { version: 1 });
    }

    #[test]
    fn floats_round_trip_exactly() {
        let f = Frame::Result {
            k: 3,
            kappa: Some(0.1 + 0.2),
            sigma: Some(1562.3522832301326),
            status: CoordinateStatus::Ok,
        };
        let mut buf = Vec::new();
        write_frame(&mut buf, &f).unwrap();
        assert_eq!(read_frame(&mut buf.as_slice()).unwrap(), f);
        let mut buf = Vec::new();
        write_frame(&mut buf, &Frame::Ready).unwrap();
        assert_eq!(&buf[4..], br#"{"type":"ready"}"#);
    }

    #[test]
    fn oversized_and_truncated_frames() {
        let mut bad = (MAX_FRAME + 1).to_be_bytes().to_vec();
        bad.extend_from_slice(b"{}");
        assert!(matches!(read_frame(&mut bad.as_slice()), Err(WireError::TooLarge(_))));
        let short = [0u8, 0, 0, 10, b'{'];
        assert!(matches!(read_frame(&mut &short[..]), Err(WireError::Io(_))));
    }
}
