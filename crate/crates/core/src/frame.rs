//! Wire format for sensor frames and the logger's binary frame log.
//!
//! Frame layout, big-endian, 16 bytes:
//!
//! | offset | size | field                                          |
//! |--------|------|------------------------------------------------|
//! | 0      | 1    | node id                                        |
//! | 1      | 2    | sequence number                                |
//! | 3      | 4    | timestamp, ms                                  |
//! | 7      | 6    | ADC codes x, y, z                              |
//! | 13     | 1    | range codes: bits 0-1 x, 2-3 y, 4-5 z, 6-7 = 0 |
//! | 14     | 2    | CRC-16/CCITT-FALSE over bytes 0..14            |
//!
//! A log is the 8-byte magic `BSLOG1\0\0` followed by frames back to back.

use std::io::Write;

use crc::{Crc, CRC_16_IBM_3740};
use serde::{Deserialize, Serialize};

use crate::error::{Error, FrameError, Result};
use crate::sensor::{dequantize, AxisReading, MeasurementRange};

pub const FRAME_LEN: usize = 16;
pub const PAYLOAD_LEN: usize = FRAME_LEN - 2;
pub const LOG_MAGIC: [u8; 8] = *b"BSLOG1\0\0";

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection.
const CCITT: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

pub fn crc16(bytes: &[u8]) -> u16 {
    CCITT.checksum(bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub node_id: u8,
    pub seq: u16,
    pub timestamp_ms: u32,
    pub codes: [u16; 3],
    pub ranges: [MeasurementRange; 3],
}

impl SensorFrame {
    pub fn encode(&self) -> [u8; FRAME_LEN] {
        let mut out = [0u8; FRAME_LEN];
        out[0] = self.node_id;
        out[1..3].copy_from_slice(&self.seq.to_be_bytes());
        out[3..7].copy_from_slice(&self.timestamp_ms.to_be_bytes());
        for (i, c) in self.codes.iter().enumerate() {
            out[7 + 2 * i..9 + 2 * i].copy_from_slice(&c.to_be_bytes());
        }
        out[13] = self
            .ranges
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, r)| acc | (r.code() << (2 * i)));
        let crc = crc16(&out[..PAYLOAD_LEN]);
        out[PAYLOAD_LEN..].copy_from_slice(&crc.to_be_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        if bytes.len() < FRAME_LEN {
            return Err(FrameError::Short {
                need: FRAME_LEN,
                got: bytes.len(),
            });
        }
        let stored = u16::from_be_bytes([bytes[14], bytes[15]]);
        let computed = crc16(&bytes[..PAYLOAD_LEN]);
        if stored != computed {
            return Err(FrameError::Crc { stored, computed });
        }
        let u16_at = |o: usize| u16::from_be_bytes([bytes[o], bytes[o + 1]]);
        let range_at = |i: usize| {
            MeasurementRange::from_code((bytes[13] >> (2 * i)) & 0b11).expect("two bits always map to a range")
        };
        Ok(SensorFrame {
            node_id: bytes[0],
            seq: u16_at(1),
            timestamp_ms: u32::from_be_bytes([bytes[3], bytes[4], bytes[5], bytes[6]]),
            codes: [u16_at(7), u16_at(9), u16_at(11)],
            ranges: [range_at(0), range_at(1), range_at(2)],
        })
    }

    /// Acceleration in g recovered from the codes.
    pub fn accel_g(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| {
            dequantize(&AxisReading {
                code: self.codes[i],
                range: self.ranges[i],
                clipped: false,
            })
        })
    }
}

pub fn encode_log(frames: &[SensorFrame]) -> Vec<u8> {
    let mut out = Vec::with_capacity(LOG_MAGIC.len() + frames.len() * FRAME_LEN);
    out.extend_from_slice(&LOG_MAGIC);
    for f in frames {
        out.extend_from_slice(&f.encode());
    }
    out
}

/// Decodes every record in a log, keeping per-record CRC failures.
pub fn replay_log(bytes: &[u8]) -> Result<Vec<Result<SensorFrame, FrameError>>, FrameError> {
    if bytes.len() < LOG_MAGIC.len() || bytes[..LOG_MAGIC.len()] != LOG_MAGIC {
        return Err(FrameError::BadMagic);
    }
    let body = &bytes[LOG_MAGIC.len()..];
    if !body.len().is_multiple_of(FRAME_LEN) {
        return Err(FrameError::Truncated(body.len()));
    }
    Ok(body.chunks_exact(FRAME_LEN).map(SensorFrame::decode).collect())
}

/// Strict variant of [`replay_log`]: the first bad record is an error.
pub fn decode_log(bytes: &[u8]) -> Result<Vec<SensorFrame>, FrameError> {
    replay_log(bytes)?.into_iter().collect()
}

pub fn write_frames_csv<W: Write>(frames: &[SensorFrame], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Scenario(format!("csv write failed: {e}"));
    wr.write_record([
        "node_id", "seq", "timestamp_ms", "code_x", "code_y", "code_z", "range_x", "range_y", "range_z", "ax_g",
        "ay_g", "az_g",
    ])
    .map_err(err)?;
    for f in frames {
        let g = f.accel_g();
        let mut row = vec![f.node_id.to_string(), f.seq.to_string(), f.timestamp_ms.to_string()];
        row.extend(f.codes.iter().map(|c| c.to_string()));
        row.extend(f.ranges.iter().map(|r| format!("{}", r.bound_g())));
        row.extend(g.iter().map(|v| format!("{v:.6}")));
        wr.write_record(&row).map_err(err)?;
    }
    wr.flush().map_err(|e| Error::io("<frames csv>", e))
}
