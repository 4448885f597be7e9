//! Little-endian message records: `u8 kind`, `u32 count`, then
//! `count * width` doubles with `width` 3 (positions) or 6 (positions and
//! velocities).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageKind {
    Exchange = 0,
    Border = 1,
    Sync = 2,
    Migration = 3,
}

impl MessageKind {
    pub fn from_u8(b: u8) -> Result<Self> {
        Ok(match b {
            0 => MessageKind::Exchange,
            1 => MessageKind::Border,
            2 => MessageKind::Sync,
            3 => MessageKind::Migration,
            k => return Err(Error::Wire(format!("unknown message kind {k}"))),
        })
    }
}

const HEADER: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub kind: MessageKind,
    pub count: usize,
    pub data: Vec<f64>,
}

impl Packet {
    /// Doubles per particle, or 0 for an empty packet.
    pub fn width(&self) -> usize {
        if self.count == 0 {
            0
        } else {
            self.data.len() / self.count
        }
    }

    pub fn record(&self, k: usize) -> &[f64] {
        let w = self.width();
        &self.data[k * w..(k + 1) * w]
    }
}

pub fn encode(kind: MessageKind, width: usize, data: &[f64]) -> Vec<u8> {
    assert!(width == 3 || width == 6, "record width must be 3 or 6");
    assert!(data.len() % width == 0, "payload is not a whole number of records");
    let count = data.len() / width;
    let count = u32::try_from(count).expect("too many particles for one message");
    let mut out = Vec::with_capacity(HEADER + data.len() * 8);
    out.push(kind as u8);
    out.extend_from_slice(&count.to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Packet> {
    if bytes.len() < HEADER {
        return Err(Error::Wire(format!("record of {} bytes is shorter than its header", bytes.len())));
    }
    let kind = MessageKind::from_u8(bytes[0])?;
    let count = u32::from_le_bytes(bytes[1..5].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER..];
    if payload.len() % 8 != 0 {
        return Err(Error::Wire(format!("payload of {} bytes is not a whole number of doubles", payload.len())));
    }
    let n = payload.len() / 8;
    let ok = if count == 0 { n == 0 } else { n == 3 * count || n == 6 * count };
    if !ok {
        return Err(Error::Wire(format!("{n} doubles do not match a count of {count} with width 3 or 6")));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Packet { kind, count, data })
}

/// Decode and check the kind and width the receiver expects.
pub fn decode_expect(bytes: &[u8], kind: MessageKind, width: usize) -> Result<Packet> {
    let p = decode(bytes)?;
    if p.kind != kind {
        return Err(Error::Wire(format!("expected a {kind:?} record, got {:?}", p.kind)));
    }
    if p.count > 0 && p.width() != width {
        return Err(Error::Wire(format!("expected width {width}, got {}", p.width())));
    }
    Ok(p)
}
