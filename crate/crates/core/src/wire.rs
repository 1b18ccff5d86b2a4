//! Byte-exact wire encoding for certification messages.
//!
//! Layout: one tag byte, then the fields of the tagged body in order.
//! Unsigned integers are variable-length (7-bit groups, little-endian,
//! high bit marks continuation), field elements are 8 fixed little-endian
//! bytes, and byte strings and lists carry a varint length prefix. The
//! varint keeps the logarithmic size bound visible in measured bytes
//! instead of hiding it in fixed-width fields.

use thiserror::Error;

use crate::digest::{WireValue, WIRE_VALUE_MAX};
use crate::field::{FieldElement, MODULUS};
use crate::types::NodeId;

const TAG_STRUCTURE: u8 = 0;
const TAG_SET_EQ: u8 = 1;
const TAG_COMBINED: u8 = 2;
const TAG_POINTS: u8 = 3;

/// Sanity cap on decoded list lengths; anything larger is malformed.
const MAX_LIST_LEN: u64 = 1 << 20;

/// Up-pass message for the structure round: the claimed root, the sender's
/// distance from it, and the size of the subtree rooted at the sender.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureMsg {
    pub claimed_root: NodeId,
    pub sender_depth: u64,
    pub subtree_count: u64,
}

/// Up-pass message for the unique-ID round: one `(p0, p1)` product pair
/// per evaluation point, aligned with the active point list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetEqMsg {
    pub pairs: Vec<(FieldElement, FieldElement)>,
}

/// Up-pass message for a consensus round: the sender's decision in wire
/// form plus the validity witness for its subtree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombinedMsg {
    pub decision: WireValue,
    pub witness_found: bool,
}

/// Down-pass message carrying root-drawn evaluation points for the
/// randomized unique-ID mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointsMsg {
    pub points: Vec<FieldElement>,
}

/// A certification message as it travels between agents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertMessage {
    Structure(StructureMsg),
    SetEq(SetEqMsg),
    Combined(CombinedMsg),
    Points(PointsMsg),
}

impl CertMessage {
    pub fn tag_name(&self) -> &'static str {
        match self {
            CertMessage::Structure(_) => "structure",
            CertMessage::SetEq(_) => "set-eq",
            CertMessage::Combined(_) => "combined",
            CertMessage::Points(_) => "points",
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            CertMessage::Structure(m) => {
                out.push(TAG_STRUCTURE);
                put_varint(&mut out, m.claimed_root.value());
                put_varint(&mut out, m.sender_depth);
                put_varint(&mut out, m.subtree_count);
            }
            CertMessage::SetEq(m) => {
                out.push(TAG_SET_EQ);
                put_varint(&mut out, m.pairs.len() as u64);
                for (p0, p1) in &m.pairs {
                    out.extend_from_slice(&p0.value().to_le_bytes());
                    out.extend_from_slice(&p1.value().to_le_bytes());
                }
            }
            CertMessage::Combined(m) => {
                out.push(TAG_COMBINED);
                put_varint(&mut out, m.decision.len() as u64);
                out.extend_from_slice(m.decision.bytes());
                out.push(m.witness_found as u8);
            }
            CertMessage::Points(m) => {
                out.push(TAG_POINTS);
                put_varint(&mut out, m.points.len() as u64);
                for p in &m.points {
                    out.extend_from_slice(&p.value().to_le_bytes());
                }
            }
        }
        out
    }

    pub fn encoded_len(&self) -> usize {
        self.encode().len()
    }

    pub fn decode(bytes: &[u8]) -> Result<CertMessage, WireError> {
        let mut cur = Cursor { buf: bytes, pos: 0 };
        let tag = cur.take_u8()?;
        let msg = match tag {
            TAG_STRUCTURE => CertMessage::Structure(StructureMsg {
                claimed_root: cur.take_node_id()?,
                sender_depth: cur.take_varint()?,
                subtree_count: cur.take_varint()?,
            }),
            TAG_SET_EQ => {
                let len = cur.take_list_len()?;
                let mut pairs = Vec::with_capacity(len);
                for _ in 0..len {
                    let p0 = cur.take_field()?;
                    let p1 = cur.take_field()?;
                    pairs.push((p0, p1));
                }
                CertMessage::SetEq(SetEqMsg { pairs })
            }
            TAG_COMBINED => {
                let len = cur.take_varint()?;
                if len > WIRE_VALUE_MAX as u64 {
                    return Err(WireError::LengthOutOfBounds(len));
                }
                let decision = WireValue::from_wire_bytes(cur.take(len as usize)?.to_vec());
                let witness_found = match cur.take_u8()? {
                    0 => false,
                    1 => true,
                    b => return Err(WireError::InvalidBool(b)),
                };
                CertMessage::Combined(CombinedMsg {
                    decision,
                    witness_found,
                })
            }
            TAG_POINTS => {
                let len = cur.take_list_len()?;
                let mut points = Vec::with_capacity(len);
                for _ in 0..len {
                    points.push(cur.take_field()?);
                }
                CertMessage::Points(PointsMsg { points })
            }
            other => return Err(WireError::UnknownTag(other)),
        };
        let rest = cur.buf.len() - cur.pos;
        if rest > 0 {
            return Err(WireError::TrailingBytes(rest));
        }
        Ok(msg)
    }
}

/// Malformed-message errors raised by [`CertMessage::decode`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("message truncated")]
    Truncated,
    #[error("unknown message tag {0}")]
    UnknownTag(u8),
    #[error("varint does not fit in 64 bits")]
    VarintOverflow,
    #[error("length {0} exceeds sane bounds")]
    LengthOutOfBounds(u64),
    #[error("field element {0} is not below the modulus")]
    FieldOutOfRange(u64),
    #[error("invalid boolean byte {0}")]
    InvalidBool(u8),
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
}

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8 & 0x7f) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.pos + n > self.buf.len() {
            return Err(WireError::Truncated);
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn take_u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn take_varint(&mut self) -> Result<u64, WireError> {
        let mut value = 0u64;
        let mut shift = 0u32;
        loop {
            let byte = self.take_u8()?;
            let group = (byte & 0x7f) as u64;
            if shift >= 64 || (shift == 63 && group > 1) {
                return Err(WireError::VarintOverflow);
            }
            value |= group << shift;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
            shift += 7;
        }
    }

    fn take_list_len(&mut self) -> Result<usize, WireError> {
        let len = self.take_varint()?;
        if len > MAX_LIST_LEN {
            return Err(WireError::LengthOutOfBounds(len));
        }
        Ok(len as usize)
    }

    fn take_field(&mut self) -> Result<FieldElement, WireError> {
        let raw = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if raw >= MODULUS {
            return Err(WireError::FieldOutOfRange(raw));
        }
        Ok(FieldElement::new(raw))
    }

    fn take_node_id(&mut self) -> Result<NodeId, WireError> {
        let raw = self.take_varint()?;
        if raw >= MODULUS {
            return Err(WireError::FieldOutOfRange(raw));
        }
        Ok(NodeId::new(raw))
    }
}
