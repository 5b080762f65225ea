//! Bit-exact wire encoding for protocol messages.
//!
//! Protocol messages are `type byte || sender id (4 bytes BE) || body`.
//! Columns are count-prefixed fixed-width field elements, points use the
//! curve encoding, tags are raw 32 bytes. The group broadcast and the sink
//! revocation notice have their own layouts (no sender field). Big-endian
//! throughout. Decoding is strict: unknown types, out-of-range elements,
//! off-curve points, bad counts and trailing bytes are all rejected.

use crate::ec::{CurveParams, CurvePoint};
use crate::error::{DecodeError, Result};
use crate::field::{FieldElement, FieldPrime};
use crate::group::NodeLabel;
use crate::handshake::{
    AbortMsg, PairwiseMsg1, PairwiseMsg2, PairwiseMsg3, PathMsg1, PathMsg2, PathMsg3,
};
use crate::tag::{HashTag, TAG_LEN};

/// Decode context: the field and curve the endpoint is configured with.
#[derive(Debug, Clone)]
pub struct WireContext {
    pub q: FieldPrime,
    pub curve: CurveParams,
}

pub const TYPE_PAIRWISE_MSG1: u8 = 1;
pub const TYPE_PAIRWISE_MSG2: u8 = 2;
pub const TYPE_PAIRWISE_MSG3: u8 = 3;
pub const TYPE_PATH_MSG1: u8 = 4;
pub const TYPE_PATH_MSG2: u8 = 5;
pub const TYPE_PATH_MSG3: u8 = 6;
pub const TYPE_ABORT: u8 = 7;
pub const TYPE_GROUP_BROADCAST: u8 = 8;
pub const TYPE_REVOCATION: u8 = 9;

/// Sponsor broadcast: epoch plus (node label, blinded point) pairs in
/// pre-order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupBroadcast {
    pub epoch: u32,
    pub entries: Vec<(NodeLabel, CurvePoint)>,
}

/// Sink revocation notice: revoked id plus a 32-byte tag under the sink key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevocationNotice {
    pub revoked: u32,
    pub tag: HashTag,
}

/// Any decodable message, for dispatch by receivers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMessage {
    PairwiseMsg1(PairwiseMsg1),
    PairwiseMsg2(PairwiseMsg2),
    PairwiseMsg3(PairwiseMsg3),
    PathMsg1(PathMsg1),
    PathMsg2(PathMsg2),
    PathMsg3(PathMsg3),
    Abort(AbortMsg),
    GroupBroadcast(GroupBroadcast),
    Revocation(RevocationNotice),
}

impl WireMessage {
    pub fn type_byte(&self) -> u8 {
        match self {
            WireMessage::PairwiseMsg1(_) => TYPE_PAIRWISE_MSG1,
            WireMessage::PairwiseMsg2(_) => TYPE_PAIRWISE_MSG2,
            WireMessage::PairwiseMsg3(_) => TYPE_PAIRWISE_MSG3,
            WireMessage::PathMsg1(_) => TYPE_PATH_MSG1,
            WireMessage::PathMsg2(_) => TYPE_PATH_MSG2,
            WireMessage::PathMsg3(_) => TYPE_PATH_MSG3,
            WireMessage::Abort(_) => TYPE_ABORT,
            WireMessage::GroupBroadcast(_) => TYPE_GROUP_BROADCAST,
            WireMessage::Revocation(_) => TYPE_REVOCATION,
        }
    }

    pub fn encode(&self, ctx: &WireContext) -> Vec<u8> {
        let mut out = vec![self.type_byte()];
        match self {
            WireMessage::PairwiseMsg1(m) => {
                put_u32(&mut out, m.sender);
                put_column(&mut out, &m.col);
            }
            WireMessage::PairwiseMsg2(m) => {
                put_u32(&mut out, m.sender);
                put_column(&mut out, &m.col);
                out.extend_from_slice(m.tag.as_bytes());
            }
            WireMessage::PairwiseMsg3(m) => {
                put_u32(&mut out, m.sender);
                out.extend_from_slice(m.tag.as_bytes());
            }
            WireMessage::PathMsg1(m) => {
                put_u32(&mut out, m.sender);
                put_column(&mut out, &m.col);
                out.extend_from_slice(&ctx.curve.encode_point(&m.eph));
            }
            WireMessage::PathMsg2(m) => {
                put_u32(&mut out, m.sender);
                put_column(&mut out, &m.col);
                out.extend_from_slice(m.key_tag.as_bytes());
                out.extend_from_slice(&ctx.curve.encode_point(&m.eph));
            }
            WireMessage::PathMsg3(m) => {
                put_u32(&mut out, m.sender);
                out.extend_from_slice(m.key_tag.as_bytes());
                out.extend_from_slice(m.dh_tag.as_bytes());
            }
            WireMessage::Abort(m) => {
                put_u32(&mut out, m.sender);
            }
            WireMessage::GroupBroadcast(m) => {
                put_u32(&mut out, m.epoch);
                put_u32(&mut out, m.entries.len() as u32);
                for (label, point) in &m.entries {
                    put_u32(&mut out, label.level);
                    put_u32(&mut out, label.index);
                    out.extend_from_slice(&ctx.curve.encode_point(point));
                }
            }
            WireMessage::Revocation(m) => {
                put_u32(&mut out, m.revoked);
                out.extend_from_slice(m.tag.as_bytes());
            }
        }
        out
    }

    /// Decodes any known message type, consuming the whole buffer.
    pub fn decode(ctx: &WireContext, bytes: &[u8]) -> Result<WireMessage> {
        let mut r = Reader::new(bytes);
        let type_byte = r.u8()?;
        let msg = Self::decode_body(ctx, type_byte, &mut r)?;
        r.finish()?;
        Ok(msg)
    }

    /// Decodes while insisting on a particular message type; a mismatched
    /// type byte is a decode error.
    pub fn decode_expected(ctx: &WireContext, bytes: &[u8], expected: u8) -> Result<WireMessage> {
        let mut r = Reader::new(bytes);
        let type_byte = r.u8()?;
        if type_byte != expected {
            return Err(DecodeError::UnexpectedType {
                expected,
                got: type_byte,
            }
            .into());
        }
        let msg = Self::decode_body(ctx, type_byte, &mut r)?;
        r.finish()?;
        Ok(msg)
    }

    fn decode_body(ctx: &WireContext, type_byte: u8, r: &mut Reader) -> Result<WireMessage> {
        Ok(match type_byte {
            TYPE_PAIRWISE_MSG1 => WireMessage::PairwiseMsg1(PairwiseMsg1 {
                sender: r.u32()?,
                col: get_column(r, ctx.q)?,
            }),
            TYPE_PAIRWISE_MSG2 => WireMessage::PairwiseMsg2(PairwiseMsg2 {
                sender: r.u32()?,
                col: get_column(r, ctx.q)?,
                tag: r.tag()?,
            }),
            TYPE_PAIRWISE_MSG3 => WireMessage::PairwiseMsg3(PairwiseMsg3 {
                sender: r.u32()?,
                tag: r.tag()?,
            }),
            TYPE_PATH_MSG1 => WireMessage::PathMsg1(PathMsg1 {
                sender: r.u32()?,
                col: get_column(r, ctx.q)?,
                eph: get_point(r, &ctx.curve)?,
            }),
            TYPE_PATH_MSG2 => WireMessage::PathMsg2(PathMsg2 {
                sender: r.u32()?,
                col: get_column(r, ctx.q)?,
                key_tag: r.tag()?,
                eph: get_point(r, &ctx.curve)?,
            }),
            TYPE_PATH_MSG3 => WireMessage::PathMsg3(PathMsg3 {
                sender: r.u32()?,
                key_tag: r.tag()?,
                dh_tag: r.tag()?,
            }),
            TYPE_ABORT => WireMessage::Abort(AbortMsg { sender: r.u32()? }),
            TYPE_GROUP_BROADCAST => {
                let epoch = r.u32()?;
                let count = r.u32()? as usize;
                let point_len = ctx.curve.point_encoding_len();
                // labels are 8 bytes; affine points dominate the size bound
                if count > r.remaining() / 8 {
                    return Err(DecodeError::BadCount.into());
                }
                let mut entries = Vec::with_capacity(count);
                for _ in 0..count {
                    let label = NodeLabel {
                        level: r.u32()?,
                        index: r.u32()?,
                    };
                    // peek the point prefix to know the encoded length
                    let first = r.peek_u8()?;
                    let point = if first == 0x00 {
                        get_point_bytes(r, &ctx.curve, 1)?
                    } else {
                        get_point_bytes(r, &ctx.curve, point_len)?
                    };
                    entries.push((label, point));
                }
                WireMessage::GroupBroadcast(GroupBroadcast { epoch, entries })
            }
            TYPE_REVOCATION => WireMessage::Revocation(RevocationNotice {
                revoked: r.u32()?,
                tag: r.tag()?,
            }),
            other => return Err(DecodeError::UnknownType(other).into()),
        })
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_column(out: &mut Vec<u8>, col: &[FieldElement]) {
    put_u32(out, col.len() as u32);
    for e in col {
        out.extend_from_slice(&e.encode());
    }
}

fn get_column(r: &mut Reader, q: FieldPrime) -> Result<Vec<FieldElement>> {
    let count = r.u32()? as usize;
    let w = q.byte_width();
    if count > r.remaining() / w {
        return Err(DecodeError::BadCount.into());
    }
    let mut col = Vec::with_capacity(count);
    for _ in 0..count {
        let bytes = r.bytes(w)?;
        col.push(FieldElement::decode(bytes, q).map_err(|_| DecodeError::ElementOutOfRange)?);
    }
    Ok(col)
}

fn get_point(r: &mut Reader, curve: &CurveParams) -> Result<CurvePoint> {
    let first = r.peek_u8()?;
    let len = if first == 0x00 {
        1
    } else {
        curve.point_encoding_len()
    };
    get_point_bytes(r, curve, len)
}

fn get_point_bytes(r: &mut Reader, curve: &CurveParams, len: usize) -> Result<CurvePoint> {
    let bytes = r.bytes(len)?;
    curve.decode_point(bytes)
}

struct Reader<'a> {
    data: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Reader { data, at: 0 }
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.at
    }

    fn u8(&mut self) -> Result<u8> {
        let b = *self.data.get(self.at).ok_or(DecodeError::Truncated)?;
        self.at += 1;
        Ok(b)
    }

    fn peek_u8(&self) -> Result<u8> {
        self.data
            .get(self.at)
            .copied()
            .ok_or_else(|| DecodeError::Truncated.into())
    }

    fn u32(&mut self) -> Result<u32> {
        let bytes = self.bytes(4)?;
        Ok(u32::from_be_bytes(bytes.try_into().unwrap()))
    }

    fn bytes(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.remaining() < len {
            return Err(DecodeError::Truncated.into());
        }
        let out = &self.data[self.at..self.at + len];
        self.at += len;
        Ok(out)
    }

    fn tag(&mut self) -> Result<HashTag> {
        let bytes = self.bytes(TAG_LEN)?;
        Ok(HashTag::from_bytes(bytes.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.remaining() == 0 {
            Ok(())
        } else {
            Err(DecodeError::TrailingBytes.into())
        }
    }
}
