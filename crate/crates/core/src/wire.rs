//! Framed wire format for peer-encounter sessions.
//!
//! Every frame is `length: u32 BE || type: u8 || payload`, where `length`
//! counts payload bytes and is capped at 1 MiB. After the handshake the
//! payload is an AEAD ciphertext whose associated data is the type byte, so
//! frame types cannot be swapped undetected.
//!
//! Payload encodings are deterministic and big-endian throughout, giving
//! bit-exact cross-implementation behavior with no schema toolchain.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::codec::{CodecError, Reader, Writer};
use crate::psi::{ELEMENT_LEN, PSI_INPUT_CAP, TAG_LEN};
use crate::store::BODY_MAX_BYTES;

/// Protocol version carried in HELLO.
pub const PROTOCOL_VERSION: u8 = 1;

/// Hard cap on a frame payload.
pub const MAX_FRAME_PAYLOAD: usize = 1_048_576;

pub const FRAME_HELLO: u8 = 0x01;
pub const FRAME_PSI_REQ: u8 = 0x02;
pub const FRAME_PSI_RESP: u8 = 0x03;
pub const FRAME_MSGS: u8 = 0x04;
pub const FRAME_DONE: u8 = 0x05;
pub const FRAME_ERROR: u8 = 0x7F;

/// Error codes carried in an ERROR frame payload.
pub const ERR_VERSION_MISMATCH: u8 = 0x01;
pub const ERR_PROTOCOL: u8 = 0x02;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("frame payload of {0} bytes exceeds cap")]
    Oversize(usize),
    #[error("unknown frame type 0x{0:02x}")]
    UnknownFrameType(u8),
    #[error("message body in payload is empty or exceeds {BODY_MAX_BYTES} bytes")]
    BadBody,
    #[error("message body is not valid utf-8")]
    BodyNotUtf8,
    #[error("advertised priority out of [0,1]")]
    BadPriority,
    #[error("element list of {0} exceeds protocol cap {PSI_INPUT_CAP}")]
    TooManyElements(usize),
    #[error("payload: {0}")]
    Codec(#[from] CodecError),
}

pub fn is_known_frame_type(t: u8) -> bool {
    matches!(
        t,
        FRAME_HELLO | FRAME_PSI_REQ | FRAME_PSI_RESP | FRAME_MSGS | FRAME_DONE | FRAME_ERROR
    )
}

/// One wire frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub frame_type: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(frame_type: u8, payload: Vec<u8>) -> Result<Self, WireError> {
        if payload.len() > MAX_FRAME_PAYLOAD {
            return Err(WireError::Oversize(payload.len()));
        }
        if !is_known_frame_type(frame_type) {
            return Err(WireError::UnknownFrameType(frame_type));
        }
        Ok(Frame {
            frame_type,
            payload,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.payload.len() as u32);
        w.u8(self.frame_type);
        w.bytes(&self.payload);
        w.into_vec()
    }
}

/// HELLO payload: version, role byte, ephemeral public key, random salt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelloPayload {
    pub version: u8,
    pub role: u8,
    pub ephemeral_pub: [u8; 32],
    pub salt: [u8; 16],
}

pub const HELLO_ROLE_INITIATOR: u8 = 0x00;
pub const HELLO_ROLE_RESPONDER: u8 = 0x01;

impl HelloPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(self.version);
        w.u8(self.role);
        w.bytes(&self.ephemeral_pub);
        w.bytes(&self.salt);
        w.into_vec()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let version = r.u8()?;
        let role = r.u8()?;
        let ephemeral_pub = r.array::<32>()?;
        let salt = r.array::<16>()?;
        r.finish()?;
        Ok(HelloPayload {
            version,
            role,
            ephemeral_pub,
            salt,
        })
    }
}

/// Encodes a message list: `count u32 || (priority f64 BE, len u16, body)*`.
///
/// Bodies must be nonempty, at most [`BODY_MAX_BYTES`] bytes, and priorities
/// must lie in [0, 1].
pub fn encode_messages_payload(entries: &[(&str, f64)]) -> Result<Vec<u8>, WireError> {
    let mut w = Writer::new();
    w.u32(entries.len() as u32);
    for (body, priority) in entries {
        if body.is_empty() || body.len() > BODY_MAX_BYTES {
            return Err(WireError::BadBody);
        }
        if !priority.is_finite() || !(0.0..=1.0).contains(priority) {
            return Err(WireError::BadPriority);
        }
        w.f64(*priority);
        w.u16(body.len() as u16);
        w.bytes(body.as_bytes());
    }
    if w.len() > MAX_FRAME_PAYLOAD {
        return Err(WireError::Oversize(w.len()));
    }
    Ok(w.into_vec())
}

/// Decodes a message list, enforcing the same validity rules as encoding
/// plus an optional count cap (the receiver's per-exchange budget).
pub fn decode_messages_payload(
    bytes: &[u8],
    max_entries: usize,
) -> Result<Vec<(String, f64)>, WireError> {
    let mut r = Reader::new(bytes);
    let count = r.u32()? as usize;
    if count > max_entries {
        return Err(WireError::TooManyElements(count));
    }
    let mut out = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let priority = r.f64()?;
        if !priority.is_finite() || !(0.0..=1.0).contains(&priority) {
            return Err(WireError::BadPriority);
        }
        let len = r.u16()? as usize;
        if len == 0 || len > BODY_MAX_BYTES {
            return Err(WireError::BadBody);
        }
        let raw = r.take(len)?;
        let body = core::str::from_utf8(raw).map_err(|_| WireError::BodyNotUtf8)?;
        out.push((String::from(body), priority));
    }
    r.finish()?;
    Ok(out)
}

/// PSI request payload: `count u32 || element*`.
pub fn encode_psi_request_payload(elements: &[[u8; ELEMENT_LEN]]) -> Vec<u8> {
    let mut w = Writer::new();
    w.u32(elements.len() as u32);
    for e in elements {
        w.bytes(e);
    }
    w.into_vec()
}

pub fn decode_psi_request_payload(bytes: &[u8]) -> Result<Vec<[u8; ELEMENT_LEN]>, WireError> {
    let mut r = Reader::new(bytes);
    let count = r.u32()? as usize;
    if count > PSI_INPUT_CAP {
        return Err(WireError::TooManyElements(count));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(r.array::<ELEMENT_LEN>()?);
    }
    r.finish()?;
    Ok(out)
}

/// PSI response payload: two length-prefixed lists (doubly blinded elements,
/// then server tags).
pub fn encode_psi_response_payload(
    doubly_blinded: &[[u8; ELEMENT_LEN]],
    server_tags: &[[u8; TAG_LEN]],
) -> Vec<u8> {
    let mut w = Writer::new();
    w.u32(doubly_blinded.len() as u32);
    for e in doubly_blinded {
        w.bytes(e);
    }
    w.u32(server_tags.len() as u32);
    for t in server_tags {
        w.bytes(t);
    }
    w.into_vec()
}

#[allow(clippy::type_complexity)]
pub fn decode_psi_response_payload(
    bytes: &[u8],
) -> Result<(Vec<[u8; ELEMENT_LEN]>, Vec<[u8; TAG_LEN]>), WireError> {
    let mut r = Reader::new(bytes);
    let n = r.u32()? as usize;
    if n > PSI_INPUT_CAP {
        return Err(WireError::TooManyElements(n));
    }
    let mut blinded = Vec::with_capacity(n);
    for _ in 0..n {
        blinded.push(r.array::<ELEMENT_LEN>()?);
    }
    let m = r.u32()? as usize;
    if m > PSI_INPUT_CAP {
        return Err(WireError::TooManyElements(m));
    }
    let mut tags = Vec::with_capacity(m);
    for _ in 0..m {
        tags.push(r.array::<TAG_LEN>()?);
    }
    r.finish()?;
    Ok((blinded, tags))
}

/// ERROR payload: `code u8 || utf-8 detail`.
pub fn encode_error_payload(code: u8, detail: &str) -> Vec<u8> {
    let mut w = Writer::new();
    w.u8(code);
    w.bytes(detail.as_bytes());
    w.into_vec()
}

pub fn decode_error_payload(bytes: &[u8]) -> Result<(u8, String), WireError> {
    if bytes.is_empty() {
        return Err(CodecError::Truncated(0).into());
    }
    let code = bytes[0];
    let detail = core::str::from_utf8(&bytes[1..])
        .map_err(|_| WireError::BodyNotUtf8)?;
    Ok((code, String::from(detail)))
}
