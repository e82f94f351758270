//! Friend identities and the local trust-edge store.
//!
//! Each device generates a random 128-bit [`FriendId`] on first use.
//! Friendships are formed in person: a device displays the SHA-256 hash of
//! its id (as a [`QrPayload`]); the scanner stores that hash. Only hashes of
//! other users' ids are ever persisted, so a captured device reveals no raw
//! identifiers, and both sides of a private set intersection hash identically
//! before blinding.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand_core::CryptoRngCore;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{self, CodecError, Reader, Writer};
use crate::rng;

/// Default cap on stored friendships.
pub const FRIEND_CAP_DEFAULT: usize = 40;

/// Current QR payload / identity file version.
pub const IDENTITY_VERSION: u8 = 1;

const IDENTITY_MAGIC: &[u8; 4] = b"RZID";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("randomness source failure")]
    RandomnessFailure,
    #[error("friend store is full (cap {cap})")]
    StoreFull { cap: usize },
    #[error("friend id must not be all zero")]
    ZeroId,
    #[error("identity file: {0}")]
    Codec(#[from] CodecError),
}

/// A random 128-bit device identity. The raw bytes are shared only with
/// in-person friends; everyone else sees at most the SHA-256 hash.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct FriendId {
    bytes: [u8; 16],
}

impl FriendId {
    /// Wraps raw bytes, rejecting the all-zero value.
    pub fn from_bytes(bytes: [u8; 16]) -> Result<Self, IdentityError> {
        if bytes == [0u8; 16] {
            return Err(IdentityError::ZeroId);
        }
        Ok(FriendId { bytes })
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.bytes
    }
}

impl core::fmt::Debug for FriendId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        // Never print the raw identity; show the public hash prefix instead.
        let d = qr_payload(self);
        write!(f, "FriendId(#{:02x}{:02x}{:02x}..)", d.digest[0], d.digest[1], d.digest[2])
    }
}

/// Generates a fresh identity from a cryptographically secure source.
///
/// A failing source is a fatal error; there is no fallback.
pub fn generate_identity<R: CryptoRngCore>(rng: &mut R) -> Result<FriendId, IdentityError> {
    // The all-zero value is reserved; resampling keeps the output uniform
    // over the remaining 2^128 - 1 values.
    for _ in 0..4 {
        let mut bytes = [0u8; 16];
        rng.try_fill_bytes(&mut bytes)
            .map_err(|_| IdentityError::RandomnessFailure)?;
        if bytes != [0u8; 16] {
            return Ok(FriendId { bytes });
        }
    }
    Err(IdentityError::RandomnessFailure)
}

/// The scannable representation of an identity: a version byte plus the
/// SHA-256 digest of the raw id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QrPayload {
    pub version: u8,
    pub digest: [u8; 32],
}

/// Hashes an identity into its QR payload. Deterministic.
pub fn qr_payload(id: &FriendId) -> QrPayload {
    let digest: [u8; 32] = Sha256::digest(id.as_bytes()).into();
    QrPayload {
        version: IDENTITY_VERSION,
        digest,
    }
}

impl QrPayload {
    /// Lowercase hex of `version || digest` (66 characters).
    pub fn to_hex(&self) -> alloc::string::String {
        let mut buf = Vec::with_capacity(33);
        buf.push(self.version);
        buf.extend_from_slice(&self.digest);
        codec::hex_encode(&buf)
    }

    pub fn from_hex(s: &str) -> Result<Self, IdentityError> {
        let raw = codec::hex_decode(s.trim())?;
        if raw.len() != 33 {
            return Err(CodecError::InvalidField("qr payload length").into());
        }
        if raw[0] != IDENTITY_VERSION {
            return Err(CodecError::BadVersion(raw[0]).into());
        }
        let mut digest = [0u8; 32];
        digest.copy_from_slice(&raw[1..]);
        Ok(QrPayload {
            version: raw[0],
            digest,
        })
    }
}

/// The local identity plus the set of stored friend hashes.
///
/// Set semantics: re-adding an existing entry is a no-op, and the store never
/// grows past its cap.
#[derive(Debug, Clone)]
pub struct FriendStore {
    own_id: FriendId,
    friends: BTreeMap<[u8; 32], u64>,
    cap: usize,
}

impl FriendStore {
    pub fn new(own_id: FriendId, cap: usize) -> Self {
        FriendStore {
            own_id,
            friends: BTreeMap::new(),
            cap,
        }
    }

    pub fn own_id(&self) -> &FriendId {
        &self.own_id
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.friends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.friends.is_empty()
    }

    pub fn contains(&self, digest: &[u8; 32]) -> bool {
        self.friends.contains_key(digest)
    }

    /// Friend hashes in stored (lexicographic) order.
    pub fn entries(&self) -> impl Iterator<Item = (&[u8; 32], u64)> {
        self.friends.iter().map(|(d, &t)| (d, t))
    }

    /// Records a scanned payload. Idempotent; fails only when a genuinely
    /// new entry would exceed the cap.
    pub fn add_friend(&mut self, payload: &QrPayload, now: u64) -> Result<(), IdentityError> {
        if self.friends.contains_key(&payload.digest) {
            return Ok(());
        }
        if self.friends.len() >= self.cap {
            return Err(IdentityError::StoreFull { cap: self.cap });
        }
        self.friends.insert(payload.digest, now);
        Ok(())
    }

    /// Selects the subset of stored hashes to submit to one PSI run.
    ///
    /// Each entry is included independently with probability `include_prob`,
    /// the survivors are truncated to `max_inputs` by uniform sampling, and
    /// the output order is freshly shuffled. Deliberately submitting random
    /// subsets caps what a chosen-input attacker can learn per encounter.
    pub fn select_psi_inputs<R: rand_core::RngCore>(
        &self,
        max_inputs: usize,
        include_prob: f64,
        rng: &mut R,
    ) -> Vec<[u8; 32]> {
        assert!(max_inputs >= 1, "max_inputs must be at least 1");
        assert!(
            include_prob > 0.0 && include_prob <= 1.0,
            "include_prob must be in (0, 1]"
        );
        let mut selected: Vec<[u8; 32]> = self
            .friends
            .keys()
            .filter(|_| include_prob >= 1.0 || rng::uniform_f64(rng) < include_prob)
            .copied()
            .collect();
        if selected.len() > max_inputs {
            let keep = rng::sample_indices(rng, selected.len(), max_inputs);
            selected = keep.into_iter().map(|i| selected[i]).collect();
        }
        rng::shuffle(rng, &mut selected);
        selected
    }

    /// Serializes to the versioned identity file image:
    /// `"RZID" || version || own_id || count u32 || (digest, added_at u64)* || crc32`.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(IDENTITY_MAGIC);
        w.u8(IDENTITY_VERSION);
        w.bytes(self.own_id.as_bytes());
        w.u32(self.friends.len() as u32);
        for (digest, added_at) in self.entries() {
            w.bytes(digest);
            w.u64(added_at);
        }
        let crc = codec::crc32(w.as_slice());
        w.u32(crc);
        w.into_vec()
    }

    /// Parses an identity file image, verifying magic, version and checksum.
    pub fn decode(bytes: &[u8], cap: usize) -> Result<Self, IdentityError> {
        if bytes.len() < 4 + 1 + 16 + 4 + 4 {
            return Err(CodecError::Truncated(bytes.len()).into());
        }
        let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
        let stored_crc = u32::from_be_bytes([crc_bytes[0], crc_bytes[1], crc_bytes[2], crc_bytes[3]]);
        if codec::crc32(body) != stored_crc {
            return Err(CodecError::BadChecksum.into());
        }
        let mut r = Reader::new(body);
        if r.take(4)? != IDENTITY_MAGIC {
            return Err(CodecError::BadMagic.into());
        }
        let version = r.u8()?;
        if version != IDENTITY_VERSION {
            return Err(CodecError::BadVersion(version).into());
        }
        let own_id = FriendId::from_bytes(r.array::<16>()?)?;
        let count = r.u32()? as usize;
        if count > cap {
            return Err(IdentityError::StoreFull { cap });
        }
        let mut friends = BTreeMap::new();
        for _ in 0..count {
            let digest = r.array::<32>()?;
            let added_at = r.u64()?;
            if friends.insert(digest, added_at).is_some() {
                return Err(CodecError::InvalidField("duplicate friend entry").into());
            }
        }
        r.finish()?;
        Ok(FriendStore {
            own_id,
            friends,
            cap,
        })
    }
}
