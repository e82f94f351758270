//! Content-addressed message storage with priority ordering and
//! lowest-priority eviction.
//!
//! Messages are anonymous: the id is the SHA-256 hash of the body and no
//! record of author or sender exists anywhere. Priorities decay lazily; all
//! read paths take `now`, and the stored value plus its stamp fully determine
//! what any observer sees. The store owns the decay parameters so ordering
//! and eviction are consistent across every operation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{self, CodecError, Reader, Writer};
use crate::trust::{decay_priority, PriorityScore, TrustParams};

/// Maximum body size in bytes (4x a typical 140-byte microblog payload, to
/// leave room for multibyte scripts).
pub const BODY_MAX_BYTES: usize = 560;

/// Default store capacity, counted in messages.
pub const STORE_CAPACITY_DEFAULT: usize = 10_000;

/// Current message-store file version.
pub const STORE_VERSION: u8 = 1;

const STORE_MAGIC: &[u8; 4] = b"RZMS";

pub type MessageId = [u8; 32];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("message body is empty")]
    EmptyBody,
    #[error("message body is {len} bytes; limit {BODY_MAX_BYTES}")]
    OversizeBody { len: usize },
    #[error("no such message")]
    NotFound,
    #[error("store file: {0}")]
    Codec(#[from] CodecError),
}

/// One stored microblog datagram.
#[derive(Debug, Clone)]
pub struct Message {
    id: MessageId,
    body: String,
    priority: PriorityScore,
    /// When `priority` was last set; decay is measured from here.
    priority_at: u64,
    first_seen: u64,
}

impl Message {
    pub fn id(&self) -> &MessageId {
        &self.id
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn first_seen(&self) -> u64 {
        self.first_seen
    }

    /// Priority as observed at `now`, after lazy exponential decay.
    pub fn priority_at(&self, now: u64, params: &TrustParams) -> PriorityScore {
        let elapsed = now.saturating_sub(self.priority_at) as f64;
        decay_priority(self.priority, elapsed, params)
    }
}

pub fn message_id(body: &str) -> MessageId {
    Sha256::digest(body.as_bytes()).into()
}

fn validate_body(body: &str) -> Result<(), StoreError> {
    if body.is_empty() {
        return Err(StoreError::EmptyBody);
    }
    if body.len() > BODY_MAX_BYTES {
        return Err(StoreError::OversizeBody { len: body.len() });
    }
    Ok(())
}

/// What happened to an offered message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeResult {
    /// New entry retained.
    Inserted,
    /// Entry existed; its priority was raised.
    Raised,
    /// Entry existed at an equal or higher priority; nothing changed.
    Kept,
    /// The store was full and the offer lost the eviction contest.
    Rejected,
}

/// A bounded message store. When over capacity, the lowest-priority entry is
/// dropped first; priority ties evict the oldest `first_seen`.
#[derive(Debug, Clone)]
pub struct MessageStore {
    capacity: usize,
    params: TrustParams,
    entries: BTreeMap<MessageId, Message>,
}

impl MessageStore {
    pub fn new(capacity: usize, params: TrustParams) -> Self {
        MessageStore {
            capacity,
            params,
            entries: BTreeMap::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn params(&self) -> &TrustParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &MessageId) -> Option<&Message> {
        self.entries.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Message> {
        self.entries.values()
    }

    /// Decayed priority of one entry as of `now`.
    pub fn priority_of(&self, id: &MessageId, now: u64) -> Option<PriorityScore> {
        self.entries.get(id).map(|m| m.priority_at(now, &self.params))
    }

    /// Authors a new message at priority 1. Re-authoring an existing body
    /// resets its priority to 1 (content addressing collapses duplicates).
    pub fn author(&mut self, body: &str, now: u64) -> Result<MessageId, StoreError> {
        validate_body(body)?;
        let id = message_id(body);
        match self.entries.get_mut(&id) {
            Some(msg) => {
                msg.priority = PriorityScore::MAX;
                msg.priority_at = now;
            }
            None => {
                self.entries.insert(
                    id,
                    Message {
                        id,
                        body: String::from(body),
                        priority: PriorityScore::MAX,
                        priority_at: now,
                        first_seen: now,
                    },
                );
                self.evict_overflow(now);
            }
        }
        Ok(id)
    }

    /// Resets an existing message to priority 1 ("reauthoring" it).
    pub fn upvote(&mut self, id: &MessageId, now: u64) -> Result<(), StoreError> {
        let msg = self.entries.get_mut(id).ok_or(StoreError::NotFound)?;
        msg.priority = PriorityScore::MAX;
        msg.priority_at = now;
        Ok(())
    }

    /// Inserts a received message whose priority has already been through the
    /// trust update. Re-receiving keeps the maximum of the old and new
    /// priorities (both observed at `now`), so trust already earned is never
    /// destroyed.
    pub fn merge_received(
        &mut self,
        body: &str,
        priority: PriorityScore,
        now: u64,
    ) -> Result<MergeResult, StoreError> {
        validate_body(body)?;
        let id = message_id(body);
        self.merge_received_with_id(id, body, priority, now)
    }

    /// Same as [`merge_received`](Self::merge_received) for callers that have
    /// already computed the content hash.
    pub fn merge_received_with_id(
        &mut self,
        id: MessageId,
        body: &str,
        priority: PriorityScore,
        now: u64,
    ) -> Result<MergeResult, StoreError> {
        debug_assert_eq!(id, message_id(body));
        if let Some(msg) = self.entries.get_mut(&id) {
            if priority.value() > msg.priority_at(now, &self.params).value() {
                msg.priority = priority;
                msg.priority_at = now;
                return Ok(MergeResult::Raised);
            }
            return Ok(MergeResult::Kept);
        }
        self.entries.insert(
            id,
            Message {
                id,
                body: String::from(body),
                priority,
                priority_at: now,
                first_seen: now,
            },
        );
        self.evict_overflow(now);
        if self.entries.contains_key(&id) {
            Ok(MergeResult::Inserted)
        } else {
            Ok(MergeResult::Rejected)
        }
    }

    /// Front of the feed: messages by decayed priority descending, ties by
    /// oldest `first_seen` first, then id.
    pub fn ordered_view(&self, limit: usize, now: u64) -> Vec<&Message> {
        let mut all: Vec<&Message> = self.entries.values().collect();
        self.sort_for_display(&mut all, now);
        all.truncate(limit);
        all
    }

    /// Transmission order for an exchange: every entry with its post-decay
    /// priority, highest first. Low-trust messages go last so a truncated
    /// exchange drops them first.
    pub fn exchange_order(&self, now: u64) -> Vec<(&Message, PriorityScore)> {
        let mut all: Vec<&Message> = self.entries.values().collect();
        self.sort_for_display(&mut all, now);
        all.into_iter()
            .map(|m| (m, m.priority_at(now, &self.params)))
            .collect()
    }

    fn sort_for_display<'a>(&self, msgs: &mut [&'a Message], now: u64) {
        msgs.sort_by(|a, b| {
            let pa = a.priority_at(now, &self.params).value();
            let pb = b.priority_at(now, &self.params).value();
            pb.partial_cmp(&pa)
                .unwrap()
                .then(a.first_seen.cmp(&b.first_seen))
                .then(a.id.cmp(&b.id))
        });
    }

    /// Drops lowest-priority entries until within capacity.
    fn evict_overflow(&mut self, now: u64) {
        while self.entries.len() > self.capacity {
            let victim = self
                .entries
                .values()
                .min_by(|a, b| {
                    let pa = a.priority_at(now, &self.params).value();
                    let pb = b.priority_at(now, &self.params).value();
                    pa.partial_cmp(&pb)
                        .unwrap()
                        .then(a.first_seen.cmp(&b.first_seen))
                        .then(a.id.cmp(&b.id))
                })
                .map(|m| m.id);
            match victim {
                Some(id) => {
                    self.entries.remove(&id);
                }
                None => break,
            }
        }
    }

    /// Serializes to the store file image, with priorities decayed to `now`:
    /// `"RZMS" || version || count u32 || (id, len u16, body, priority f64, first_seen u64)* || crc32`.
    pub fn encode(&self, now: u64) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(STORE_MAGIC);
        w.u8(STORE_VERSION);
        w.u32(self.entries.len() as u32);
        for msg in self.entries.values() {
            w.bytes(&msg.id);
            w.u16(msg.body.len() as u16);
            w.bytes(msg.body.as_bytes());
            w.f64(msg.priority_at(now, &self.params).value());
            w.u64(msg.first_seen);
        }
        let crc = codec::crc32(w.as_slice());
        w.u32(crc);
        w.into_vec()
    }

    /// Parses a store file image. Loaded priorities are stamped at `now`;
    /// decay resumes from the moment of loading.
    pub fn decode(
        bytes: &[u8],
        capacity: usize,
        params: TrustParams,
        now: u64,
    ) -> Result<Self, StoreError> {
        if bytes.len() < 4 + 1 + 4 + 4 {
            return Err(CodecError::Truncated(bytes.len()).into());
        }
        let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
        let stored_crc = u32::from_be_bytes([crc_bytes[0], crc_bytes[1], crc_bytes[2], crc_bytes[3]]);
        if codec::crc32(body) != stored_crc {
            return Err(CodecError::BadChecksum.into());
        }
        let mut r = Reader::new(body);
        if r.take(4)? != STORE_MAGIC {
            return Err(CodecError::BadMagic.into());
        }
        let version = r.u8()?;
        if version != STORE_VERSION {
            return Err(CodecError::BadVersion(version).into());
        }
        let count = r.u32()? as usize;
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let id: MessageId = r.array::<32>()?;
            let len = r.u16()? as usize;
            let raw = r.take(len)?;
            let text = core::str::from_utf8(raw)
                .map_err(|_| CodecError::InvalidField("body not utf-8"))?;
            validate_body(text)?;
            if id != message_id(text) {
                return Err(CodecError::InvalidField("id does not hash body").into());
            }
            let priority = PriorityScore::new(r.f64()?)
                .ok_or(CodecError::InvalidField("priority out of range"))?;
            let first_seen = r.u64()?;
            let msg = Message {
                id,
                body: String::from(text),
                priority,
                priority_at: now,
                first_seen,
            };
            if entries.insert(id, msg).is_some() {
                return Err(CodecError::InvalidField("duplicate message id").into());
            }
        }
        r.finish()?;
        let mut store = MessageStore {
            capacity,
            params,
            entries,
        };
        store.evict_overflow(now);
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> TrustParams {
        TrustParams::deterministic()
    }

    fn new_store(cap: usize) -> MessageStore {
        MessageStore::new(cap, params())
    }

    fn p(v: f64) -> PriorityScore {
        PriorityScore::new(v).unwrap()
    }

    #[test]
    fn author_starts_at_priority_one() {
        let mut store = new_store(16);
        let id = store.author("hello", 10).unwrap();
        let msg = store.get(&id).unwrap();
        assert_eq!(msg.priority_at(10, &params()).value(), 1.0);
        assert_eq!(msg.body(), "hello");
    }

    #[test]
    fn author_duplicate_body_collapses() {
        let mut store = new_store(16);
        store.author("hello", 10).unwrap();
        store.author("hello", 20).unwrap();
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn author_body_validation() {
        let mut store = new_store(16);
        assert_eq!(store.author("", 0), Err(StoreError::EmptyBody));
        let big = "x".repeat(561);
        assert!(matches!(
            store.author(&big, 0),
            Err(StoreError::OversizeBody { len: 561 })
        ));
        let ok = "x".repeat(560);
        assert!(store.author(&ok, 0).is_ok());
    }

    #[test]
    fn author_at_capacity_evicts_oldest_tie() {
        let mut store = new_store(3);
        let a = store.author("a", 1).unwrap();
        store.author("b", 2).unwrap();
        store.author("c", 3).unwrap();
        store.author("d", 4).unwrap();
        assert_eq!(store.len(), 3);
        assert!(store.get(&a).is_none(), "oldest equal-priority entry evicted");
    }

    #[test]
    fn upvote_sets_one_and_is_idempotent() {
        let mut store = new_store(8);
        store.merge_received("news", p(0.2), 5).unwrap();
        let id = message_id("news");
        store.upvote(&id, 6).unwrap();
        assert_eq!(store.priority_of(&id, 6).unwrap().value(), 1.0);
        store.upvote(&id, 7).unwrap();
        assert_eq!(store.priority_of(&id, 7).unwrap().value(), 1.0);
        let missing = message_id("nope");
        assert_eq!(store.upvote(&missing, 8), Err(StoreError::NotFound));
    }

    #[test]
    fn merge_inserts_and_keeps_max() {
        let mut store = new_store(8);
        let r = store.merge_received("m", p(0.4), 0).unwrap();
        assert_eq!(r, MergeResult::Inserted);
        let r = store.merge_received("m", p(0.6), 0).unwrap();
        assert_eq!(r, MergeResult::Raised);
        let r = store.merge_received("m", p(0.4), 0).unwrap();
        assert_eq!(r, MergeResult::Kept);
        let id = message_id("m");
        assert_eq!(store.priority_of(&id, 0).unwrap().value(), 0.6);
    }

    #[test]
    fn merge_below_minimum_on_full_store_is_rejected() {
        let mut store = new_store(2);
        store.merge_received("a", p(0.8), 0).unwrap();
        store.merge_received("b", p(0.6), 0).unwrap();
        let r = store.merge_received("c", p(0.1), 1).unwrap();
        assert_eq!(r, MergeResult::Rejected);
        assert_eq!(store.len(), 2);
        assert!(store.get(&message_id("a")).is_some());
        assert!(store.get(&message_id("b")).is_some());
    }

    #[test]
    fn ordered_view_sorting_and_limit() {
        let mut store = new_store(8);
        store.merge_received("x", p(0.9), 0).unwrap();
        store.merge_received("y", p(0.1), 0).unwrap();
        store.merge_received("z", p(0.5), 0).unwrap();
        let view = store.ordered_view(10, 0);
        let bodies: Vec<&str> = view.iter().map(|m| m.body()).collect();
        assert_eq!(bodies, ["x", "z", "y"]);
        assert_eq!(store.ordered_view(2, 0).len(), 2);
    }

    #[test]
    fn ordered_view_tie_prefers_older() {
        let mut store = new_store(8);
        store.merge_received("later", p(0.5), 7).unwrap();
        store.merge_received("early", p(0.2), 1).unwrap();
        // Raise "early" to the same value with the same stamp; only its
        // first_seen differs.
        store.merge_received("early", p(0.5), 7).unwrap();
        let view = store.ordered_view(10, 7);
        let bodies: Vec<&str> = view.iter().map(|m| m.body()).collect();
        assert_eq!(bodies, ["early", "later"], "older first_seen ranks first on ties");
    }

    #[test]
    fn exchange_order_matches_view_and_reports_decay() {
        let prm = params();
        let mut store = new_store(8);
        store.merge_received("a", p(0.8), 0).unwrap();
        store.merge_received("b", p(0.4), 0).unwrap();
        let later = prm.decay_half_life_s as u64;
        let order = store.exchange_order(later);
        assert_eq!(order.len(), 2);
        assert_eq!(order[0].0.body(), "a");
        assert!((order[0].1.value() - 0.4).abs() < 1e-12);
        assert!((order[1].1.value() - 0.2).abs() < 1e-12);
        let view = store.ordered_view(usize::MAX, later);
        assert!(view
            .iter()
            .zip(order.iter())
            .all(|(v, (m, _))| v.id() == m.id()));
    }

    #[test]
    fn no_sender_or_author_metadata_exists() {
        let mut store = new_store(4);
        let id = store.author("anon", 0).unwrap();
        let msg = store.get(&id).unwrap();
        let dump = alloc::format!("{msg:?}");
        assert!(!dump.contains("author"));
        assert!(!dump.contains("sender"));
    }

    #[test]
    fn file_roundtrip_preserves_observables() {
        let prm = params();
        let mut store = new_store(16);
        store.author("first", 100).unwrap();
        store.merge_received("second", p(0.25), 150).unwrap();
        let now = 200;
        let bytes = store.encode(now);
        let back = MessageStore::decode(&bytes, 16, prm, now).unwrap();
        assert_eq!(back.len(), store.len());
        for msg in store.iter() {
            let other = back.get(msg.id()).unwrap();
            assert_eq!(other.body(), msg.body());
            assert_eq!(other.first_seen(), msg.first_seen());
            let a = msg.priority_at(now, &prm).value();
            let b = other.priority_at(now, &prm).value();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn file_rejects_corruption() {
        let mut store = new_store(16);
        store.author("msg", 0).unwrap();
        let mut bytes = store.encode(0);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(MessageStore::decode(&bytes, 16, params(), 0).is_err());
    }

    #[test]
    fn merge_never_lowers_priority_property() {
        let mut rng = crate::rng::SplitMix64::new(11);
        let prm = params();
        let mut store = new_store(64);
        for step in 0..2_000u64 {
            let body = alloc::format!("body-{}", rng.next() % 24);
            let id = message_id(&body);
            let before = store.get(&id).map(|m| m.priority_at(step, &prm).value());
            let offered = PriorityScore::truncate(rng.next_f64());
            store.merge_received(&body, offered, step).unwrap();
            if let (Some(before), Some(msg)) = (before, store.get(&id)) {
                let after = msg.priority_at(step, &prm).value();
                assert!(after >= before - 1e-12);
            }
        }
    }

    #[test]
    fn retained_set_matches_top_k_oracle() {
        // Brute-force oracle: with no decay elapsed, the retained priority
        // multiset must be the capacity-largest among per-body maxima of
        // everything ever offered.
        let mut rng = crate::rng::SplitMix64::new(31);
        for case in 0..300 {
            let cap = 1 + (rng.next() % 8) as usize;
            let offers = 1 + (rng.next() % 32) as usize;
            let mut store = MessageStore::new(cap, params());
            let mut best: BTreeMap<String, f64> = BTreeMap::new();
            for _ in 0..offers {
                let body = alloc::format!("b{}", rng.next() % 12);
                let pr = (rng.next() % 1000) as f64 / 1000.0;
                store
                    .merge_received(&body, PriorityScore::new(pr).unwrap(), 0)
                    .unwrap();
                let e = best.entry(body).or_insert(0.0);
                if pr > *e {
                    *e = pr;
                }
            }
            let mut expect: Vec<f64> = best.values().copied().collect();
            expect.sort_by(|a, b| b.partial_cmp(a).unwrap());
            expect.truncate(cap);
            let mut got: Vec<f64> = store
                .iter()
                .map(|m| m.priority_at(0, &params()).value())
                .collect();
            got.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert_eq!(got, expect, "case {case}: cap {cap}, offers {offers}");
        }
    }
}
