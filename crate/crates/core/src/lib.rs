//! Core library for sotto, an anonymous broadcast messaging system for
//! infrastructure-less environments.
//!
//! Messages are public, unsigned microblog datagrams carried opportunistically
//! between devices. There is no authorship metadata anywhere; instead, each
//! device ranks incoming messages by a social trust score computed during the
//! encounter itself: the two devices privately intersect their friend sets
//! (learning only the *count* of common friends) and map that count through a
//! sigmoid into a priority multiplier. Propaganda from socially isolated
//! senders arrives with low priority and is crowded out of storage and
//! forwarding budgets.
//!
//! The crate is split into the device-side protocol and a desk-scale
//! evaluation suite:
//!
//! - [`identity`]: random 128-bit friend identities, QR payloads, the friend
//!   store, and subset selection for private set intersection.
//! - [`psi`]: the one-round blinded-exponentiation private set intersection
//!   cardinality protocol over the ristretto255 group.
//! - [`trust`]: trust scores, the sigmoid priority multiplier, additive
//!   Gaussian noise, and time decay.
//! - [`store`]: the content-addressed message store with priority ordering
//!   and lowest-priority eviction.
//! - [`wire`] / [`exchange`]: the framed, encrypted peer-encounter session
//!   that runs PSI in both directions and exchanges messages atomically.
//! - [`trace`], [`graph`], [`sim`], [`anneal`]: mobility traces, social graph
//!   generation, the discrete-event simulator, and jammer placement.
//! - [`analytics`]: anonymity-set estimation, social-graph leakage models
//!   (closed form and stochastic simulation), and the jamming radius
//!   calculator.
//!
//! The crate is `no_std` (with `alloc`); all IO lives in the companion CLI
//! crate. Every randomized component takes an explicit RNG or seed so results
//! are reproducible.

#![cfg_attr(not(any(test, feature = "testing")), no_std)]

extern crate alloc;

pub mod analytics;
pub mod anneal;
pub mod codec;
pub mod exchange;
pub mod graph;
pub mod identity;
pub mod psi;
pub mod rng;
pub mod sim;
pub mod store;
#[cfg(any(test, feature = "testing"))]
pub mod testing;
pub mod trace;
pub mod trust;
pub mod wire;

pub use identity::{FriendId, FriendStore, QrPayload};
pub use store::{Message, MessageStore};
pub use trust::{PriorityScore, TrustParams};
