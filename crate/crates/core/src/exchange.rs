//! The peer-encounter session: an ephemeral encrypted channel over any
//! reliable byte stream, PSI-Ca in both directions, then a priority-ordered
//! message exchange in both directions, committed atomically.
//!
//! The channel is deliberately unauthenticated: endpoints are anonymous by
//! design, and authenticating them would undermine the system's anonymity
//! model. Confidentiality and integrity come from an ephemeral
//! Diffie-Hellman agreement bound to the handshake transcript, with
//! per-direction ChaCha20-Poly1305 keys and counter nonces.
//!
//! Received messages are staged and only merged into the store after both
//! DONE frames; any error anywhere aborts the session and leaves the store
//! exactly as it was.
//!
//! Wire order: initiator's PSI request, responder's PSI request, initiator's
//! messages, responder's messages, DONE both ways.

use alloc::string::String;
use alloc::vec::Vec;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Nonce};
use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use rand_core::CryptoRngCore;
use sha2::{Digest, Sha256};
use thiserror::Error;
use zeroize::Zeroize;

use crate::psi::{self, PsiError, PsiRequest, PsiResponse};
use crate::store::{MergeResult, MessageStore, StoreError};
use crate::trust::{self, PriorityScore, TrustError, TrustParams};
use crate::wire::{
    self, Frame, HelloPayload, WireError, ERR_PROTOCOL, ERR_VERSION_MISMATCH, FRAME_DONE,
    FRAME_ERROR, FRAME_HELLO, FRAME_MSGS, FRAME_PSI_REQ, FRAME_PSI_RESP, HELLO_ROLE_INITIATOR,
    HELLO_ROLE_RESPONDER, MAX_FRAME_PAYLOAD, PROTOCOL_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("stream closed")]
    Closed,
    #[error("stream transport failure")]
    Broken,
}

/// A reliable, ordered byte stream. Implemented by TCP sockets in the CLI
/// crate and by in-memory duplex pipes in tests.
pub trait ByteStream {
    fn write_all(&mut self, buf: &[u8]) -> Result<(), StreamError>;
    fn read_exact(&mut self, buf: &mut [u8]) -> Result<(), StreamError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Initiator,
    Responder,
}

/// Session phases advance strictly forward; `Aborted` is terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Hello,
    PsiAtoB,
    PsiBtoA,
    MsgsAtoB,
    MsgsBtoA,
    Done,
    Aborted,
}

/// Per-encounter resource limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncounterBudget {
    pub max_exchange_bytes: usize,
    pub max_messages_per_exchange: usize,
    /// Enforced by the node driver between sessions, not inside a session.
    pub min_interval_between_encounters_s: u64,
}

impl Default for EncounterBudget {
    fn default() -> Self {
        EncounterBudget {
            max_exchange_bytes: MAX_FRAME_PAYLOAD,
            max_messages_per_exchange: 500,
            min_interval_between_encounters_s: 1,
        }
    }
}

impl EncounterBudget {
    pub fn validate(&self) -> Result<(), ExchangeError> {
        if self.max_exchange_bytes == 0
            || self.max_messages_per_exchange == 0
            || self.min_interval_between_encounters_s == 0
        {
            return Err(ExchangeError::BadBudget);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExchangeError {
    #[error("stream: {0}")]
    Stream(#[from] StreamError),
    #[error("wire: {0}")]
    Wire(#[from] WireError),
    #[error("psi: {0}")]
    Psi(#[from] PsiError),
    #[error("trust: {0}")]
    Trust(#[from] TrustError),
    #[error("store: {0}")]
    Store(#[from] StoreError),
    #[error("protocol version mismatch: ours {ours}, peer {theirs}")]
    VersionMismatch { ours: u8, theirs: u8 },
    #[error("unexpected frame type 0x{got:02x} in phase {phase:?}")]
    UnexpectedFrame { got: u8, phase: Phase },
    #[error("frame integrity check failed")]
    IntegrityFailure,
    #[error("peer replayed or reflected our hello")]
    ReflectedHello,
    #[error("peer sent an invalid role byte")]
    BadRole,
    #[error("peer key share is malformed")]
    BadKeyShare,
    #[error("peer reported error 0x{code:02x}")]
    PeerError { code: u8 },
    #[error("budget values must all be positive")]
    BadBudget,
    #[error("session is not in a runnable state")]
    BadState,
}

/// Outcome of a completed exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExchangeOutcome {
    /// Shared-friend count this side learned from PSI.
    pub peer_cardinality: u32,
    /// How many friend hashes this side submitted (after deduplication).
    pub own_submitted: u32,
    /// Messages received from the peer.
    pub messages_received: usize,
    /// Received messages that changed the store (inserted or raised).
    pub messages_committed: usize,
    /// Messages sent fully to the peer.
    pub messages_sent: usize,
    pub bytes_sent: usize,
    pub bytes_received: usize,
}

struct DirectionKey {
    cipher: ChaCha20Poly1305,
    counter: u64,
}

impl DirectionKey {
    fn new(key: [u8; 32]) -> Self {
        DirectionKey {
            cipher: ChaCha20Poly1305::new(&key.into()),
            counter: 0,
        }
    }

    fn next_nonce(&mut self) -> Nonce {
        let mut nonce = [0u8; 12];
        nonce[4..].copy_from_slice(&self.counter.to_be_bytes());
        self.counter += 1;
        Nonce::from(nonce)
    }
}

/// An established encounter session.
pub struct SessionState<S: ByteStream> {
    stream: S,
    role: Role,
    phase: Phase,
    send_key: DirectionKey,
    recv_key: DirectionKey,
    bytes_sent: usize,
    bytes_received: usize,
}

fn derive_key(label: &[u8], shared: &[u8; 32], transcript: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"sotto/channel/v1/");
    h.update(label);
    h.update(shared);
    h.update(transcript);
    h.finalize().into()
}

fn random_nonzero_scalar<R: CryptoRngCore>(rng: &mut R) -> Result<Scalar, ExchangeError> {
    for _ in 0..4 {
        let mut wide = [0u8; 64];
        rng.try_fill_bytes(&mut wide)
            .map_err(|_| StreamError::Broken)?;
        let s = Scalar::from_bytes_mod_order_wide(&wide);
        wide.zeroize();
        if s != Scalar::ZERO {
            return Ok(s);
        }
    }
    Err(ExchangeError::BadKeyShare)
}

/// Raw frame IO with byte accounting. Also used before keys exist.
fn write_frame<S: ByteStream>(
    stream: &mut S,
    counter: &mut usize,
    frame: &Frame,
) -> Result<(), ExchangeError> {
    let bytes = frame.encode();
    stream.write_all(&bytes)?;
    *counter += bytes.len();
    Ok(())
}

fn read_frame<S: ByteStream>(
    stream: &mut S,
    counter: &mut usize,
) -> Result<Frame, ExchangeError> {
    let mut header = [0u8; 5];
    stream.read_exact(&mut header)?;
    *counter += 5;
    let len = u32::from_be_bytes([header[0], header[1], header[2], header[3]]) as usize;
    let frame_type = header[4];
    if len > MAX_FRAME_PAYLOAD {
        return Err(WireError::Oversize(len).into());
    }
    if !wire::is_known_frame_type(frame_type) {
        return Err(WireError::UnknownFrameType(frame_type).into());
    }
    let mut payload = alloc::vec![0u8; len];
    stream.read_exact(&mut payload)?;
    *counter += len;
    Ok(Frame {
        frame_type,
        payload,
    })
}

/// Runs the unauthenticated handshake: HELLO both ways, transcript-bound
/// ephemeral Diffie-Hellman, per-direction keys. Any failure aborts; a
/// version mismatch additionally reports an ERROR frame to the peer.
pub fn establish_channel<S: ByteStream, R: CryptoRngCore>(
    mut stream: S,
    role: Role,
    rng: &mut R,
) -> Result<SessionState<S>, ExchangeError> {
    let mut bytes_sent = 0usize;
    let mut bytes_received = 0usize;

    let mut secret = random_nonzero_scalar(rng)?;
    let own_pub = RISTRETTO_BASEPOINT_POINT * secret;
    let mut salt = [0u8; 16];
    rng.try_fill_bytes(&mut salt).map_err(|_| StreamError::Broken)?;
    let own_hello = HelloPayload {
        version: PROTOCOL_VERSION,
        role: match role {
            Role::Initiator => HELLO_ROLE_INITIATOR,
            Role::Responder => HELLO_ROLE_RESPONDER,
        },
        ephemeral_pub: own_pub.compress().to_bytes(),
        salt,
    };
    let own_hello_bytes = own_hello.encode();
    let hello_frame = Frame::new(FRAME_HELLO, own_hello_bytes.clone())?;

    // The initiator speaks first; the responder answers with its own HELLO.
    let peer_frame = match role {
        Role::Initiator => {
            write_frame(&mut stream, &mut bytes_sent, &hello_frame)?;
            read_frame(&mut stream, &mut bytes_received)?
        }
        Role::Responder => {
            let f = read_frame(&mut stream, &mut bytes_received)?;
            write_frame(&mut stream, &mut bytes_sent, &hello_frame)?;
            f
        }
    };

    if peer_frame.frame_type == FRAME_ERROR {
        let code = peer_frame.payload.first().copied().unwrap_or(0);
        secret.zeroize();
        return Err(ExchangeError::PeerError { code });
    }
    if peer_frame.frame_type != FRAME_HELLO {
        secret.zeroize();
        return Err(ExchangeError::UnexpectedFrame {
            got: peer_frame.frame_type,
            phase: Phase::Hello,
        });
    }
    let peer_hello = HelloPayload::decode(&peer_frame.payload)?;
    if peer_hello.version != PROTOCOL_VERSION {
        let err = Frame::new(
            FRAME_ERROR,
            wire::encode_error_payload(ERR_VERSION_MISMATCH, "protocol version mismatch"),
        )?;
        let _ = write_frame(&mut stream, &mut bytes_sent, &err);
        secret.zeroize();
        return Err(ExchangeError::VersionMismatch {
            ours: PROTOCOL_VERSION,
            theirs: peer_hello.version,
        });
    }
    let expected_peer_role = match role {
        Role::Initiator => HELLO_ROLE_RESPONDER,
        Role::Responder => HELLO_ROLE_INITIATOR,
    };
    if peer_hello.role != expected_peer_role {
        secret.zeroize();
        return Err(ExchangeError::BadRole);
    }
    if peer_frame.payload == own_hello_bytes {
        secret.zeroize();
        return Err(ExchangeError::ReflectedHello);
    }
    let peer_point = CompressedRistretto::from_slice(&peer_hello.ephemeral_pub)
        .ok()
        .and_then(|c| c.decompress())
        .ok_or(ExchangeError::BadKeyShare)?;
    if peer_point == RistrettoPoint::identity() {
        secret.zeroize();
        return Err(ExchangeError::BadKeyShare);
    }

    let mut shared = (peer_point * secret).compress().to_bytes();
    secret.zeroize();

    // Transcript binds both HELLOs in wire order.
    let mut th = Sha256::new();
    th.update(b"sotto/handshake/v1");
    match role {
        Role::Initiator => {
            th.update(&own_hello_bytes);
            th.update(&peer_frame.payload);
        }
        Role::Responder => {
            th.update(&peer_frame.payload);
            th.update(&own_hello_bytes);
        }
    }
    let transcript: [u8; 32] = th.finalize().into();

    let key_i2r = derive_key(b"i2r", &shared, &transcript);
    let key_r2i = derive_key(b"r2i", &shared, &transcript);
    shared.zeroize();

    let (send_key, recv_key) = match role {
        Role::Initiator => (DirectionKey::new(key_i2r), DirectionKey::new(key_r2i)),
        Role::Responder => (DirectionKey::new(key_r2i), DirectionKey::new(key_i2r)),
    };

    Ok(SessionState {
        stream,
        role,
        phase: Phase::PsiAtoB,
        send_key,
        recv_key,
        bytes_sent,
        bytes_received,
    })
}

impl<S: ByteStream> SessionState<S> {
    pub fn role(&self) -> Role {
        self.role
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn bytes_sent(&self) -> usize {
        self.bytes_sent
    }

    pub fn bytes_received(&self) -> usize {
        self.bytes_received
    }

    fn send_encrypted(&mut self, frame_type: u8, plaintext: &[u8]) -> Result<(), ExchangeError> {
        let nonce = self.send_key.next_nonce();
        let ciphertext = self
            .send_key
            .cipher
            .encrypt(
                &nonce,
                Payload {
                    msg: plaintext,
                    aad: &[frame_type],
                },
            )
            .map_err(|_| ExchangeError::IntegrityFailure)?;
        let frame = Frame::new(frame_type, ciphertext)?;
        write_frame(&mut self.stream, &mut self.bytes_sent, &frame)
    }

    /// Receives the single frame type valid for the current phase. An ERROR
    /// frame aborts with the peer's code; anything else unexpected aborts.
    fn recv_expect(&mut self, expected: u8) -> Result<Vec<u8>, ExchangeError> {
        let frame = read_frame(&mut self.stream, &mut self.bytes_received)?;
        if frame.frame_type == FRAME_ERROR {
            // Post-handshake ERROR frames are encrypted like any other.
            let nonce = self.recv_key.next_nonce();
            let code = self
                .recv_key
                .cipher
                .decrypt(
                    &nonce,
                    Payload {
                        msg: &frame.payload,
                        aad: &[FRAME_ERROR],
                    },
                )
                .ok()
                .and_then(|p| p.first().copied())
                .unwrap_or(0);
            return Err(ExchangeError::PeerError { code });
        }
        if frame.frame_type != expected {
            return Err(ExchangeError::UnexpectedFrame {
                got: frame.frame_type,
                phase: self.phase,
            });
        }
        let nonce = self.recv_key.next_nonce();
        self.recv_key
            .cipher
            .decrypt(
                &nonce,
                Payload {
                    msg: &frame.payload,
                    aad: &[frame.frame_type],
                },
            )
            .map_err(|_| ExchangeError::IntegrityFailure)
    }

    fn try_report_error(&mut self) {
        let payload = wire::encode_error_payload(ERR_PROTOCOL, "exchange aborted");
        let _ = self.send_encrypted(FRAME_ERROR, &payload);
    }
}

/// Builds the outgoing message list in exchange order, truncated to the
/// budget's message count, byte limit, and the frame cap.
fn outgoing_messages(
    store: &MessageStore,
    budget: &EncounterBudget,
    now: u64,
) -> Vec<(String, f64)> {
    let frame_limit = MAX_FRAME_PAYLOAD - 64; // leave room for the AEAD tag
    let byte_limit = budget.max_exchange_bytes.min(frame_limit);
    let mut size = 4usize;
    let mut out = Vec::new();
    for (msg, priority) in store.exchange_order(now) {
        if out.len() >= budget.max_messages_per_exchange {
            break;
        }
        let entry_size = 8 + 2 + msg.body().len();
        if size + entry_size > byte_limit {
            break;
        }
        size += entry_size;
        out.push((String::from(msg.body()), priority.value()));
    }
    out
}

/// Runs the full encounter on an established session: PSI both directions,
/// messages both directions, atomic commit at DONE.
///
/// `friend_inputs` are the already-selected friend hashes for this run (see
/// [`crate::identity::FriendStore::select_psi_inputs`]). On any error the
/// session aborts and `store` is left untouched.
pub fn run_exchange<S: ByteStream, R: CryptoRngCore>(
    session: &mut SessionState<S>,
    friend_inputs: &[[u8; 32]],
    store: &mut MessageStore,
    trust_params: &TrustParams,
    budget: &EncounterBudget,
    now: u64,
    rng: &mut R,
) -> Result<ExchangeOutcome, ExchangeError> {
    budget.validate()?;
    if session.phase != Phase::PsiAtoB {
        return Err(ExchangeError::BadState);
    }
    match run_exchange_inner(session, friend_inputs, store, trust_params, budget, now, rng) {
        Ok(outcome) => Ok(outcome),
        Err(err) => {
            session.try_report_error();
            session.phase = Phase::Aborted;
            Err(err)
        }
    }
}

fn run_exchange_inner<S: ByteStream, R: CryptoRngCore>(
    session: &mut SessionState<S>,
    friend_inputs: &[[u8; 32]],
    store: &mut MessageStore,
    trust_params: &TrustParams,
    budget: &EncounterBudget,
    now: u64,
    rng: &mut R,
) -> Result<ExchangeOutcome, ExchangeError> {
    let input_refs: Vec<&[u8]> = friend_inputs.iter().map(|d| d.as_slice()).collect();

    // --- PSI, initiator's direction then responder's. ---
    let (own_cardinality, own_submitted) = match session.role {
        Role::Initiator => {
            let (state, request) = psi::psi_initiate(&input_refs, rng)?;
            let submitted = state.input_count() as u32;
            session.send_encrypted(
                FRAME_PSI_REQ,
                &wire::encode_psi_request_payload(&request.to_encoded()),
            )?;
            let resp_bytes = session.recv_expect(FRAME_PSI_RESP)?;
            let (blinded, tags) = wire::decode_psi_response_payload(&resp_bytes)?;
            let response = PsiResponse::from_encoded(&blinded, &tags)?;
            let cardinality = psi::psi_finalize(state, &response)?;
            session.phase = Phase::PsiBtoA;

            let req_bytes = session.recv_expect(FRAME_PSI_REQ)?;
            let peer_request =
                PsiRequest::from_encoded(&wire::decode_psi_request_payload(&req_bytes)?)?;
            let response = psi::psi_respond(&input_refs, &peer_request, rng)?;
            let (blinded, tags) = response.to_encoded();
            session.send_encrypted(
                FRAME_PSI_RESP,
                &wire::encode_psi_response_payload(&blinded, &tags),
            )?;
            (cardinality, submitted)
        }
        Role::Responder => {
            let req_bytes = session.recv_expect(FRAME_PSI_REQ)?;
            let peer_request =
                PsiRequest::from_encoded(&wire::decode_psi_request_payload(&req_bytes)?)?;
            let response = psi::psi_respond(&input_refs, &peer_request, rng)?;
            let (blinded, tags) = response.to_encoded();
            session.send_encrypted(
                FRAME_PSI_RESP,
                &wire::encode_psi_response_payload(&blinded, &tags),
            )?;
            session.phase = Phase::PsiBtoA;

            let (state, request) = psi::psi_initiate(&input_refs, rng)?;
            let submitted = state.input_count() as u32;
            session.send_encrypted(
                FRAME_PSI_REQ,
                &wire::encode_psi_request_payload(&request.to_encoded()),
            )?;
            let resp_bytes = session.recv_expect(FRAME_PSI_RESP)?;
            let (blinded, tags) = wire::decode_psi_response_payload(&resp_bytes)?;
            let response = PsiResponse::from_encoded(&blinded, &tags)?;
            let cardinality = psi::psi_finalize(state, &response)?;
            (cardinality, submitted)
        }
    };

    let t = trust::trust_score(own_cardinality, own_submitted, trust_params)?;

    // --- Messages, initiator's direction then responder's. ---
    session.phase = Phase::MsgsAtoB;
    let outgoing = outgoing_messages(store, budget, now);
    let outgoing_refs: Vec<(&str, f64)> =
        outgoing.iter().map(|(b, p)| (b.as_str(), *p)).collect();
    let msgs_payload = wire::encode_messages_payload(&outgoing_refs)?;

    let incoming = match session.role {
        Role::Initiator => {
            session.send_encrypted(FRAME_MSGS, &msgs_payload)?;
            session.phase = Phase::MsgsBtoA;
            let bytes = session.recv_expect(FRAME_MSGS)?;
            wire::decode_messages_payload(&bytes, budget.max_messages_per_exchange)?
        }
        Role::Responder => {
            let bytes = session.recv_expect(FRAME_MSGS)?;
            session.phase = Phase::MsgsBtoA;
            session.send_encrypted(FRAME_MSGS, &msgs_payload)?;
            wire::decode_messages_payload(&bytes, budget.max_messages_per_exchange)?
        }
    };

    // Stage received messages with their updated priorities; nothing touches
    // the store until DONE confirms the whole exchange.
    let mut staged: Vec<(String, PriorityScore)> = Vec::with_capacity(incoming.len());
    for (body, advertised) in incoming {
        let p_o = PriorityScore::new(advertised).ok_or(WireError::BadPriority)?;
        let updated = trust::update_priority(p_o, t, trust_params, rng);
        staged.push((body, updated));
    }

    // --- DONE both ways, then commit. ---
    match session.role {
        Role::Initiator => {
            session.send_encrypted(FRAME_DONE, &[])?;
            let done = session.recv_expect(FRAME_DONE)?;
            if !done.is_empty() {
                return Err(ExchangeError::UnexpectedFrame {
                    got: FRAME_DONE,
                    phase: session.phase,
                });
            }
        }
        Role::Responder => {
            let done = session.recv_expect(FRAME_DONE)?;
            if !done.is_empty() {
                return Err(ExchangeError::UnexpectedFrame {
                    got: FRAME_DONE,
                    phase: session.phase,
                });
            }
            session.send_encrypted(FRAME_DONE, &[])?;
        }
    }
    session.phase = Phase::Done;

    let messages_received = staged.len();
    let mut messages_committed = 0usize;
    for (body, priority) in staged {
        match store.merge_received(&body, priority, now)? {
            MergeResult::Inserted | MergeResult::Raised => messages_committed += 1,
            MergeResult::Kept | MergeResult::Rejected => {}
        }
    }

    Ok(ExchangeOutcome {
        peer_cardinality: own_cardinality,
        own_submitted,
        messages_received,
        messages_committed,
        messages_sent: outgoing.len(),
        bytes_sent: session.bytes_sent,
        bytes_received: session.bytes_received,
    })
}
