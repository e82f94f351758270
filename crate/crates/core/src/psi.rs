//! One-round private set intersection cardinality (PSI-Ca).
//!
//! Blinded-exponentiation construction over a prime-order group. The client
//! sends `a_i = H1(c_i)^Rc` for its (deduplicated, shuffled) inputs; the
//! responder returns `a_i^Rs` (re-shuffled) together with tags
//! `H2(H1(s_j)^Rs)` for its own inputs (shuffled). Unblinding with `1/Rc`
//! lets the client count — and only count — common elements:
//! `H2((a_i^Rs)^(1/Rc)) = H2(H1(c_i)^Rs)`, which collides with a tag exactly
//! when `c_i` is in the responder's set.
//!
//! Both shuffles are fresh per run, so positions carry no information. A cap
//! of [`PSI_INPUT_CAP`] inputs per side bounds what a chosen-input attacker
//! can probe per encounter.
//!
//! The group and both hashes sit behind [`PsiGroup`] so the whole
//! construction can be swapped out if the underlying assumptions fall.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use rand_core::CryptoRngCore;
use sha2::{Digest, Sha256, Sha512};
use thiserror::Error;
use zeroize::Zeroize;

use crate::rng;

/// Maximum number of inputs either side may submit to one protocol run.
pub const PSI_INPUT_CAP: usize = 30;

/// Canonical byte length of an encoded group element.
pub const ELEMENT_LEN: usize = 32;

/// Byte length of an element tag (H2 output).
pub const TAG_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PsiError {
    #[error("too many PSI inputs: {count} exceeds cap {PSI_INPUT_CAP}")]
    TooManyInputs { count: usize },
    #[error("malformed or non-canonical group element in protocol message")]
    MalformedElement,
    #[error("identity element in protocol message")]
    IdentityElement,
    #[error("response length {got} does not match request length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("randomness source failure")]
    RandomnessFailure,
}

/// The narrow group interface the protocol is written against: a prime-order
/// group with a hash-to-group map (H1), an element hash (H2), and canonical
/// fixed-length encodings that reject non-canonical inputs.
pub trait PsiGroup {
    type Scalar: Clone;
    type Point: Clone + PartialEq;

    /// H1: arbitrary bytes to a group element, never the identity.
    fn hash_to_group(input: &[u8]) -> Self::Point;
    /// Uniform nonzero scalar.
    fn random_scalar<R: CryptoRngCore>(rng: &mut R) -> Result<Self::Scalar, PsiError>;
    fn mul(point: &Self::Point, scalar: &Self::Scalar) -> Self::Point;
    fn invert(scalar: &Self::Scalar) -> Self::Scalar;
    /// H2: 32-byte hash of an element's canonical encoding.
    fn tag(point: &Self::Point) -> [u8; TAG_LEN];
    fn encode(point: &Self::Point) -> [u8; ELEMENT_LEN];
    /// Rejects non-canonical encodings.
    fn decode(bytes: &[u8; ELEMENT_LEN]) -> Option<Self::Point>;
    fn is_identity(point: &Self::Point) -> bool;
    fn zeroize_scalar(scalar: &mut Self::Scalar);
}

/// ristretto255: prime order ~2^252, no cofactor, canonical 32-byte
/// encodings, constant-time hash-to-group via the Elligator-based
/// wide-reduction map.
pub struct Ristretto255;

impl PsiGroup for Ristretto255 {
    type Scalar = Scalar;
    type Point = RistrettoPoint;

    fn hash_to_group(input: &[u8]) -> RistrettoPoint {
        let mut h = Sha512::new();
        h.update(b"sotto/psi/h1/v1");
        h.update((input.len() as u64).to_be_bytes());
        h.update(input);
        let wide: [u8; 64] = h.finalize().into();
        RistrettoPoint::from_uniform_bytes(&wide)
    }

    fn random_scalar<R: CryptoRngCore>(rng: &mut R) -> Result<Scalar, PsiError> {
        for _ in 0..4 {
            let mut wide = [0u8; 64];
            rng.try_fill_bytes(&mut wide)
                .map_err(|_| PsiError::RandomnessFailure)?;
            let s = Scalar::from_bytes_mod_order_wide(&wide);
            wide.zeroize();
            if s != Scalar::ZERO {
                return Ok(s);
            }
        }
        Err(PsiError::RandomnessFailure)
    }

    fn mul(point: &RistrettoPoint, scalar: &Scalar) -> RistrettoPoint {
        point * scalar
    }

    fn invert(scalar: &Scalar) -> Scalar {
        scalar.invert()
    }

    fn tag(point: &RistrettoPoint) -> [u8; TAG_LEN] {
        let mut h = Sha256::new();
        h.update(b"sotto/psi/h2/v1");
        h.update(point.compress().as_bytes());
        h.finalize().into()
    }

    fn encode(point: &RistrettoPoint) -> [u8; ELEMENT_LEN] {
        point.compress().to_bytes()
    }

    fn decode(bytes: &[u8; ELEMENT_LEN]) -> Option<RistrettoPoint> {
        CompressedRistretto::from_slice(bytes).ok()?.decompress()
    }

    fn is_identity(point: &RistrettoPoint) -> bool {
        *point == RistrettoPoint::identity()
    }

    fn zeroize_scalar(scalar: &mut Scalar) {
        scalar.zeroize();
    }
}

/// The group the protocol runs over. Swapping the construction means
/// providing another [`PsiGroup`] impl and changing this alias.
pub type Group = Ristretto255;

type Point = <Group as PsiGroup>::Point;
type GroupScalar = <Group as PsiGroup>::Scalar;

/// First protocol message: the client's blinded, shuffled inputs.
#[derive(Debug, Clone)]
pub struct PsiRequest {
    blinded: Vec<Point>,
}

impl PsiRequest {
    pub fn len(&self) -> usize {
        self.blinded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blinded.is_empty()
    }

    /// Canonical encodings of the blinded elements, for the wire.
    pub fn to_encoded(&self) -> Vec<[u8; ELEMENT_LEN]> {
        self.blinded.iter().map(Group::encode).collect()
    }

    /// Rebuilds a request from wire encodings, enforcing the cap, canonical
    /// encodings, and the no-identity invariant.
    pub fn from_encoded(elements: &[[u8; ELEMENT_LEN]]) -> Result<Self, PsiError> {
        if elements.len() > PSI_INPUT_CAP {
            return Err(PsiError::TooManyInputs {
                count: elements.len(),
            });
        }
        let mut blinded = Vec::with_capacity(elements.len());
        for e in elements {
            let p = Group::decode(e).ok_or(PsiError::MalformedElement)?;
            if Group::is_identity(&p) {
                return Err(PsiError::IdentityElement);
            }
            blinded.push(p);
        }
        Ok(PsiRequest { blinded })
    }

    #[cfg(test)]
    pub(crate) fn from_points(blinded: Vec<Point>) -> Self {
        PsiRequest { blinded }
    }
}

/// Second protocol message: the client's elements re-blinded by the
/// responder, plus tags of the responder's own inputs. Both lists are
/// independently shuffled.
#[derive(Debug, Clone)]
pub struct PsiResponse {
    doubly_blinded: Vec<Point>,
    server_tags: Vec<[u8; TAG_LEN]>,
}

impl PsiResponse {
    pub fn doubly_blinded_len(&self) -> usize {
        self.doubly_blinded.len()
    }

    pub fn server_tags_len(&self) -> usize {
        self.server_tags.len()
    }

    pub fn to_encoded(&self) -> (Vec<[u8; ELEMENT_LEN]>, Vec<[u8; TAG_LEN]>) {
        (
            self.doubly_blinded.iter().map(Group::encode).collect(),
            self.server_tags.clone(),
        )
    }

    pub fn from_encoded(
        doubly_blinded: &[[u8; ELEMENT_LEN]],
        server_tags: &[[u8; TAG_LEN]],
    ) -> Result<Self, PsiError> {
        if doubly_blinded.len() > PSI_INPUT_CAP || server_tags.len() > PSI_INPUT_CAP {
            return Err(PsiError::TooManyInputs {
                count: doubly_blinded.len().max(server_tags.len()),
            });
        }
        let mut points = Vec::with_capacity(doubly_blinded.len());
        for e in doubly_blinded {
            let p = Group::decode(e).ok_or(PsiError::MalformedElement)?;
            if Group::is_identity(&p) {
                return Err(PsiError::IdentityElement);
            }
            points.push(p);
        }
        Ok(PsiResponse {
            doubly_blinded: points,
            server_tags: server_tags.to_vec(),
        })
    }
}

/// Client-side secret for one run: the blinding exponent and the submitted
/// count. Zeroized on drop; consumed by [`psi_finalize`].
// Debug deliberately prints no scalar material.
pub struct PsiClientState {
    scalar: GroupScalar,
    input_count: usize,
}

impl Drop for PsiClientState {
    fn drop(&mut self) {
        Group::zeroize_scalar(&mut self.scalar);
    }
}

impl core::fmt::Debug for PsiClientState {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "PsiClientState(inputs: {})", self.input_count)
    }
}

impl PsiClientState {
    pub fn input_count(&self) -> usize {
        self.input_count
    }
}

/// Deduplicates and hashes raw inputs to group elements in canonical order.
///
/// This is the part of client preparation that does not depend on the run's
/// blinding exponent, so it can be done offline ahead of an encounter.
pub fn precompute_inputs(inputs: &[&[u8]]) -> Result<Vec<Point>, PsiError> {
    let dedup: BTreeSet<&[u8]> = inputs.iter().copied().collect();
    if dedup.len() > PSI_INPUT_CAP {
        return Err(PsiError::TooManyInputs { count: dedup.len() });
    }
    Ok(dedup.into_iter().map(Group::hash_to_group).collect())
}

/// Starts a run: blinds the (deduplicated) inputs under a fresh exponent and
/// shuffles them.
pub fn psi_initiate<R: CryptoRngCore>(
    inputs: &[&[u8]],
    rng: &mut R,
) -> Result<(PsiClientState, PsiRequest), PsiError> {
    let hashed = precompute_inputs(inputs)?;
    psi_initiate_precomputed(&hashed, rng)
}

/// [`psi_initiate`] over elements already passed through
/// [`precompute_inputs`].
pub fn psi_initiate_precomputed<R: CryptoRngCore>(
    hashed: &[Point],
    rng: &mut R,
) -> Result<(PsiClientState, PsiRequest), PsiError> {
    if hashed.len() > PSI_INPUT_CAP {
        return Err(PsiError::TooManyInputs {
            count: hashed.len(),
        });
    }
    let scalar = Group::random_scalar(rng)?;
    let mut blinded: Vec<Point> = hashed.iter().map(|p| Group::mul(p, &scalar)).collect();
    rng::shuffle(rng, &mut blinded);
    Ok((
        PsiClientState {
            scalar,
            input_count: blinded.len(),
        },
        PsiRequest { blinded },
    ))
}

/// Responder side: re-blinds the request under a fresh exponent and tags its
/// own inputs. Reveals nothing to the responder; its own cardinality comes
/// from the symmetric run in the opposite direction.
pub fn psi_respond<R: CryptoRngCore>(
    inputs: &[&[u8]],
    request: &PsiRequest,
    rng: &mut R,
) -> Result<PsiResponse, PsiError> {
    if request.blinded.len() > PSI_INPUT_CAP {
        return Err(PsiError::TooManyInputs {
            count: request.blinded.len(),
        });
    }
    for p in &request.blinded {
        if Group::is_identity(p) {
            return Err(PsiError::IdentityElement);
        }
    }
    let own = precompute_inputs(inputs)?;
    let mut scalar = Group::random_scalar(rng)?;
    let mut doubly_blinded: Vec<Point> = request
        .blinded
        .iter()
        .map(|p| Group::mul(p, &scalar))
        .collect();
    rng::shuffle(rng, &mut doubly_blinded);
    let mut server_tags: Vec<[u8; TAG_LEN]> = own
        .iter()
        .map(|p| Group::tag(&Group::mul(p, &scalar)))
        .collect();
    rng::shuffle(rng, &mut server_tags);
    Group::zeroize_scalar(&mut scalar);
    Ok(PsiResponse {
        doubly_blinded,
        server_tags,
    })
}

/// Unblinds the response and counts tag collisions. Consumes (and erases)
/// the client state; the result never exceeds either side's input count.
pub fn psi_finalize(state: PsiClientState, response: &PsiResponse) -> Result<u32, PsiError> {
    if response.doubly_blinded.len() != state.input_count {
        return Err(PsiError::LengthMismatch {
            expected: state.input_count,
            got: response.doubly_blinded.len(),
        });
    }
    let inverse = Group::invert(&state.scalar);
    let own_tags: BTreeSet<[u8; TAG_LEN]> = response
        .doubly_blinded
        .iter()
        .map(|p| Group::tag(&Group::mul(p, &inverse)))
        .collect();
    let server: BTreeSet<&[u8; TAG_LEN]> = response.server_tags.iter().collect();
    let count = own_tags.iter().filter(|t| server.contains(t)).count();
    drop(state);
    Ok(count as u32)
}
