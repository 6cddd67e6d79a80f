//! Messages exchanged between the card and the server.

use num_bigint::BigUint;

use crate::crypto::Digest;
use crate::identity::Identity;

/// `<ID_i, h(b xor PWD_i)>`, sent once over a secure channel at
/// registration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistrationRequest {
    pub id: Identity,
    pub credential: Digest,
}

/// Login request `<B2, M, C>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoginRequest {
    pub b2: BigUint,
    pub m: Digest,
    /// Masked identity, `DIGEST_WIDTH` bytes.
    pub c: Vec<u8>,
}

/// Server reply `X = <h(C1), r, T_s>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerReply {
    pub h_c1: Digest,
    pub r: BigUint,
    pub t_s: u64,
}

/// Final card message `Z = <M1, T>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthMessage {
    pub m1: BigUint,
    pub t: u64,
}

/// Card contents as issued by the server, before the user stores `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssuedCard {
    pub c_in: BigUint,
    pub b1: BigUint,
    pub g: BigUint,
    pub y: BigUint,
    pub n: BigUint,
    pub id_width: usize,
}
