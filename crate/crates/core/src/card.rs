//! User side of the scheme: registration request, card personalization and
//! the card's half of the login and authentication phases.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::Rng;
use thiserror::Error;

use crate::crypto::{mod_exp, mod_inv, CryptoError, Digest, DIGEST_WIDTH};
use crate::identity::Identity;
use crate::messages::{AuthMessage, IssuedCard, LoginRequest, RegistrationRequest, ServerReply};
use crate::scheme;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CardError {
    #[error("password is empty")]
    EmptyPassword,
    #[error("issued card payload is invalid: {0}")]
    InvalidCardPayload(&'static str),
    #[error("identity or password rejected by the card")]
    WrongCredentials,
    #[error("server reply is older than the freshness window")]
    StaleReply,
    #[error("server reply failed verification")]
    ServerVerificationFailed,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Draws `b` and builds `<ID, h(b xor PWD)>`. The returned `b` stays with the
/// user until it is written to the card.
pub fn create_registration_request<R: Rng + ?Sized>(
    id: &Identity,
    password: &[u8],
    rng: &mut R,
) -> Result<(RegistrationRequest, Vec<u8>), CardError> {
    if password.is_empty() {
        return Err(CardError::EmptyPassword);
    }
    let mut b = vec![0u8; DIGEST_WIDTH];
    rng.fill_bytes(&mut b);
    let credential = scheme::password_credential(&b, password)?;
    Ok((RegistrationRequest { id: id.clone(), credential }, b))
}

/// A personalized smart card `<C_in, B1, g, y, n, b>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmartCard {
    pub c_in: BigUint,
    pub b1: BigUint,
    pub g: BigUint,
    pub y: BigUint,
    pub n: BigUint,
    pub b: Vec<u8>,
    pub id_width: usize,
}

impl SmartCard {
    /// Stores the user's `b` on an issued card.
    pub fn personalize(issued: IssuedCard, b: Vec<u8>) -> Result<Self, CardError> {
        if b.len() != DIGEST_WIDTH {
            return Err(CryptoError::WidthMismatch { left: b.len(), right: DIGEST_WIDTH }.into());
        }
        let n = &issued.n;
        if *n < BigUint::from(6u32) {
            return Err(CardError::InvalidCardPayload("modulus too small"));
        }
        let in_unit_range = |v: &BigUint| !v.is_zero() && v < n;
        if !in_unit_range(&issued.c_in) {
            return Err(CardError::InvalidCardPayload("C_in out of range"));
        }
        if !in_unit_range(&issued.b1) {
            return Err(CardError::InvalidCardPayload("B1 out of range"));
        }
        if issued.g <= BigUint::one() || issued.g >= *n {
            return Err(CardError::InvalidCardPayload("g out of range"));
        }
        if !in_unit_range(&issued.y) {
            return Err(CardError::InvalidCardPayload("y out of range"));
        }
        if issued.id_width == 0 || issued.id_width > DIGEST_WIDTH {
            return Err(CardError::InvalidCardPayload("identity width out of range"));
        }
        Ok(SmartCard {
            c_in: issued.c_in,
            b1: issued.b1,
            g: issued.g,
            y: issued.y,
            n: issued.n,
            b,
            id_width: issued.id_width,
        })
    }

    pub fn common_width(&self) -> usize {
        crate::crypto::common_width(&self.n, self.id_width)
    }

    /// Login steps 1 and 2: checks the entered credentials against `B1`, then
    /// builds `<B2, M, C>` for a fresh `j`.
    pub fn login_begin<R: Rng + ?Sized>(
        &self,
        id_entered: &Identity,
        password_entered: &[u8],
        now: u64,
        rng: &mut R,
    ) -> Result<(LoginRequest, CardSession), CardError> {
        if id_entered.width() != self.id_width || password_entered.is_empty() {
            return Err(CardError::WrongCredentials);
        }
        let credential = scheme::password_credential(&self.b, password_entered)?;
        if scheme::credential_check_value(id_entered, &credential, &self.n) != self.b1 {
            return Err(CardError::WrongCredentials);
        }

        let w = self.common_width();
        let n = &self.n;
        let j = rng.gen_biguint_range(&BigUint::from(2u32), &(n - 1u32));
        let b2 = mod_exp(&self.g, &j, n);
        let b3 = mod_exp(&self.y, &j, n);
        let mask = scheme::identity_mask(&b2, &b3, w)?;
        let c = scheme::mask_identity(id_entered, &mask)?;

        // C_in * y^-h(b xor PWD), the inverse taken first since the card has no phi(n)
        let y_inv = mod_inv(&self.y, n)?;
        let c_in_prime = &self.c_in * mod_exp(&y_inv, &credential.to_exponent(), n) % n;
        let m = scheme::login_authenticator(&c_in_prime, &c, w)?;

        let request = LoginRequest { b2: b2.clone(), m, c: c.clone() };
        let session = CardSession {
            j,
            b2,
            b3,
            c,
            c_in_prime,
            id: id_entered.clone(),
            started_at: now,
            n: n.clone(),
            width: w,
        };
        Ok((request, session))
    }
}

/// Card state between sending the login request and sending `Z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CardSession {
    pub j: BigUint,
    pub b2: BigUint,
    pub b3: BigUint,
    pub c: Vec<u8>,
    pub c_in_prime: BigUint,
    pub id: Identity,
    pub started_at: u64,
    n: BigUint,
    width: usize,
}

impl CardSession {
    /// Login steps 6 to 8. `id_s` has to reach the card from outside the
    /// protocol: no message carries it.
    pub fn process_server_reply(
        &self,
        reply: &ServerReply,
        id_s: &Identity,
        now: u64,
        delta_t: u64,
    ) -> Result<(AuthMessage, BigUint), CardError> {
        if now.saturating_sub(reply.t_s) > delta_t {
            return Err(CardError::StaleReply);
        }
        if id_s.width() != self.id.width() {
            return Err(CardError::ServerVerificationFailed);
        }
        let w = self.width;
        let t_star = scheme::reply_exponent(reply.t_s, &self.id, id_s, &self.b3, w)?;
        let c2 = mod_exp(&self.c_in_prime, &(&reply.r + t_star), &self.n);
        if scheme::reply_commitment(&c2, w)? != reply.h_c1 {
            return Err(CardError::ServerVerificationFailed);
        }
        let m1 = scheme::auth_value(&c2, &self.id, now, &self.n, w)?;
        Ok((AuthMessage { m1, t: now }, c2))
    }

    /// `S^U_Key = h(ID_i || ID_s || C2)`.
    pub fn derive_session_key(&self, id_s: &Identity, c2: &BigUint) -> Result<Digest, CardError> {
        Ok(scheme::session_key(&self.id, id_s, c2, self.width)?)
    }
}
