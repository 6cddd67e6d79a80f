//! Server side of the scheme: card issuance, login steps 3 to 5 and the
//! authentication phase.

pub mod db;
pub mod replay;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::Rng;
use thiserror::Error;

pub use db::{DbError, RecordCipher, UserDb, UserRecord};
pub use replay::{CheckCost, ReplayMode, ReplayPolicy};

use crate::crypto::{
    encode_fixed, hash_concat, hash_digest, mod_exp, xor_fixed, CryptoError, Digest, PublicParams,
    ServerSecret, DIGEST_WIDTH,
};
use crate::identity::Identity;
use crate::messages::{AuthMessage, IssuedCard, LoginRequest, RegistrationRequest, ServerReply};
use crate::scheme;
use crate::wire::Message;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("identity already registered")]
    DuplicateIdentity,
    #[error("request is malformed: {0}")]
    MalformedRequest(&'static str),
    #[error("login request was seen before")]
    ReplayDetected,
    #[error("no registered user matches the request")]
    UnknownUser,
    #[error("login authenticator mismatch")]
    BadAuthenticator,
    #[error("auth message is older than the freshness window")]
    StaleAuthMessage,
    #[error("auth message failed verification")]
    AuthFailed,
    #[error(transparent)]
    Db(#[from] DbError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Server state for one login, from the reply until `Z` arrives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerSession {
    pub id: Identity,
    pub c_star: BigUint,
    pub c1: BigUint,
    pub b3_prime: BigUint,
    pub r: BigUint,
    pub t_s: u64,
}

#[derive(Debug, Clone)]
pub struct AuthServer {
    public: PublicParams,
    secret: ServerSecret,
    id_s: Identity,
    cipher: RecordCipher,
    db: UserDb,
    policy: ReplayPolicy,
}

impl AuthServer {
    pub fn new(
        public: PublicParams,
        secret: ServerSecret,
        id_s: Identity,
        policy: ReplayPolicy,
    ) -> Result<Self, ServerError> {
        if id_s.width() != public.id_width {
            return Err(ServerError::MalformedRequest("server identity width"));
        }
        let cipher = RecordCipher::from_secret(&secret.d, public.common_width())?;
        Ok(AuthServer { public, secret, id_s, cipher, db: UserDb::new(), policy })
    }

    /// Picks a random private server identity.
    pub fn initialize<R: Rng + ?Sized>(
        public: PublicParams,
        secret: ServerSecret,
        mode: ReplayMode,
        rng: &mut R,
    ) -> Result<Self, ServerError> {
        let id_s = Identity::random(rng, public.id_width);
        Self::new(public, secret, id_s, ReplayPolicy::new(mode))
    }

    pub fn public(&self) -> &PublicParams {
        &self.public
    }

    pub fn secret(&self) -> &ServerSecret {
        &self.secret
    }

    /// The server identity. Never sent on the wire.
    pub fn server_identity(&self) -> &Identity {
        &self.id_s
    }

    pub fn db(&self) -> &UserDb {
        &self.db
    }

    pub fn replace_db(&mut self, db: UserDb) {
        self.db = db;
    }

    pub fn policy(&self) -> &ReplayPolicy {
        &self.policy
    }

    pub fn install_policy(&mut self, policy: ReplayPolicy) {
        self.policy = policy;
    }

    fn width(&self) -> usize {
        self.public.common_width()
    }

    /// `h(d || ID)`.
    pub fn lookup_token(&self, id: &Identity) -> Result<Digest, ServerError> {
        let d = encode_fixed(&self.secret.d, self.width())?;
        Ok(hash_concat(&[&d, id.as_bytes()]))
    }

    /// Decrypts a stored record into `(ID, T_R)`.
    pub fn open_record(&self, record: &UserRecord) -> Result<(Identity, u64), ServerError> {
        Ok(self.cipher.open(&record.lookup_token, &record.ciphertext)?)
    }

    /// Registration: issues `<C_in, B1, g, y, n>` and stores the encrypted
    /// `(ID, T_R)` with `T_R = now`.
    pub fn handle_registration(
        &mut self,
        request: &RegistrationRequest,
        now: u64,
    ) -> Result<IssuedCard, ServerError> {
        if request.id.width() != self.public.id_width {
            return Err(ServerError::MalformedRequest("identity width"));
        }
        let token = self.lookup_token(&request.id)?;
        if self.db.contains(&token) {
            return Err(ServerError::DuplicateIdentity);
        }
        let n = &self.public.n;
        let b1 = scheme::credential_check_value(&request.id, &request.credential, n);
        let exponent = scheme::credential_exponent(&self.secret.d, now, &request.id, self.width())?
            + request.credential.to_exponent();
        let c_in = mod_exp(&self.public.y, &exponent, n);

        let record = UserRecord {
            lookup_token: token,
            ciphertext: self.cipher.seal(&token, &request.id, now),
            created_at: now,
        };
        self.db.store(record).map_err(|e| match e {
            DbError::DuplicateIdentity => ServerError::DuplicateIdentity,
            other => other.into(),
        })?;

        Ok(IssuedCard {
            c_in,
            b1,
            g: self.public.g.clone(),
            y: self.public.y.clone(),
            n: n.clone(),
            id_width: self.public.id_width,
        })
    }

    /// Recovers the identity hidden in `C`. Returns the identity with its
    /// lookup token, or `UnknownUser` if the unmasked bytes are not a
    /// well-formed identity.
    fn derive_identity(
        &self,
        request: &LoginRequest,
        b3_prime: &BigUint,
    ) -> Result<(Identity, Digest), ServerError> {
        let mask = scheme::identity_mask(&request.b2, b3_prime, self.width())?;
        let padded = xor_fixed(&request.c, mask.as_bytes())?;
        let (prefix, id_bytes) = padded.split_at(DIGEST_WIDTH - self.public.id_width);
        if prefix.iter().any(|&b| b != 0) {
            return Err(ServerError::UnknownUser);
        }
        let id = Identity::from_padded(id_bytes).map_err(|_| ServerError::UnknownUser)?;
        let token = self.lookup_token(&id)?;
        Ok((id, token))
    }

    /// Login steps 3 to 5.
    pub fn handle_login_request<R: Rng + ?Sized>(
        &mut self,
        request: &LoginRequest,
        now: u64,
        rng: &mut R,
    ) -> Result<(ServerReply, ServerSession), ServerError> {
        let n = self.public.n.clone();
        if request.b2.is_zero() || request.b2 >= n {
            return Err(ServerError::MalformedRequest("B2 out of range"));
        }
        if request.c.len() != DIGEST_WIDTH {
            return Err(ServerError::MalformedRequest("C has wrong width"));
        }
        let w = self.width();

        let b3_prime = mod_exp(&request.b2, &self.secret.d, &n);
        let (id, token) = self.derive_identity(request, &b3_prime)?;

        let request_digest = hash_digest(&Message::LoginRequest(request.clone()).encode());
        if self.policy.seen(&token, &request_digest) {
            return Err(ServerError::ReplayDetected);
        }

        let record = self.db.find(&token).ok_or(ServerError::UnknownUser)?;
        let (stored_id, registered_at) = self.open_record(record)?;
        if stored_id != id {
            return Err(ServerError::UnknownUser);
        }

        let c_star = mod_exp(
            &self.public.y,
            &scheme::credential_exponent(&self.secret.d, registered_at, &id, w)?,
            &n,
        );
        if scheme::login_authenticator(&c_star, &request.c, w)? != request.m {
            return Err(ServerError::BadAuthenticator);
        }

        let t = scheme::reply_exponent(now, &id, &self.id_s, &b3_prime, w)?;
        let r = rng.gen_biguint_range(&BigUint::one(), &n);
        let c1 = mod_exp(&c_star, &(&r + t), &n);
        let reply = ServerReply { h_c1: scheme::reply_commitment(&c1, w)?, r: r.clone(), t_s: now };

        self.policy.record(&token, request_digest);
        let session = ServerSession { id, c_star, c1, b3_prime, r, t_s: now };
        Ok((reply, session))
    }

    /// Authentication phase: checks `M1 == M2` and returns `S^S_Key`.
    pub fn handle_auth_message(
        &self,
        session: &ServerSession,
        z: &AuthMessage,
        now: u64,
        delta_t: u64,
    ) -> Result<Digest, ServerError> {
        if now.saturating_sub(z.t) > delta_t {
            return Err(ServerError::StaleAuthMessage);
        }
        let w = self.width();
        let m2 = scheme::auth_value(&session.c1, &session.id, z.t, &self.public.n, w)?;
        if m2 != z.m1 {
            return Err(ServerError::AuthFailed);
        }
        Ok(scheme::session_key(&session.id, &self.id_s, &session.c1, w)?)
    }
}
