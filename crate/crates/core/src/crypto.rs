//! Modular arithmetic, parameter generation and the byte conventions shared
//! by the card, the server and the wire codec.
//!
//! Every operand that takes part in an XOR or a concatenation is first
//! encoded big-endian and left-padded to a fixed width. The hash is SHA-256
//! throughout, so every digest is [`DIGEST_WIDTH`] bytes.

use std::fmt;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Width in bytes of every hash output.
pub const DIGEST_WIDTH: usize = 32;

/// Default width in bytes of user and server identities.
pub const DEFAULT_ID_WIDTH: usize = 16;

/// Smallest accepted prime size for parameter generation.
pub const MIN_PRIME_BITS: u32 = 8;

/// Attempts allowed for each of the prime, `e` and `g` sampling loops.
pub const RETRY_BUDGET: usize = 10_000;

/// Miller-Rabin rounds; each round has error at most 1/4, so 32 rounds bound
/// the false-positive rate by 2^-64.
const MILLER_RABIN_ROUNDS: usize = 32;

const SMALL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("prime size {0} bits is below the minimum of {MIN_PRIME_BITS}")]
    PrimeBitsTooSmall(u32),
    #[error("parameter generation failed: {0}")]
    ParameterGenerationFailed(&'static str),
    #[error("value is not invertible modulo the given modulus")]
    NotInvertible,
    #[error("value does not fit in {width} bytes")]
    ValueTooWide { width: usize },
    #[error("operand widths differ: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
}

/// Output of the scheme's one-way function.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Digest([u8; DIGEST_WIDTH]);

impl Digest {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; DIGEST_WIDTH] = bytes
            .try_into()
            .map_err(|_| CryptoError::WidthMismatch { left: bytes.len(), right: DIGEST_WIDTH })?;
        Ok(Digest(arr))
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_WIDTH] {
        &self.0
    }

    /// Big-endian integer value of the digest bytes.
    pub fn to_exponent(&self) -> BigUint {
        BigUint::from_bytes_be(&self.0)
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest(")?;
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

/// Public half of the server's parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicParams {
    pub n: BigUint,
    pub g: BigUint,
    pub y: BigUint,
    pub id_width: usize,
}

impl PublicParams {
    /// `ceil(bitlen(n) / 8)`.
    pub fn modulus_width(&self) -> usize {
        modulus_width(&self.n)
    }

    /// Width every operand is encoded to before being XORed or hashed
    /// together: `max(modulus_width, DIGEST_WIDTH, id_width, 8)`.
    pub fn common_width(&self) -> usize {
        common_width(&self.n, self.id_width)
    }

    pub fn with_id_width(mut self, id_width: usize) -> Result<Self, CryptoError> {
        if id_width == 0 || id_width > DIGEST_WIDTH {
            return Err(CryptoError::InvalidParams("id width must be in 1..=digest width"));
        }
        self.id_width = id_width;
        Ok(self)
    }

    /// Checks the invariants that do not need the secret half.
    pub fn validate(&self) -> Result<(), CryptoError> {
        if self.n < BigUint::from(6u32) {
            return Err(CryptoError::InvalidParams("modulus too small"));
        }
        if self.g < BigUint::from(2u32) || self.g >= self.n {
            return Err(CryptoError::InvalidParams("g out of range"));
        }
        if self.y.is_zero() || self.y >= self.n {
            return Err(CryptoError::InvalidParams("y out of range"));
        }
        if !self.g.gcd(&self.n).is_one() {
            return Err(CryptoError::InvalidParams("g shares a factor with n"));
        }
        if self.id_width == 0 || self.id_width > DIGEST_WIDTH {
            return Err(CryptoError::InvalidParams("id width must be in 1..=digest width"));
        }
        Ok(())
    }
}

/// The server's private values.
#[derive(Clone, PartialEq, Eq)]
pub struct ServerSecret {
    pub p: BigUint,
    pub q: BigUint,
    pub phi_n: BigUint,
    pub e: BigUint,
    pub d: BigUint,
}

impl fmt::Debug for ServerSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ServerSecret").finish_non_exhaustive()
    }
}

impl ServerSecret {
    /// Builds the secret from chosen primes and public exponent, computing
    /// `phi_n` and `d`.
    pub fn from_primes(p: BigUint, q: BigUint, e: BigUint) -> Result<Self, CryptoError> {
        if p == q {
            return Err(CryptoError::InvalidParams("p and q must differ"));
        }
        let one = BigUint::one();
        if p <= one || q <= one {
            return Err(CryptoError::InvalidParams("p and q must exceed 1"));
        }
        let phi_n = (&p - 1u32) * (&q - 1u32);
        if e <= one || e >= phi_n {
            return Err(CryptoError::InvalidParams("e out of range"));
        }
        let d = mod_inv(&e, &phi_n)?;
        Ok(ServerSecret { p, q, phi_n, e, d })
    }

    /// Checks every invariant of the secret, including probabilistic
    /// primality of `p` and `q`.
    pub fn validate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(), CryptoError> {
        if self.p == self.q {
            return Err(CryptoError::InvalidParams("p and q must differ"));
        }
        if !is_probable_prime(&self.p, rng) || !is_probable_prime(&self.q, rng) {
            return Err(CryptoError::InvalidParams("p or q is composite"));
        }
        if self.phi_n != (&self.p - 1u32) * (&self.q - 1u32) {
            return Err(CryptoError::InvalidParams("phi_n mismatch"));
        }
        if self.e <= BigUint::one() || self.e >= self.phi_n || !self.e.gcd(&self.phi_n).is_one() {
            return Err(CryptoError::InvalidParams("e not a unit in (1, phi_n)"));
        }
        if !(&self.e * &self.d % &self.phi_n).is_one() {
            return Err(CryptoError::InvalidParams("d is not the inverse of e"));
        }
        Ok(())
    }
}

/// Checks the invariants linking the public and secret halves.
pub fn check_pair(public: &PublicParams, secret: &ServerSecret) -> Result<(), CryptoError> {
    public.validate()?;
    if public.n != &secret.p * &secret.q {
        return Err(CryptoError::InvalidParams("n is not p*q"));
    }
    if public.y != mod_exp(&public.g, &secret.d, &public.n) {
        return Err(CryptoError::InvalidParams("y is not g^d mod n"));
    }
    Ok(())
}

/// Derives the public half from a secret and a chosen `g`.
pub fn params_from_parts(
    secret: &ServerSecret,
    g: BigUint,
    id_width: usize,
) -> Result<PublicParams, CryptoError> {
    let n = &secret.p * &secret.q;
    let y = mod_exp(&g, &secret.d, &n);
    let public = PublicParams { n, g, y, id_width };
    public.validate()?;
    Ok(public)
}

/// Generates a fresh parameter set with `prime_bits`-bit primes and the
/// default identity width.
pub fn generate_params<R: Rng + ?Sized>(
    prime_bits: u32,
    rng: &mut R,
) -> Result<(PublicParams, ServerSecret), CryptoError> {
    if prime_bits < MIN_PRIME_BITS {
        return Err(CryptoError::PrimeBitsTooSmall(prime_bits));
    }
    let p = random_prime(prime_bits, rng)?;
    let q = (0..RETRY_BUDGET)
        .find_map(|_| match random_prime(prime_bits, rng) {
            Ok(q) if q != p => Some(Ok(q)),
            Ok(_) => None,
            Err(e) => Some(Err(e)),
        })
        .ok_or(CryptoError::ParameterGenerationFailed("could not draw q distinct from p"))??;

    let phi_n = (&p - 1u32) * (&q - 1u32);
    // odd e in (1, phi_n) is 2k+1 for k in [1, (phi_n - 2) / 2]
    let k_hi = (&phi_n - 2u32) / 2u32 + 1u32;
    let e = (0..RETRY_BUDGET)
        .map(|_| rng.gen_biguint_range(&BigUint::one(), &k_hi) * 2u32 + 1u32)
        .find(|e| e.gcd(&phi_n).is_one())
        .ok_or(CryptoError::ParameterGenerationFailed("no e coprime to phi(n)"))?;
    let secret = ServerSecret::from_primes(p, q, e)?;

    let n = &secret.p * &secret.q;
    let g_hi = &n - 1u32;
    let g = (0..RETRY_BUDGET)
        .map(|_| rng.gen_biguint_range(&BigUint::from(2u32), &g_hi))
        .find(|g| g.gcd(&n).is_one())
        .ok_or(CryptoError::ParameterGenerationFailed("no g coprime to n"))?;

    let public = params_from_parts(&secret, g, DEFAULT_ID_WIDTH)?;
    Ok((public, secret))
}

fn random_prime<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> Result<BigUint, CryptoError> {
    let top = BigUint::one() << (bits - 1);
    for _ in 0..RETRY_BUDGET {
        let candidate = rng.gen_biguint(u64::from(bits)) | &top | BigUint::one();
        if is_probable_prime(&candidate, rng) {
            return Ok(candidate);
        }
    }
    Err(CryptoError::ParameterGenerationFailed("prime search exhausted"))
}

/// Trial division by small primes followed by Miller-Rabin with random
/// bases.
pub fn is_probable_prime<R: Rng + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    if *n < BigUint::from(2u32) {
        return false;
    }
    for &sp in &SMALL_PRIMES {
        let sp = BigUint::from(sp);
        if *n == sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }

    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let odd = &n_minus_one >> s;
    let two = BigUint::from(2u32);

    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        let mut x = a.modpow(&odd, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// `base^exponent mod modulus`.
///
/// Panics if `modulus < 2`.
pub fn mod_exp(base: &BigUint, exponent: &BigUint, modulus: &BigUint) -> BigUint {
    assert!(*modulus >= BigUint::from(2u32), "modulus must be at least 2");
    base.modpow(exponent, modulus)
}

/// Multiplicative inverse of `a` modulo `modulus`, in `[1, modulus - 1]`.
///
/// Panics if `modulus < 2`.
pub fn mod_inv(a: &BigUint, modulus: &BigUint) -> Result<BigUint, CryptoError> {
    assert!(*modulus >= BigUint::from(2u32), "modulus must be at least 2");
    let m = BigInt::from(modulus.clone());
    let (mut old_r, mut r) = (BigInt::from(a % modulus), m.clone());
    let (mut old_s, mut s) = (BigInt::one(), BigInt::zero());
    while !r.is_zero() {
        let quot = &old_r / &r;
        let next_r = &old_r - &quot * &r;
        old_r = std::mem::replace(&mut r, next_r);
        let next_s = &old_s - &quot * &s;
        old_s = std::mem::replace(&mut s, next_s);
    }
    if !old_r.is_one() {
        return Err(CryptoError::NotInvertible);
    }
    let mut inv = old_s % &m;
    if inv.is_negative() {
        inv += &m;
    }
    Ok(inv.to_biguint().expect("reduced into [0, m)"))
}

/// Big-endian, left zero-padded encoding of exactly `width` bytes.
pub fn encode_fixed(value: &BigUint, width: usize) -> Result<Vec<u8>, CryptoError> {
    let raw = if value.is_zero() { Vec::new() } else { value.to_bytes_be() };
    if raw.len() > width {
        return Err(CryptoError::ValueTooWide { width });
    }
    let mut out = vec![0u8; width - raw.len()];
    out.extend_from_slice(&raw);
    Ok(out)
}

/// `encode_fixed` for a `u64`, used for timestamps.
pub fn encode_u64(value: u64, width: usize) -> Result<Vec<u8>, CryptoError> {
    encode_fixed(&BigUint::from(value), width)
}

pub fn decode_fixed(bytes: &[u8]) -> BigUint {
    BigUint::from_bytes_be(bytes)
}

/// Left-pads `bytes` with zeros up to `width`.
pub fn widen(bytes: &[u8], width: usize) -> Result<Vec<u8>, CryptoError> {
    if bytes.len() > width {
        return Err(CryptoError::ValueTooWide { width });
    }
    let mut out = vec![0u8; width - bytes.len()];
    out.extend_from_slice(bytes);
    Ok(out)
}

pub fn xor_fixed(a: &[u8], b: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if a.len() != b.len() {
        return Err(CryptoError::WidthMismatch { left: a.len(), right: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x ^ y).collect())
}

pub fn hash_digest(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// Hash of the concatenation of `parts`.
pub fn hash_concat(parts: &[&[u8]]) -> Digest {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    Digest(hasher.finalize().into())
}

pub fn hash_to_exponent(data: &[u8]) -> BigUint {
    hash_digest(data).to_exponent()
}

/// `h(data)` used as an exponentiation base: the hash value reduced mod `n`,
/// re-hashed with a 4-byte counter suffix while the residue is 0 or 1.
pub fn hash_to_base(data: &[u8], n: &BigUint) -> BigUint {
    let mut counter: u32 = 0;
    loop {
        let digest = if counter == 0 {
            hash_digest(data)
        } else {
            hash_concat(&[data, &counter.to_be_bytes()])
        };
        let base = digest.to_exponent() % n;
        if base > BigUint::one() {
            return base;
        }
        counter = counter.checked_add(1).expect("hash base search exhausted");
    }
}

pub fn modulus_width(n: &BigUint) -> usize {
    (n.bits() as usize).div_ceil(8)
}

pub fn common_width(n: &BigUint, id_width: usize) -> usize {
    modulus_width(n).max(DIGEST_WIDTH).max(id_width).max(8)
}
