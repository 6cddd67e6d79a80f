//! The formulas both protocol roles evaluate. Each takes the common operand
//! width `w` (see [`PublicParams::common_width`](crate::PublicParams::common_width)).

use num_bigint::BigUint;

use crate::crypto::{
    encode_fixed, encode_u64, hash_concat, hash_digest, hash_to_base, mod_exp, xor_fixed,
    CryptoError, Digest, DIGEST_WIDTH,
};
use crate::identity::Identity;

/// `h(b xor PWD)`, with the password first hashed to digest width.
pub fn password_credential(b: &[u8], password: &[u8]) -> Result<Digest, CryptoError> {
    let mapped = hash_digest(password);
    Ok(hash_digest(&xor_fixed(b, mapped.as_bytes())?))
}

/// `B1 = h(ID)^h(b xor PWD) mod n`.
pub fn credential_check_value(id: &Identity, credential: &Digest, n: &BigUint) -> BigUint {
    mod_exp(&hash_to_base(id.as_bytes(), n), &credential.to_exponent(), n)
}

/// `h(d || T_R || ID)`, the exponent of the unblinded credential.
pub fn credential_exponent(
    d: &BigUint,
    registered_at: u64,
    id: &Identity,
    w: usize,
) -> Result<BigUint, CryptoError> {
    let d = encode_fixed(d, w)?;
    let t_r = encode_u64(registered_at, w)?;
    Ok(hash_concat(&[&d, &t_r, id.as_bytes()]).to_exponent())
}

/// `h(B2 xor B3)`, the mask hiding the identity inside `C`.
pub fn identity_mask(b2: &BigUint, b3: &BigUint, w: usize) -> Result<Digest, CryptoError> {
    let mixed = xor_fixed(&encode_fixed(b2, w)?, &encode_fixed(b3, w)?)?;
    Ok(hash_digest(&mixed))
}

/// `C = ID xor h(B2 xor B3)`.
pub fn mask_identity(id: &Identity, mask: &Digest) -> Result<Vec<u8>, CryptoError> {
    xor_fixed(&id.widened(DIGEST_WIDTH)?, mask.as_bytes())
}

/// `M = h(C' || C)`.
pub fn login_authenticator(unblinded: &BigUint, c: &[u8], w: usize) -> Result<Digest, CryptoError> {
    Ok(hash_concat(&[&encode_fixed(unblinded, w)?, c]))
}

/// `t = h(T_s xor ID_i xor ID_s xor B3)`.
pub fn reply_exponent(
    t_s: u64,
    id: &Identity,
    id_s: &Identity,
    b3: &BigUint,
    w: usize,
) -> Result<BigUint, CryptoError> {
    let mixed = xor_fixed(&encode_u64(t_s, w)?, &id.widened(w)?)?;
    let mixed = xor_fixed(&mixed, &id_s.widened(w)?)?;
    let mixed = xor_fixed(&mixed, &encode_fixed(b3, w)?)?;
    Ok(hash_digest(&mixed).to_exponent())
}

/// `h(C1)` as carried in the reply, or `h(C2)` on the card.
pub fn reply_commitment(c: &BigUint, w: usize) -> Result<Digest, CryptoError> {
    Ok(hash_digest(&encode_fixed(c, w)?))
}

/// `M1 = h(C2 xor ID)^T mod n`, or `M2` with `C1`.
pub fn auth_value(
    c: &BigUint,
    id: &Identity,
    t: u64,
    n: &BigUint,
    w: usize,
) -> Result<BigUint, CryptoError> {
    let base = hash_digest(&xor_fixed(&encode_fixed(c, w)?, &id.widened(w)?)?).to_exponent();
    Ok(mod_exp(&base, &BigUint::from(t), n))
}

/// `h(ID_i || ID_s || C)`.
pub fn session_key(
    id: &Identity,
    id_s: &Identity,
    c: &BigUint,
    w: usize,
) -> Result<Digest, CryptoError> {
    Ok(hash_concat(&[id.as_bytes(), id_s.as_bytes(), &encode_fixed(c, w)?]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_round_trips_identity() {
        let id = Identity::new(b"carol", 16).unwrap();
        let mask = identity_mask(&BigUint::from(1234u32), &BigUint::from(999u32), 32).unwrap();
        let c = mask_identity(&id, &mask).unwrap();
        assert_ne!(c, id.widened(DIGEST_WIDTH).unwrap());
        let back = xor_fixed(&c, mask.as_bytes()).unwrap();
        assert_eq!(&back[DIGEST_WIDTH - 16..], id.as_bytes());
        assert!(back[..DIGEST_WIDTH - 16].iter().all(|&b| b == 0));
    }

    #[test]
    fn reply_exponent_depends_on_server_identity() {
        let id = Identity::new(b"carol", 16).unwrap();
        let s1 = Identity::new(b"server-1", 16).unwrap();
        let s2 = Identity::new(b"server-2", 16).unwrap();
        let b3 = BigUint::from(77u32);
        assert_ne!(
            reply_exponent(10, &id, &s1, &b3, 32).unwrap(),
            reply_exponent(10, &id, &s2, &b3, 32).unwrap()
        );
    }

    #[test]
    fn password_credential_handles_long_passwords() {
        let b = [7u8; DIGEST_WIDTH];
        let long = vec![b'x'; 4 * DIGEST_WIDTH];
        assert!(password_credential(&b, &long).is_ok());
        assert!(password_credential(&b[..3], b"pw").is_err());
    }
}
