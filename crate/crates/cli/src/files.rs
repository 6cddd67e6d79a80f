//! Parameter and card files. Each is a 5-byte header followed by
//! length-prefixed big-endian fields, as in the message encoding.
//!
//! * `KSPP1`: n, g, y, digest_width, id_width
//! * `KSSK1`: p, q, phi_n, e, d, ID_s
//! * `KSCD1`: C_in, B1, g, y, n, b, id_width

use num_bigint::BigUint;
use rand::Rng;

use ksauth_core::crypto::check_pair;
use ksauth_core::wire::{FieldReader, FieldWriter};
use ksauth_core::{Identity, IssuedCard, PublicParams, ServerSecret, SmartCard, DIGEST_WIDTH};

use crate::CliError;

pub const PUBLIC_HEADER: &[u8; 5] = b"KSPP1";
pub const SECRET_HEADER: &[u8; 5] = b"KSSK1";
pub const CARD_HEADER: &[u8; 5] = b"KSCD1";

pub const PUBLIC_FILE: &str = "params.pub";
pub const SECRET_FILE: &str = "params.sec";
pub const DB_FILE: &str = "users.ksdb";

fn malformed(e: impl std::fmt::Display) -> CliError {
    CliError::MalformedFile(e.to_string())
}

pub fn encode_public(public: &PublicParams) -> Vec<u8> {
    let mut w = FieldWriter::with_header(PUBLIC_HEADER);
    w.biguint(&public.n)
        .biguint(&public.g)
        .biguint(&public.y)
        .biguint(&BigUint::from(DIGEST_WIDTH))
        .biguint(&BigUint::from(public.id_width));
    w.finish()
}

pub fn decode_public(data: &[u8]) -> Result<PublicParams, CliError> {
    let mut r = FieldReader::with_header(data, PUBLIC_HEADER).map_err(malformed)?;
    let n = r.biguint().map_err(malformed)?;
    let g = r.biguint().map_err(malformed)?;
    let y = r.biguint().map_err(malformed)?;
    let digest_width = r.usize().map_err(malformed)?;
    let id_width = r.usize().map_err(malformed)?;
    r.finish().map_err(malformed)?;
    if digest_width != DIGEST_WIDTH {
        return Err(malformed(format!("unsupported digest width {digest_width}")));
    }
    let public = PublicParams { n, g, y, id_width };
    public.validate().map_err(malformed)?;
    Ok(public)
}

pub fn encode_secret(secret: &ServerSecret, id_s: &Identity) -> Vec<u8> {
    let mut w = FieldWriter::with_header(SECRET_HEADER);
    w.biguint(&secret.p)
        .biguint(&secret.q)
        .biguint(&secret.phi_n)
        .biguint(&secret.e)
        .biguint(&secret.d)
        .bytes(id_s.as_bytes());
    w.finish()
}

pub fn decode_secret(data: &[u8]) -> Result<(ServerSecret, Identity), CliError> {
    let mut r = FieldReader::with_header(data, SECRET_HEADER).map_err(malformed)?;
    let secret = ServerSecret {
        p: r.biguint().map_err(malformed)?,
        q: r.biguint().map_err(malformed)?,
        phi_n: r.biguint().map_err(malformed)?,
        e: r.biguint().map_err(malformed)?,
        d: r.biguint().map_err(malformed)?,
    };
    let id_s = Identity::from_padded(r.bytes().map_err(malformed)?).map_err(malformed)?;
    r.finish().map_err(malformed)?;
    Ok((secret, id_s))
}

/// Loads both halves and checks every parameter invariant.
pub fn load_params<R: Rng + ?Sized>(
    public_bytes: &[u8],
    secret_bytes: &[u8],
    rng: &mut R,
) -> Result<(PublicParams, ServerSecret, Identity), CliError> {
    let public = decode_public(public_bytes)?;
    let (secret, id_s) = decode_secret(secret_bytes)?;
    secret.validate(rng).map_err(malformed)?;
    check_pair(&public, &secret).map_err(malformed)?;
    if id_s.width() != public.id_width {
        return Err(malformed("server identity width differs from id_width"));
    }
    Ok((public, secret, id_s))
}

pub fn encode_card(card: &SmartCard) -> Vec<u8> {
    let mut w = FieldWriter::with_header(CARD_HEADER);
    w.biguint(&card.c_in)
        .biguint(&card.b1)
        .biguint(&card.g)
        .biguint(&card.y)
        .biguint(&card.n)
        .bytes(&card.b)
        .biguint(&BigUint::from(card.id_width));
    w.finish()
}

pub fn decode_card(data: &[u8]) -> Result<SmartCard, CliError> {
    let mut r = FieldReader::with_header(data, CARD_HEADER).map_err(malformed)?;
    let issued = IssuedCard {
        c_in: r.biguint().map_err(malformed)?,
        b1: r.biguint().map_err(malformed)?,
        g: r.biguint().map_err(malformed)?,
        y: r.biguint().map_err(malformed)?,
        n: r.biguint().map_err(malformed)?,
        id_width: 0,
    };
    let b = r.bytes().map_err(malformed)?.to_vec();
    let id_width = r.usize().map_err(malformed)?;
    r.finish().map_err(malformed)?;
    SmartCard::personalize(IssuedCard { id_width, ..issued }, b).map_err(malformed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ksauth_core::generate_params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (public, secret) = generate_params(32, &mut rng).unwrap();
        let id_s = Identity::random(&mut rng, public.id_width);
        let pub_bytes = encode_public(&public);
        let sec_bytes = encode_secret(&secret, &id_s);
        assert_eq!(&pub_bytes[..5], PUBLIC_HEADER);
        assert_eq!(&sec_bytes[..5], SECRET_HEADER);
        let (p2, s2, i2) = load_params(&pub_bytes, &sec_bytes, &mut rng).unwrap();
        assert_eq!((p2, s2, i2), (public, secret, id_s));
    }

    #[test]
    fn inconsistent_params_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (public, _) = generate_params(32, &mut rng).unwrap();
        let (_, other_secret) = generate_params(32, &mut rng).unwrap();
        let id_s = Identity::random(&mut rng, public.id_width);
        assert!(load_params(
            &encode_public(&public),
            &encode_secret(&other_secret, &id_s),
            &mut rng
        )
        .is_err());
        assert!(decode_public(b"KSPP0").is_err());
    }

    #[test]
    fn card_round_trip() {
        let card = SmartCard::personalize(
            IssuedCard {
                c_in: BigUint::from(5u32),
                b1: BigUint::from(9u32),
                g: BigUint::from(2u32),
                y: BigUint::from(128u32),
                n: BigUint::from(143u32),
                id_width: 16,
            },
            vec![1; DIGEST_WIDTH],
        )
        .unwrap();
        assert_eq!(decode_card(&encode_card(&card)).unwrap(), card);
    }
}
