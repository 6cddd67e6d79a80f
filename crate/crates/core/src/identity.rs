use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::crypto::{widen, CryptoError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdentityError {
    #[error("identity is empty")]
    Empty,
    #[error("identity is {len} bytes, wider than {width}")]
    TooLong { len: usize, width: usize },
    #[error("identity contains a zero byte")]
    EmbeddedZero,
    #[error("padded identity is malformed")]
    BadPadding,
}

/// A user or server identity, right-padded with zero bytes to a fixed width.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Identity(Vec<u8>);

impl Identity {
    pub fn new(raw: &[u8], width: usize) -> Result<Self, IdentityError> {
        if raw.is_empty() {
            return Err(IdentityError::Empty);
        }
        if raw.len() > width {
            return Err(IdentityError::TooLong { len: raw.len(), width });
        }
        if raw.contains(&0) {
            return Err(IdentityError::EmbeddedZero);
        }
        let mut bytes = raw.to_vec();
        bytes.resize(width, 0);
        Ok(Identity(bytes))
    }

    /// Accepts an already padded identity: a non-empty run of nonzero bytes
    /// followed only by zeros.
    pub fn from_padded(bytes: &[u8]) -> Result<Self, IdentityError> {
        let used = bytes.iter().position(|&b| b == 0).unwrap_or(bytes.len());
        if used == 0 {
            return Err(IdentityError::Empty);
        }
        if bytes[used..].iter().any(|&b| b != 0) {
            return Err(IdentityError::BadPadding);
        }
        Ok(Identity(bytes.to_vec()))
    }

    /// Uniform draw from the identities that fill every byte, 255^width of
    /// them.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, width: usize) -> Self {
        Identity((0..width).map(|_| rng.gen_range(1..=255u8)).collect())
    }

    /// The padded bytes, exactly `width()` long.
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// The identity without its zero padding.
    pub fn raw(&self) -> &[u8] {
        let used = self.0.iter().position(|&b| b == 0).unwrap_or(self.0.len());
        &self.0[..used]
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    /// Padded bytes left-extended with zeros to `width`, the form in which
    /// the identity enters XOR expressions.
    pub fn widened(&self, width: usize) -> Result<Vec<u8>, CryptoError> {
        widen(&self.0, width)
    }
}

impl fmt::Debug for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match std::str::from_utf8(self.raw()) {
            Ok(s) => write!(f, "Identity({s:?})"),
            Err(_) => write!(f, "Identity({:02x?})", self.raw()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn pads_to_width() {
        let id = Identity::new(b"alice", 8).unwrap();
        assert_eq!(id.as_bytes(), b"alice\0\0\0");
        assert_eq!(id.raw(), b"alice");
        assert_eq!(Identity::from_padded(id.as_bytes()).unwrap(), id);
        assert_eq!(id.widened(10).unwrap(), b"\0\0alice\0\0\0".to_vec());
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(Identity::new(b"", 8), Err(IdentityError::Empty));
        assert_eq!(Identity::new(b"a\0b", 8), Err(IdentityError::EmbeddedZero));
        assert_eq!(
            Identity::new(b"123456789", 8),
            Err(IdentityError::TooLong { len: 9, width: 8 })
        );
        assert_eq!(Identity::from_padded(b"ab\0c"), Err(IdentityError::BadPadding));
        assert_eq!(Identity::from_padded(b"\0\0"), Err(IdentityError::Empty));
    }

    #[test]
    fn random_identities_are_valid() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..100 {
            let id = Identity::random(&mut rng, 16);
            assert_eq!(id.raw().len(), 16);
            assert_eq!(Identity::from_padded(id.as_bytes()).unwrap(), id);
        }
    }
}
