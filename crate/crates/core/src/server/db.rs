//! The server's user table.
//!
//! Each record is indexed by `h(d || ID)` and holds `(ID, T_R)` encrypted
//! under keys derived from `d`. The cipher is a hash keystream
//! `h(k_enc || token || counter)` with tag `h(k_mac || token || body)`; the
//! token doubles as a per-record nonce since it is unique within a table.
//!
//! On-disk layout: `KSDB1`, then per record the 32-byte token, a 4-byte
//! big-endian ciphertext length, the ciphertext, and an 8-byte big-endian
//! creation time.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use num_bigint::BigUint;
use thiserror::Error;

use crate::crypto::{encode_fixed, hash_concat, CryptoError, Digest, DIGEST_WIDTH};
use crate::identity::{Identity, IdentityError};

pub const DB_MAGIC: &[u8; 5] = b"KSDB1";

const ENC_LABEL: &[u8] = b"ksauth/db/enc";
const MAC_LABEL: &[u8] = b"ksauth/db/mac";

#[derive(Debug, Error)]
pub enum DbError {
    #[error("identity already registered")]
    DuplicateIdentity,
    #[error("record failed authentication")]
    TamperedRecord,
    #[error("malformed database file: {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub lookup_token: Digest,
    pub ciphertext: Vec<u8>,
    pub created_at: u64,
}

/// Keys for sealing and opening user records, derived from the server
/// secret `d`.
#[derive(Clone)]
pub struct RecordCipher {
    enc_key: Digest,
    mac_key: Digest,
}

impl std::fmt::Debug for RecordCipher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RecordCipher").finish_non_exhaustive()
    }
}

impl RecordCipher {
    pub fn from_secret(d: &BigUint, width: usize) -> Result<Self, CryptoError> {
        let d = encode_fixed(d, width)?;
        Ok(RecordCipher {
            enc_key: hash_concat(&[&d, ENC_LABEL]),
            mac_key: hash_concat(&[&d, MAC_LABEL]),
        })
    }

    fn apply_keystream(&self, token: &Digest, data: &mut [u8]) {
        for (counter, chunk) in data.chunks_mut(DIGEST_WIDTH).enumerate() {
            let block = hash_concat(&[
                self.enc_key.as_bytes(),
                token.as_bytes(),
                &(counter as u32).to_be_bytes(),
            ]);
            chunk.iter_mut().zip(block.as_bytes()).for_each(|(c, k)| *c ^= k);
        }
    }

    fn tag(&self, token: &Digest, body: &[u8]) -> Digest {
        hash_concat(&[self.mac_key.as_bytes(), token.as_bytes(), body])
    }

    pub fn seal(&self, token: &Digest, id: &Identity, registered_at: u64) -> Vec<u8> {
        let mut body = id.as_bytes().to_vec();
        body.extend_from_slice(&registered_at.to_be_bytes());
        self.apply_keystream(token, &mut body);
        let tag = self.tag(token, &body);
        body.extend_from_slice(tag.as_bytes());
        body
    }

    /// Returns `(ID, T_R)`.
    pub fn open(&self, token: &Digest, ciphertext: &[u8]) -> Result<(Identity, u64), DbError> {
        if ciphertext.len() < DIGEST_WIDTH + 9 {
            return Err(DbError::TamperedRecord);
        }
        let (body, tag) = ciphertext.split_at(ciphertext.len() - DIGEST_WIDTH);
        if self.tag(token, body).as_bytes() != tag {
            return Err(DbError::TamperedRecord);
        }
        let mut plain = body.to_vec();
        self.apply_keystream(token, &mut plain);
        let (id, t_r) = plain.split_at(plain.len() - 8);
        let t_r = u64::from_be_bytes(t_r.try_into().expect("8 bytes"));
        Ok((Identity::from_padded(id)?, t_r))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserDb {
    records: BTreeMap<Digest, UserRecord>,
}

impl UserDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn store(&mut self, record: UserRecord) -> Result<(), DbError> {
        if self.records.contains_key(&record.lookup_token) {
            return Err(DbError::DuplicateIdentity);
        }
        self.records.insert(record.lookup_token, record);
        Ok(())
    }

    pub fn find(&self, token: &Digest) -> Option<&UserRecord> {
        self.records.get(token)
    }

    pub fn contains(&self, token: &Digest) -> bool {
        self.records.contains_key(token)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &UserRecord> {
        self.records.values()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), DbError> {
        out.write_all(DB_MAGIC)?;
        for record in self.records.values() {
            let len = u32::try_from(record.ciphertext.len())
                .map_err(|_| DbError::Malformed("ciphertext too long"))?;
            out.write_all(record.lookup_token.as_bytes())?;
            out.write_all(&len.to_be_bytes())?;
            out.write_all(&record.ciphertext)?;
            out.write_all(&record.created_at.to_be_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, DbError> {
        let mut data = Vec::new();
        input.read_to_end(&mut data)?;
        Self::from_bytes(&data)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, DbError> {
        let mut rest =
            data.strip_prefix(DB_MAGIC.as_slice()).ok_or(DbError::Malformed("bad magic"))?;
        let mut db = UserDb::new();
        while !rest.is_empty() {
            let token = take(&mut rest, DIGEST_WIDTH)?;
            let len = u32::from_be_bytes(take(&mut rest, 4)?.try_into().expect("4 bytes"));
            let ciphertext = take(&mut rest, len as usize)?.to_vec();
            let created_at = u64::from_be_bytes(take(&mut rest, 8)?.try_into().expect("8 bytes"));
            let record =
                UserRecord { lookup_token: Digest::from_bytes(token)?, ciphertext, created_at };
            db.store(record).map_err(|_| DbError::Malformed("duplicate token"))?;
        }
        Ok(db)
    }
}

fn take<'a>(rest: &mut &'a [u8], len: usize) -> Result<&'a [u8], DbError> {
    if rest.len() < len {
        return Err(DbError::Malformed("truncated record"));
    }
    let (head, tail) = rest.split_at(len);
    *rest = tail;
    Ok(head)
}
