//! Binary encoding of protocol messages.
//!
//! A message is a one-byte kind tag followed by its fields in declaration
//! order. Each field is a 4-byte big-endian length and the big-endian value
//! bytes. Integers use their shortest encoding (zero is empty), timestamps
//! are always 8 bytes.

use num_bigint::BigUint;
use thiserror::Error;

use crate::crypto::{Digest, DIGEST_WIDTH};
use crate::identity::Identity;
use crate::messages::{AuthMessage, LoginRequest, RegistrationRequest, ServerReply};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed message: {0}")]
    MalformedMessage(&'static str),
}

fn malformed(reason: &'static str) -> WireError {
    WireError::MalformedMessage(reason)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageKind {
    LoginRequest = 0x01,
    ServerReply = 0x02,
    AuthMessage = 0x03,
    RegistrationRequest = 0x04,
}

impl MessageKind {
    pub fn from_tag(tag: u8) -> Result<Self, WireError> {
        match tag {
            0x01 => Ok(MessageKind::LoginRequest),
            0x02 => Ok(MessageKind::ServerReply),
            0x03 => Ok(MessageKind::AuthMessage),
            0x04 => Ok(MessageKind::RegistrationRequest),
            _ => Err(malformed("unknown kind tag")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::LoginRequest => "login_request",
            MessageKind::ServerReply => "server_reply",
            MessageKind::AuthMessage => "auth_message",
            MessageKind::RegistrationRequest => "registration_request",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    LoginRequest(LoginRequest),
    ServerReply(ServerReply),
    AuthMessage(AuthMessage),
    RegistrationRequest(RegistrationRequest),
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::LoginRequest(_) => MessageKind::LoginRequest,
            Message::ServerReply(_) => MessageKind::ServerReply,
            Message::AuthMessage(_) => MessageKind::AuthMessage,
            Message::RegistrationRequest(_) => MessageKind::RegistrationRequest,
        }
    }

    /// Named fields with their encoded value bytes, in wire order.
    pub fn fields(&self) -> Vec<(&'static str, Vec<u8>)> {
        match self {
            Message::LoginRequest(m) => vec![
                ("B2", biguint_bytes(&m.b2)),
                ("M", m.m.as_bytes().to_vec()),
                ("C", m.c.clone()),
            ],
            Message::ServerReply(m) => vec![
                ("h_C1", m.h_c1.as_bytes().to_vec()),
                ("r", biguint_bytes(&m.r)),
                ("T_s", m.t_s.to_be_bytes().to_vec()),
            ],
            Message::AuthMessage(m) => {
                vec![("M1", biguint_bytes(&m.m1)), ("T", m.t.to_be_bytes().to_vec())]
            }
            Message::RegistrationRequest(m) => vec![
                ("ID", m.id.as_bytes().to_vec()),
                ("h_b_PWD", m.credential.as_bytes().to_vec()),
            ],
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = FieldWriter::new(self.kind() as u8);
        for (_, value) in self.fields() {
            out.bytes(&value);
        }
        out.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (&tag, _) = bytes.split_first().ok_or(malformed("empty buffer"))?;
        deserialize_message(MessageKind::from_tag(tag)?, bytes)
    }
}

pub fn serialize_message(message: &Message) -> Vec<u8> {
    message.encode()
}

/// Decodes `bytes`, which must carry the tag of `kind`.
pub fn deserialize_message(kind: MessageKind, bytes: &[u8]) -> Result<Message, WireError> {
    let mut reader = FieldReader::new(bytes, kind as u8)?;
    let message = match kind {
        MessageKind::LoginRequest => {
            let b2 = reader.biguint()?;
            let m = reader.digest()?;
            let c = reader.bytes()?.to_vec();
            if c.len() != DIGEST_WIDTH {
                return Err(malformed("C has wrong width"));
            }
            Message::LoginRequest(LoginRequest { b2, m, c })
        }
        MessageKind::ServerReply => Message::ServerReply(ServerReply {
            h_c1: reader.digest()?,
            r: reader.biguint()?,
            t_s: reader.u64()?,
        }),
        MessageKind::AuthMessage => {
            Message::AuthMessage(AuthMessage { m1: reader.biguint()?, t: reader.u64()? })
        }
        MessageKind::RegistrationRequest => {
            let id =
                Identity::from_padded(reader.bytes()?).map_err(|_| malformed("bad identity"))?;
            let credential = reader.digest()?;
            Message::RegistrationRequest(RegistrationRequest { id, credential })
        }
    };
    reader.finish()?;
    Ok(message)
}

fn biguint_bytes(v: &BigUint) -> Vec<u8> {
    if v == &BigUint::default() {
        Vec::new()
    } else {
        v.to_bytes_be()
    }
}

/// Builds a tagged sequence of length-prefixed fields.
pub struct FieldWriter {
    out: Vec<u8>,
}

impl FieldWriter {
    pub fn new(tag: u8) -> Self {
        FieldWriter { out: vec![tag] }
    }

    /// Starts with a multi-byte header instead of a one-byte tag.
    pub fn with_header(header: &[u8]) -> Self {
        FieldWriter { out: header.to_vec() }
    }

    pub fn bytes(&mut self, value: &[u8]) -> &mut Self {
        let len = u32::try_from(value.len()).expect("field longer than 4 GiB");
        self.out.extend_from_slice(&len.to_be_bytes());
        self.out.extend_from_slice(value);
        self
    }

    pub fn biguint(&mut self, value: &BigUint) -> &mut Self {
        self.bytes(&biguint_bytes(value))
    }

    pub fn u64(&mut self, value: u64) -> &mut Self {
        self.bytes(&value.to_be_bytes())
    }

    pub fn finish(self) -> Vec<u8> {
        self.out
    }
}

/// Reads fields written by [`FieldWriter`].
pub struct FieldReader<'a> {
    rest: &'a [u8],
}

impl<'a> FieldReader<'a> {
    pub fn new(data: &'a [u8], tag: u8) -> Result<Self, WireError> {
        match data.split_first() {
            Some((&t, rest)) if t == tag => Ok(FieldReader { rest }),
            Some(_) => Err(malformed("unexpected kind tag")),
            None => Err(malformed("empty buffer")),
        }
    }

    pub fn with_header(data: &'a [u8], header: &[u8]) -> Result<Self, WireError> {
        data.strip_prefix(header).map(|rest| FieldReader { rest }).ok_or(malformed("bad header"))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], WireError> {
        if self.rest.len() < 4 {
            return Err(malformed("truncated length prefix"));
        }
        let (len, rest) = self.rest.split_at(4);
        let len = u32::from_be_bytes(len.try_into().expect("4 bytes")) as usize;
        if rest.len() < len {
            return Err(malformed("truncated field"));
        }
        let (value, rest) = rest.split_at(len);
        self.rest = rest;
        Ok(value)
    }

    pub fn biguint(&mut self) -> Result<BigUint, WireError> {
        let raw = self.bytes()?;
        if raw.first() == Some(&0) {
            return Err(malformed("non-canonical integer"));
        }
        Ok(BigUint::from_bytes_be(raw))
    }

    pub fn u64(&mut self) -> Result<u64, WireError> {
        let raw: [u8; 8] = self.bytes()?.try_into().map_err(|_| malformed("timestamp width"))?;
        Ok(u64::from_be_bytes(raw))
    }

    pub fn usize(&mut self) -> Result<usize, WireError> {
        usize::try_from(self.biguint()?).map_err(|_| malformed("count too large"))
    }

    pub fn digest(&mut self) -> Result<Digest, WireError> {
        Digest::from_bytes(self.bytes()?).map_err(|_| malformed("digest width"))
    }

    pub fn finish(self) -> Result<(), WireError> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(malformed("trailing bytes"))
        }
    }
}
