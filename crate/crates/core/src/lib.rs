//! A smart-card remote user authentication scheme with password-blinded
//! credentials, run as card and server state machines over a simulated
//! channel, together with a harness that reproduces two weaknesses of the
//! scheme:
//!
//! * the card cannot verify the server reply without the private server
//!   identity, which no message carries;
//! * login requests carry no freshness, so a recorded request is accepted
//!   again unless the server keeps every past request.

pub mod card;
pub mod crypto;
pub mod harness;
pub mod identity;
pub mod messages;
pub mod scheme;
pub mod server;
pub mod wire;

pub use card::{create_registration_request, CardError, CardSession, SmartCard};
pub use crypto::{generate_params, CryptoError, Digest, PublicParams, ServerSecret, DIGEST_WIDTH};
pub use identity::{Identity, IdentityError};
pub use messages::{AuthMessage, IssuedCard, LoginRequest, RegistrationRequest, ServerReply};
pub use server::{AuthServer, ReplayMode, ReplayPolicy, ServerError, ServerSession};
