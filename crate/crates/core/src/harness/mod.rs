//! Simulated channel with a recording adversary.
//!
//! All timestamps come from a logical [`Clock`]; wall-clock time is only
//! used for cost measurement. Every message crosses the channel in its wire
//! encoding and is recorded on a [`ChannelTape`].

mod report;
mod tape;

use std::time::{Duration, Instant};

use rand::Rng;
use thiserror::Error;

pub use report::{AttackReport, Outcome, TrialRecord};
pub use tape::{Actor, ChannelTape, Direction, TapeEntry};

use crate::card::{create_registration_request, CardError, SmartCard};
use crate::crypto::{generate_params, CryptoError};
use crate::identity::{Identity, IdentityError};
use crate::messages::{AuthMessage, LoginRequest, ServerReply};
use crate::server::{AuthServer, ReplayMode, ReplayPolicy, ServerError};
use crate::wire::{Message, MessageKind, WireError};

/// Logical time the simulation starts at.
pub const START_TIME: u64 = 1_700_000_000;
pub const DEFAULT_DELTA_T: u64 = 60;
/// Logical seconds between consecutive sessions; larger than the default
/// freshness window so sessions fall in distinct epochs.
pub const DEFAULT_SESSION_GAP: u64 = 300;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("tape index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("tape time {got} is not after {last}")]
    NonMonotonicTime { last: u64, got: u64 },
    #[error("trial count must be at least 1")]
    InvalidTrialCount,
    #[error("replay index {k} must be in 1..={m}")]
    InvalidReplayIndex { k: usize, m: usize },
    #[error("fixture setup failed: {0}")]
    Setup(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Server(#[from] ServerError),
    #[error(transparent)]
    Card(#[from] CardError),
}

/// Monotone logical clock in seconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clock {
    now: u64,
    step: u64,
}

impl Clock {
    pub fn new(start: u64, step: u64) -> Self {
        Clock { now: start, step: step.max(1) }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Advances by one step and returns the new time.
    pub fn tick(&mut self) -> u64 {
        self.now += self.step;
        self.now
    }

    pub fn advance(&mut self, secs: u64) -> u64 {
        self.now += secs;
        self.now
    }
}

impl Default for Clock {
    fn default() -> Self {
        Clock::new(START_TIME, 1)
    }
}

/// A registered user and their card.
#[derive(Debug, Clone)]
pub struct UserFixture {
    pub id: Identity,
    pub password: Vec<u8>,
    pub card: SmartCard,
}

/// Server plus one registered user.
#[derive(Debug, Clone)]
pub struct World {
    pub server: AuthServer,
    pub user: UserFixture,
    pub delta_t: u64,
    pub session_gap: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldConfig {
    pub prime_bits: u32,
    pub id_width: usize,
    pub delta_t: u64,
    pub policy: ReplayMode,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            prime_bits: 256,
            id_width: crate::crypto::DEFAULT_ID_WIDTH,
            delta_t: DEFAULT_DELTA_T,
            policy: ReplayMode::None,
        }
    }
}

pub const DEFAULT_USER: &[u8] = b"alice";
pub const DEFAULT_PASSWORD: &[u8] = b"correct horse battery staple";

impl World {
    /// Generates parameters and registers the default user.
    pub fn setup<R: Rng + ?Sized>(
        config: &WorldConfig,
        clock: &mut Clock,
        rng: &mut R,
    ) -> Result<Self, HarnessError> {
        let (public, secret) = generate_params(config.prime_bits, rng)?;
        let public = public.with_id_width(config.id_width)?;
        let server = AuthServer::initialize(public, secret, config.policy, rng)?;
        Self::with_server(server, config.delta_t, clock, rng)
    }

    /// Registers the default user with an existing server.
    pub fn with_server<R: Rng + ?Sized>(
        mut server: AuthServer,
        delta_t: u64,
        clock: &mut Clock,
        rng: &mut R,
    ) -> Result<Self, HarnessError> {
        let width = server.public().id_width;
        let raw = &DEFAULT_USER[..DEFAULT_USER.len().min(width)];
        let id = Identity::new(raw, width)?;
        let user = register_user(&mut server, id, DEFAULT_PASSWORD, clock, rng)?;
        Ok(World { server, user, delta_t, session_gap: DEFAULT_SESSION_GAP })
    }

    pub fn id_width(&self) -> usize {
        self.server.public().id_width
    }
}

/// Full registration round: request, issuance, personalization.
pub fn register_user<R: Rng + ?Sized>(
    server: &mut AuthServer,
    id: Identity,
    password: &[u8],
    clock: &mut Clock,
    rng: &mut R,
) -> Result<UserFixture, HarnessError> {
    let (request, b) = create_registration_request(&id, password, rng)?;
    let issued = server.handle_registration(&request, clock.tick())?;
    let card = SmartCard::personalize(issued, b)?;
    Ok(UserFixture { id, password: password.to_vec(), card })
}

/// Result of one driven session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionOutcome {
    pub outcome: Outcome,
    /// Set when both sides derived a key.
    pub keys_match: Option<bool>,
    pub login_index: Option<usize>,
    pub auth_index: Option<usize>,
}

impl SessionOutcome {
    fn stopped(outcome: Outcome, login_index: Option<usize>) -> Self {
        SessionOutcome { outcome, keys_match: None, login_index, auth_index: None }
    }
}

fn login_rejection(err: &ServerError) -> Outcome {
    match err {
        ServerError::ReplayDetected => Outcome::RejectedAtReplayCache,
        ServerError::BadAuthenticator => Outcome::RejectedAtMCheck,
        _ => Outcome::RejectedAtLookup,
    }
}

fn card_rejection(err: &CardError) -> Outcome {
    match err {
        CardError::StaleReply => Outcome::RejectedAtReplyFreshness,
        CardError::ServerVerificationFailed => Outcome::RejectedAtServerVerification,
        _ => Outcome::RejectedAtCredentials,
    }
}

fn auth_rejection(err: &ServerError) -> Outcome {
    match err {
        ServerError::StaleAuthMessage => Outcome::RejectedAtAuthFreshness,
        _ => Outcome::RejectedAtAuthCheck,
    }
}

fn send(
    tape: &mut ChannelTape,
    clock: &mut Clock,
    direction: Direction,
    actor: Actor,
    message: &Message,
) -> Result<(usize, u64), HarnessError> {
    let time = clock.tick();
    let index = tape.record(direction, actor, message.kind(), message.encode(), time)?;
    Ok((index, time))
}

fn receive_login(tape: &ChannelTape, index: usize) -> Result<LoginRequest, HarnessError> {
    match crate::wire::deserialize_message(MessageKind::LoginRequest, tape.replay(index)?)? {
        Message::LoginRequest(m) => Ok(m),
        _ => unreachable!("decoded kind matches requested kind"),
    }
}

fn receive_reply(tape: &ChannelTape, index: usize) -> Result<ServerReply, HarnessError> {
    match crate::wire::deserialize_message(MessageKind::ServerReply, tape.replay(index)?)? {
        Message::ServerReply(m) => Ok(m),
        _ => unreachable!("decoded kind matches requested kind"),
    }
}

fn receive_auth(tape: &ChannelTape, index: usize) -> Result<AuthMessage, HarnessError> {
    match crate::wire::deserialize_message(MessageKind::AuthMessage, tape.replay(index)?)? {
        Message::AuthMessage(m) => Ok(m),
        _ => unreachable!("decoded kind matches requested kind"),
    }
}

/// Drives one complete login with the card believing the server identity is
/// `card_view_of_id_s`.
pub fn run_session<R: Rng + ?Sized>(
    world: &mut World,
    card_view_of_id_s: &Identity,
    clock: &mut Clock,
    rng: &mut R,
    tape: &mut ChannelTape,
) -> Result<SessionOutcome, HarnessError> {
    let user = &world.user;
    let (request, card_session) =
        match user.card.login_begin(&user.id, &user.password, clock.now(), rng) {
            Ok(v) => v,
            Err(e) => return Ok(SessionOutcome::stopped(card_rejection(&e), None)),
        };
    let (login_index, _) =
        send(tape, clock, Direction::UserToServer, Actor::Card, &Message::LoginRequest(request))?;

    let received = receive_login(tape, login_index)?;
    let (reply, server_session) =
        match world.server.handle_login_request(&received, clock.now(), rng) {
            Ok(v) => v,
            Err(e) => return Ok(SessionOutcome::stopped(login_rejection(&e), Some(login_index))),
        };
    let (reply_index, _) =
        send(tape, clock, Direction::ServerToUser, Actor::Server, &Message::ServerReply(reply))?;

    let reply = receive_reply(tape, reply_index)?;
    let (z, c2) = match card_session.process_server_reply(
        &reply,
        card_view_of_id_s,
        clock.now(),
        world.delta_t,
    ) {
        Ok(v) => v,
        Err(e) => return Ok(SessionOutcome::stopped(card_rejection(&e), Some(login_index))),
    };
    let (auth_index, _) =
        send(tape, clock, Direction::UserToServer, Actor::Card, &Message::AuthMessage(z))?;

    let z = receive_auth(tape, auth_index)?;
    let server_key =
        match world.server.handle_auth_message(&server_session, &z, clock.tick(), world.delta_t) {
            Ok(key) => key,
            Err(e) => {
                return Ok(SessionOutcome {
                    outcome: auth_rejection(&e),
                    keys_match: None,
                    login_index: Some(login_index),
                    auth_index: Some(auth_index),
                })
            }
        };
    let user_key = card_session.derive_session_key(card_view_of_id_s, &c2)?;
    Ok(SessionOutcome {
        outcome: Outcome::FullyAuthenticated,
        keys_match: Some(user_key == server_key),
        login_index: Some(login_index),
        auth_index: Some(auth_index),
    })
}

/// Honest login where the card either is handed the true server identity
/// out of band (`id_s_known`) or has to guess one uniformly.
pub fn run_honest_session<R: Rng + ?Sized>(
    world: &mut World,
    id_s_known: bool,
    clock: &mut Clock,
    rng: &mut R,
    tape: &mut ChannelTape,
) -> Result<SessionOutcome, HarnessError> {
    let view = if id_s_known {
        world.server.server_identity().clone()
    } else {
        Identity::random(rng, world.id_width())
    };
    run_session(world, &view, clock, rng, tape)
}

/// One replay trial.
#[derive(Debug, Clone)]
pub struct ReplayTrial {
    /// Furthest step the injected request reached.
    pub outcome: Outcome,
    /// Outcomes of the recorded honest sessions `ST_1..ST_m`.
    pub recorded: Vec<Outcome>,
    pub history_size: usize,
    pub tape: ChannelTape,
}

/// Records `m` honest sessions, then at session `m + 1` re-injects the login
/// request of session `k` verbatim and tries to finish the handshake by
/// replaying that session's `Z`, both as recorded and re-stamped with the
/// current time.
///
/// Installs a fresh `mode` policy on the server first.
pub fn run_replay_attack<R: Rng + ?Sized>(
    world: &mut World,
    m: usize,
    k: usize,
    mode: ReplayMode,
    clock: &mut Clock,
    rng: &mut R,
) -> Result<ReplayTrial, HarnessError> {
    if m == 0 {
        return Err(HarnessError::InvalidTrialCount);
    }
    if k == 0 || k > m {
        return Err(HarnessError::InvalidReplayIndex { k, m });
    }
    world.server.install_policy(ReplayPolicy::new(mode));
    let id_s = world.server.server_identity().clone();
    let mut tape = ChannelTape::new();

    let mut recorded = Vec::with_capacity(m);
    let mut trapped = Vec::with_capacity(m);
    for _ in 0..m {
        clock.advance(world.session_gap);
        let session = run_session(world, &id_s, clock, rng, &mut tape)?;
        recorded.push(session.outcome);
        trapped.push((session.login_index, session.auth_index));
    }

    clock.advance(world.session_gap);
    let (login_index, auth_index) = trapped[k - 1];
    let login_index = login_index
        .ok_or(HarnessError::Setup(format!("session {k} produced no login request to trap")))?;
    let bytes = tape.replay(login_index)?.to_vec();
    let injected = tape.record(
        Direction::UserToServer,
        Actor::Adversary,
        MessageKind::LoginRequest,
        bytes,
        clock.tick(),
    )?;
    let request = receive_login(&tape, injected)?;

    let token = world.server.lookup_token(&world.user.id)?;
    let outcome = match world.server.handle_login_request(&request, clock.now(), rng) {
        Err(e) => login_rejection(&e),
        Ok((reply, server_session)) => {
            send(
                &mut tape,
                clock,
                Direction::ServerToUser,
                Actor::Server,
                &Message::ServerReply(reply),
            )?;
            let mut completed = false;
            if let Some(auth_index) = auth_index {
                let old_z = receive_auth(&tape, auth_index)?;
                let restamped = AuthMessage { m1: old_z.m1.clone(), t: clock.now() + 1 };
                for z in [old_z, restamped] {
                    let (_, time) = send(
                        &mut tape,
                        clock,
                        Direction::UserToServer,
                        Actor::Adversary,
                        &Message::AuthMessage(z.clone()),
                    )?;
                    if world
                        .server
                        .handle_auth_message(&server_session, &z, time, world.delta_t)
                        .is_ok()
                    {
                        completed = true;
                    }
                }
            }
            if completed {
                Outcome::FullyAuthenticated
            } else {
                Outcome::ReplyEmitted
            }
        }
    };

    Ok(ReplayTrial {
        outcome,
        recorded,
        history_size: world.server.policy().history_size(&token),
        tape,
    })
}

/// One row of the replay-cache cost table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct CostRow {
    pub login: usize,
    pub history_size: usize,
    pub comparisons: usize,
    pub check_ns: u64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostTable {
    pub rows: Vec<CostRow>,
}

impl CostTable {
    /// Mean check time per bucket, splitting the rows into `buckets`
    /// consecutive runs of near-equal length.
    pub fn bucket_means(&self, buckets: usize) -> Vec<f64> {
        let buckets = buckets.clamp(1, self.rows.len().max(1));
        let len = self.rows.len();
        (0..buckets)
            .map(|b| {
                let rows = &self.rows[b * len / buckets..(b + 1) * len / buckets];
                rows.iter().map(|r| r.check_ns as f64).sum::<f64>() / rows.len().max(1) as f64
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("login,history_size,comparisons,check_ns,outcome\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.login, r.history_size, r.comparisons, r.check_ns, r.outcome
            ));
        }
        out
    }
}

/// Performs `total_logins` honest logins under a fresh full-history policy
/// and records the history size and the cost of the history check for each.
pub fn measure_replay_cache_cost<R: Rng + ?Sized>(
    world: &mut World,
    total_logins: usize,
    clock: &mut Clock,
    rng: &mut R,
) -> Result<CostTable, HarnessError> {
    if total_logins == 0 {
        return Err(HarnessError::InvalidTrialCount);
    }
    world.server.install_policy(ReplayPolicy::new(ReplayMode::FullHistory));
    let id_s = world.server.server_identity().clone();
    let token = world.server.lookup_token(&world.user.id)?;
    let mut table = CostTable::default();
    for login in 1..=total_logins {
        clock.advance(world.session_gap);
        let mut tape = ChannelTape::new();
        let session = run_session(world, &id_s, clock, rng, &mut tape)?;
        let cost = world.server.policy().last_check();
        table.rows.push(CostRow {
            login,
            history_size: world.server.policy().history_size(&token),
            comparisons: cost.comparisons,
            check_ns: cost.elapsed.as_nanos() as u64,
            outcome: session.outcome,
        });
    }
    Ok(table)
}

/// Times `f` and returns its result with the elapsed wall time.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}
