use ksauth_core::crypto::{
    generate_params, mod_exp, mod_inv, params_from_parts, xor_fixed, DEFAULT_ID_WIDTH,
};
use ksauth_core::harness::{register_user, Clock, UserFixture};
use ksauth_core::scheme;
use ksauth_core::{
    AuthServer, CardError, Identity, ReplayMode, ReplayPolicy, ServerError, ServerSecret,
    DIGEST_WIDTH,
};
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const DELTA_T: u64 = 60;

fn server_with_bits(bits: u32, seed: u64, mode: ReplayMode) -> (AuthServer, ChaCha20Rng) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (public, secret) = generate_params(bits, &mut rng).unwrap();
    let server = AuthServer::initialize(public, secret, mode, &mut rng).unwrap();
    (server, rng)
}

fn fixture_server() -> AuthServer {
    let secret =
        ServerSecret::from_primes(BigUint::from(11u32), BigUint::from(13u32), BigUint::from(7u32))
            .unwrap();
    let public = params_from_parts(&secret, BigUint::from(2u32), DEFAULT_ID_WIDTH).unwrap();
    let id_s = Identity::new(b"server-S", DEFAULT_ID_WIDTH).unwrap();
    AuthServer::new(public, secret, id_s, ReplayPolicy::new(ReplayMode::None)).unwrap()
}

fn enroll(
    server: &mut AuthServer,
    name: &[u8],
    clock: &mut Clock,
    rng: &mut ChaCha20Rng,
) -> UserFixture {
    let id = Identity::new(name, server.public().id_width).unwrap();
    register_user(server, id, b"hunter2", clock, rng).unwrap()
}

/// Runs every step directly and checks the cross-role identities on the way.
fn full_loop(
    server: &mut AuthServer,
    user: &UserFixture,
    clock: &mut Clock,
    rng: &mut ChaCha20Rng,
) {
    let id_s = server.server_identity().clone();
    let (request, card_session) =
        user.card.login_begin(&user.id, &user.password, clock.tick(), rng).unwrap();
    let (reply, server_session) = server.handle_login_request(&request, clock.tick(), rng).unwrap();

    assert_eq!(server_session.b3_prime, card_session.b3);
    assert_eq!(server_session.id, user.id);
    assert_eq!(server_session.c_star, card_session.c_in_prime);

    let (z, c2) = card_session.process_server_reply(&reply, &id_s, clock.tick(), DELTA_T).unwrap();
    assert_eq!(c2, server_session.c1);

    let server_key =
        server.handle_auth_message(&server_session, &z, clock.tick(), DELTA_T).unwrap();
    let user_key = card_session.derive_session_key(&id_s, &c2).unwrap();
    assert_eq!(server_key, user_key);
}

#[test]
fn fixture_modulus_143_full_loop() {
    let mut server = fixture_server();
    let mut clock = Clock::default();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let user = enroll(&mut server, b"alice", &mut clock, &mut rng);
    for _ in 0..50 {
        full_loop(&mut server, &user, &mut clock, &mut rng);
    }
}

#[test]
fn full_loop_at_small_prime_sizes() {
    for seed in 0..40u64 {
        for bits in [8u32, 16, 64] {
            let (mut server, mut rng) = server_with_bits(bits, seed, ReplayMode::None);
            let mut clock = Clock::default();
            let user = enroll(&mut server, b"alice", &mut clock, &mut rng);
            full_loop(&mut server, &user, &mut clock, &mut rng);
        }
    }
}

#[test]
fn issued_credential_unblinds_to_server_value() {
    for seed in 0..30u64 {
        let (mut server, mut rng) = server_with_bits(16, seed, ReplayMode::None);
        let mut clock = Clock::default();
        let user = enroll(&mut server, b"bob", &mut clock, &mut rng);
        let public = server.public().clone();
        let record = server.db().find(&server.lookup_token(&user.id).unwrap()).unwrap().clone();
        let (_, registered_at) = server.open_record(&record).unwrap();

        let credential = scheme::password_credential(&user.card.b, &user.password).unwrap();
        let y_inv = mod_inv(&public.y, &public.n).unwrap();
        let unblinded =
            &user.card.c_in * mod_exp(&y_inv, &credential.to_exponent(), &public.n) % &public.n;
        let exponent = scheme::credential_exponent(
            &server.secret().d,
            registered_at,
            &user.id,
            public.common_width(),
        )
        .unwrap();
        assert_eq!(unblinded, mod_exp(&public.y, &exponent, &public.n));
    }
}

#[test]
fn derived_identity_matches_registration() {
    let (mut server, mut rng) = server_with_bits(16, 3, ReplayMode::None);
    let mut clock = Clock::default();
    let user = enroll(&mut server, b"carol", &mut clock, &mut rng);
    for _ in 0..1000 {
        let (request, session) =
            user.card.login_begin(&user.id, &user.password, clock.tick(), &mut rng).unwrap();
        assert_ne!(request.c, user.id.widened(DIGEST_WIDTH).unwrap());
        let (_, server_session) =
            server.handle_login_request(&request, clock.tick(), &mut rng).unwrap();
        assert_eq!(server_session.id, user.id);

        let mask = scheme::identity_mask(&session.b2, &session.b3, server.public().common_width())
            .unwrap();
        let padded = xor_fixed(&request.c, mask.as_bytes()).unwrap();
        assert_eq!(padded, user.id.widened(DIGEST_WIDTH).unwrap());
    }
}

#[test]
fn wrong_password_and_identity_rejected_by_card() {
    let (mut server, mut rng) = server_with_bits(32, 5, ReplayMode::None);
    let mut clock = Clock::default();
    let user = enroll(&mut server, b"dave", &mut clock, &mut rng);
    assert_eq!(
        user.card.login_begin(&user.id, b"hunter3", 0, &mut rng).unwrap_err(),
        CardError::WrongCredentials
    );
    let other = Identity::new(b"mallory", user.id.width()).unwrap();
    assert_eq!(
        user.card.login_begin(&other, &user.password, 0, &mut rng).unwrap_err(),
        CardError::WrongCredentials
    );
}

#[test]
fn logins_draw_fresh_blinding() {
    let (mut server, _) = server_with_bits(32, 6, ReplayMode::None);
    let mut clock = Clock::default();
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let user = enroll(&mut server, b"erin", &mut clock, &mut rng);
    let mut seen = std::collections::HashSet::new();
    for seed in 0..100u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (request, _) = user.card.login_begin(&user.id, &user.password, 0, &mut rng).unwrap();
        assert!(seen.insert(request.b2));
    }
}

#[test]
fn duplicate_registration_rejected() {
    let (mut server, mut rng) = server_with_bits(16, 7, ReplayMode::None);
    let mut clock = Clock::default();
    enroll(&mut server, b"frank", &mut clock, &mut rng);
    let id = Identity::new(b"frank", server.public().id_width).unwrap();
    let (request, _) = ksauth_core::create_registration_request(&id, b"other", &mut rng).unwrap();
    assert!(matches!(
        server.handle_registration(&request, clock.tick()),
        Err(ServerError::DuplicateIdentity)
    ));
    assert_eq!(server.db().len(), 1);
}

#[test]
fn wrong_server_identity_fails_reply_check() {
    let (mut server, mut rng) = server_with_bits(64, 8, ReplayMode::None);
    let mut clock = Clock::default();
    let user = enroll(&mut server, b"grace", &mut clock, &mut rng);
    for _ in 0..50 {
        let (request, session) =
            user.card.login_begin(&user.id, &user.password, clock.tick(), &mut rng).unwrap();
        let (reply, _) = server.handle_login_request(&request, clock.tick(), &mut rng).unwrap();
        let guess = Identity::random(&mut rng, user.id.width());
        assert_eq!(
            session.process_server_reply(&reply, &guess, clock.tick(), DELTA_T).unwrap_err(),
            CardError::ServerVerificationFailed
        );
    }
}

#[test]
fn freshness_windows_enforced() {
    let (mut server, mut rng) = server_with_bits(32, 9, ReplayMode::None);
    let mut clock = Clock::default();
    let user = enroll(&mut server, b"heidi", &mut clock, &mut rng);
    let id_s = server.server_identity().clone();

    let (request, session) =
        user.card.login_begin(&user.id, &user.password, clock.tick(), &mut rng).unwrap();
    let (reply, server_session) =
        server.handle_login_request(&request, clock.tick(), &mut rng).unwrap();
    assert_eq!(
        session.process_server_reply(&reply, &id_s, reply.t_s + DELTA_T + 1, DELTA_T).unwrap_err(),
        CardError::StaleReply
    );
    let (z, _) = session.process_server_reply(&reply, &id_s, reply.t_s + DELTA_T, DELTA_T).unwrap();
    assert!(matches!(
        server.handle_auth_message(&server_session, &z, z.t + DELTA_T + 1, DELTA_T),
        Err(ServerError::StaleAuthMessage)
    ));
    let mut forged = z.clone();
    forged.m1 += 1u32;
    assert!(matches!(
        server.handle_auth_message(&server_session, &forged, z.t + 1, DELTA_T),
        Err(ServerError::AuthFailed)
    ));
    assert!(server.handle_auth_message(&server_session, &z, z.t + DELTA_T, DELTA_T).is_ok());
}

#[test]
fn tampered_login_requests_rejected() {
    let (mut server, mut rng) = server_with_bits(32, 10, ReplayMode::None);
    let mut clock = Clock::default();
    let user = enroll(&mut server, b"ivan", &mut clock, &mut rng);
    let (request, _) =
        user.card.login_begin(&user.id, &user.password, clock.tick(), &mut rng).unwrap();

    let mut bad_m = request.clone();
    bad_m.m = ksauth_core::crypto::hash_digest(b"forged");
    assert!(matches!(
        server.handle_login_request(&bad_m, clock.tick(), &mut rng),
        Err(ServerError::BadAuthenticator)
    ));

    let mut bad_c = request.clone();
    bad_c.c[DIGEST_WIDTH - 1] ^= 0x55;
    assert!(matches!(
        server.handle_login_request(&bad_c, clock.tick(), &mut rng),
        Err(ServerError::UnknownUser) | Err(ServerError::BadAuthenticator)
    ));

    let mut bad_b2 = request.clone();
    bad_b2.b2 = server.public().n.clone();
    assert!(matches!(
        server.handle_login_request(&bad_b2, clock.tick(), &mut rng),
        Err(ServerError::MalformedRequest(_))
    ));
}

#[test]
fn replayed_request_accepted_without_cache() {
    let (mut server, mut rng) = server_with_bits(32, 12, ReplayMode::None);
    let mut clock = Clock::default();
    let user = enroll(&mut server, b"judy", &mut clock, &mut rng);
    let (request, _) =
        user.card.login_begin(&user.id, &user.password, clock.tick(), &mut rng).unwrap();
    let (_, first) = server.handle_login_request(&request, clock.tick(), &mut rng).unwrap();
    for later in [10u64, 1_000, 10_000_000] {
        let (reply, session) =
            server.handle_login_request(&request, clock.advance(later), &mut rng).unwrap();
        assert_eq!(session.id, first.id);
        assert_eq!(session.c_star, first.c_star);
        assert_eq!(reply.t_s, clock.now());
    }
}

#[test]
fn full_history_rejects_repeats_and_grows_linearly() {
    let (mut server, mut rng) = server_with_bits(32, 13, ReplayMode::FullHistory);
    let mut clock = Clock::default();
    let user = enroll(&mut server, b"ken", &mut clock, &mut rng);
    let token = server.lookup_token(&user.id).unwrap();
    let mut requests = Vec::new();
    for k in 1..=25 {
        let (request, _) =
            user.card.login_begin(&user.id, &user.password, clock.tick(), &mut rng).unwrap();
        server.handle_login_request(&request, clock.tick(), &mut rng).unwrap();
        assert_eq!(server.policy().history_size(&token), k);
        requests.push(request);
    }
    for request in &requests {
        assert!(matches!(
            server.handle_login_request(request, clock.tick(), &mut rng),
            Err(ServerError::ReplayDetected)
        ));
    }
    assert_eq!(server.policy().history_size(&token), 25);
}

#[test]
fn session_keys_separate_neighbouring_values() {
    let id = Identity::new(b"lee", 16).unwrap();
    let id_s = Identity::new(b"srv", 16).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    for _ in 0..1000 {
        let c2: BigUint = num_bigint::RandBigInt::gen_biguint(&mut rng, 200);
        let a = scheme::session_key(&id, &id_s, &c2, 32).unwrap();
        let b = scheme::session_key(&id, &id_s, &(&c2 + 1u32), 32).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, scheme::session_key(&id, &id_s, &c2, 32).unwrap());
    }
}

#[test]
fn persisted_database_keeps_users_loggable() {
    let (mut server, mut rng) = server_with_bits(32, 15, ReplayMode::None);
    let mut clock = Clock::default();
    let user = enroll(&mut server, b"mia", &mut clock, &mut rng);
    enroll(&mut server, b"nick", &mut clock, &mut rng);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("users.ksdb");
    std::fs::write(&path, server.db().to_bytes()).unwrap();
    let reloaded = ksauth_core::server::UserDb::from_bytes(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(&reloaded, server.db());

    let mut restored = AuthServer::new(
        server.public().clone(),
        server.secret().clone(),
        server.server_identity().clone(),
        ReplayPolicy::new(ReplayMode::None),
    )
    .unwrap();
    restored.replace_db(reloaded);
    full_loop(&mut restored, &user, &mut clock, &mut rng);
}
