use std::path::Path;
use std::process::Command;

use ksauth_cli::files::{self, PUBLIC_FILE, SECRET_FILE};
use ksauth_cli::scenario::{REPORT_FILE, TRANSCRIPT_FILE};
use ksauth_cli::transcript::TranscriptLine;
use ksauth_cli::{cmd_keygen, cmd_register, run_scenario, Scenario, ScenarioConfig};
use ksauth_core::crypto::check_pair;
use ksauth_core::wire::Message;
use ksauth_core::ReplayMode;
use rand::SeedableRng;

fn ksauth(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ksauth"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn small(seed: u64) -> ScenarioConfig {
    ScenarioConfig { prime_bits: 64, trials: 10, seed, ..Default::default() }
}

#[test]
fn keygen_is_deterministic_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let a = ScenarioConfig { output_path: dir.path().join("a"), ..small(3) };
    let b = ScenarioConfig { output_path: dir.path().join("b"), ..small(3) };
    cmd_keygen(&a).unwrap();
    cmd_keygen(&b).unwrap();
    for name in [PUBLIC_FILE, SECRET_FILE] {
        assert_eq!(
            std::fs::read(a.output_path.join(name)).unwrap(),
            std::fs::read(b.output_path.join(name)).unwrap()
        );
    }
    let (public, secret, id_s) = ksauth_cli::load_params_dir(&a.output_path, 0).unwrap();
    secret.validate(&mut rand_chacha::ChaCha20Rng::seed_from_u64(0)).unwrap();
    check_pair(&public, &secret).unwrap();
    assert_eq!(id_s.width(), public.id_width);
}

#[test]
fn keygen_rejects_tiny_primes() {
    let dir = tempfile::tempdir().unwrap();
    let config = ScenarioConfig { prime_bits: 4, output_path: dir.path().into(), ..small(0) };
    assert!(matches!(cmd_keygen(&config), Err(ksauth_cli::CliError::ConfigInvalid(_))));
    let out = ksauth(&["keygen", "--prime-bits", "4"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn registered_card_logs_in_against_saved_database() {
    let dir = tempfile::tempdir().unwrap();
    let config = ScenarioConfig { output_path: dir.path().into(), ..small(4) };
    cmd_keygen(&config).unwrap();
    let card_path = cmd_register(&config, "olivia", "pw").unwrap();
    assert!(matches!(
        cmd_register(&config, "olivia", "pw2"),
        Err(ksauth_cli::CliError::Harness(ksauth_core::harness::HarnessError::Server(
            ksauth_core::ServerError::DuplicateIdentity
        )))
    ));

    let card = files::decode_card(&std::fs::read(card_path).unwrap()).unwrap();
    let (public, secret, id_s) = ksauth_cli::load_params_dir(dir.path(), 0).unwrap();
    let db = ksauth_core::server::UserDb::from_bytes(
        &std::fs::read(dir.path().join(files::DB_FILE)).unwrap(),
    )
    .unwrap();
    let mut server = ksauth_core::AuthServer::new(
        public.clone(),
        secret,
        id_s.clone(),
        ksauth_core::ReplayPolicy::new(ReplayMode::None),
    )
    .unwrap();
    server.replace_db(db);

    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
    let id = ksauth_core::Identity::new(b"olivia", public.id_width).unwrap();
    let (request, session) = card.login_begin(&id, b"pw", 100, &mut rng).unwrap();
    let (reply, server_session) = server.handle_login_request(&request, 101, &mut rng).unwrap();
    let (z, c2) = session.process_server_reply(&reply, &id_s, 102, 60).unwrap();
    let key = server.handle_auth_message(&server_session, &z, 103, 60).unwrap();
    assert_eq!(key, session.derive_session_key(&id_s, &c2).unwrap());
}

#[test]
fn exit_status_follows_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&[&str], i32)] = &[
        (&["run", "--scenario", "honest"], 0),
        (&["run", "--scenario", "honest", "--id-s-known", "false"], 1),
        (&["run", "--scenario", "faulty-login"], 0),
        (&["run", "--scenario", "faulty-login", "--id-s-known", "true"], 1),
        (&["run", "--scenario", "replay"], 0),
        (&["run", "--scenario", "replay", "--policy", "full_history"], 0),
        (&["run", "--scenario", "cache-bench"], 0),
        (&["run", "--scenario", "nope"], 2),
    ];
    for (i, (args, code)) in cases.iter().enumerate() {
        let mut full = args.to_vec();
        full.extend(["--prime-bits", "64", "--trials", "5"]);
        let out = ksauth(&full, &dir.path().join(i.to_string()));
        assert_eq!(
            out.status.code(),
            Some(*code),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "prime_bits = 64\ntrials = 3\nreplay_policy = \"full_history\"\n")
        .unwrap();
    let out = ksauth(
        &["run", "--scenario", "replay", "--config", cfg.to_str().unwrap(), "--trials", "4"],
        &dir.path().join("out"),
    );
    assert_eq!(out.status.code(), Some(0));
    let report = std::fs::read_to_string(dir.path().join("out").join(REPORT_FILE)).unwrap();
    assert_eq!(report.lines().count(), 4);
    for line in report.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["outcome"], "rejected_at_replay_cache");
        assert_eq!(v["history_size"], 5);
        for key in ["scenario", "trial", "outcome", "history_size", "wall_time_ns"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn transcripts_decode_to_wire_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = ScenarioConfig { output_path: dir.path().into(), ..small(5) };
    let run = ksauth_cli::cmd_run("replay", &config, None).unwrap();
    assert!(run.passed);
    let text = std::fs::read_to_string(dir.path().join(TRANSCRIPT_FILE)).unwrap();
    let lines: Vec<TranscriptLine> =
        text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines, run.transcript);
    assert!(lines.iter().any(|l| l.actor == "adversary"));
    for line in &lines {
        let wire = line.wire_bytes().unwrap();
        let message = Message::decode(&wire).unwrap();
        assert_eq!(message.kind().name(), line.event);
        for (name, value) in message.fields() {
            assert_eq!(line.fields[name], hex::encode(value));
        }
    }
}

#[test]
fn scenario_runs_are_reproducible() {
    for scenario in [Scenario::Honest, Scenario::FaultyLogin, Scenario::Replay] {
        let a = run_scenario(scenario, &small(9), None).unwrap();
        let b = run_scenario(scenario, &small(9), None).unwrap();
        assert_eq!(a.transcript, b.transcript);
        let strip = |r: &ksauth_cli::ScenarioRun| {
            r.report
                .outcomes
                .iter()
                .map(|t| (t.trial, t.outcome, t.history_size, t.keys_match))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        let c = run_scenario(scenario, &small(10), None).unwrap();
        assert_ne!(a.transcript, c.transcript);
    }
}
