use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ksauth_core::harness::{
    measure_replay_cache_cost, run_honest_session, run_replay_attack, timed, AttackReport,
    ChannelTape, Clock, CostTable, Outcome, World,
};
use ksauth_core::{AuthServer, Identity, PublicParams, ReplayMode, ReplayPolicy, ServerSecret};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::config::ScenarioConfig;
use crate::transcript::{self, TranscriptLine};
use crate::CliError;

pub const REPORT_FILE: &str = "report.jsonl";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const COST_FILE: &str = "cache_cost.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Honest,
    FaultyLogin,
    Replay,
    CacheBench,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Honest => "honest",
            Scenario::FaultyLogin => "faulty-login",
            Scenario::Replay => "replay",
            Scenario::CacheBench => "cache-bench",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "honest" => Ok(Scenario::Honest),
            "faulty-login" => Ok(Scenario::FaultyLogin),
            "replay" => Ok(Scenario::Replay),
            "cache-bench" => Ok(Scenario::CacheBench),
            other => Err(CliError::UnknownScenario(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub report: AttackReport,
    pub transcript: Vec<TranscriptLine>,
    pub cost: Option<CostTable>,
    /// Every trial matched the scenario's expected outcome.
    pub passed: bool,
}

/// Server parameters loaded from files instead of generated from the seed.
pub type LoadedParams = (PublicParams, ServerSecret, Identity);

/// Runs `scenario` for `config.trials` trials.
///
/// Expected outcomes: `honest` completes with equal session keys,
/// `faulty-login` fails at the card's reply check, `replay` reaches the
/// server reply (policy `none`) or hits the replay cache (`full_history`),
/// and `cache-bench` keeps exactly one history entry per login.
pub fn run_scenario(
    scenario: Scenario,
    config: &ScenarioConfig,
    params: Option<LoadedParams>,
) -> Result<ScenarioRun, CliError> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut clock = Clock::default();
    let mut world = match params {
        Some((public, secret, id_s)) => {
            let server =
                AuthServer::new(public, secret, id_s, ReplayPolicy::new(config.replay_policy))?;
            World::with_server(server, config.delta_t, &mut clock, &mut rng)?
        }
        None => World::setup(&config.world_config(), &mut clock, &mut rng)?,
    };

    let mut report = AttackReport::new(scenario.name());
    let mut transcript = Vec::new();
    let mut cost = None;

    match scenario {
        Scenario::Honest | Scenario::FaultyLogin => {
            let id_s_known = config.id_s_known.unwrap_or(scenario == Scenario::Honest);
            for trial in 0..config.trials {
                clock.advance(world.session_gap);
                let mut tape = ChannelTape::new();
                let (session, wall) = timed(|| {
                    run_honest_session(&mut world, id_s_known, &mut clock, &mut rng, &mut tape)
                });
                let session = session?;
                report.push(session.outcome, None, wall, session.keys_match);
                transcript.extend(transcript::from_tape(trial, &tape)?);
            }
        }
        Scenario::Replay => {
            for trial in 0..config.trials {
                let (result, wall) = timed(|| {
                    run_replay_attack(
                        &mut world,
                        config.recorded_sessions,
                        config.replay_from,
                        config.replay_policy,
                        &mut clock,
                        &mut rng,
                    )
                });
                let result = result?;
                let history = (config.replay_policy == ReplayMode::FullHistory)
                    .then_some(result.history_size);
                report.push(result.outcome, history, wall, None);
                transcript.extend(transcript::from_tape(trial, &result.tape)?);
            }
        }
        Scenario::CacheBench => {
            let table = measure_replay_cache_cost(&mut world, config.trials, &mut clock, &mut rng)?;
            for row in &table.rows {
                report.push(
                    row.outcome,
                    Some(row.history_size),
                    std::time::Duration::from_nanos(row.check_ns),
                    None,
                );
            }
            cost = Some(table);
        }
    }

    let passed = match scenario {
        Scenario::Honest => report
            .outcomes
            .iter()
            .all(|r| r.outcome == Outcome::FullyAuthenticated && r.keys_match == Some(true)),
        Scenario::FaultyLogin => report.all(Outcome::RejectedAtServerVerification),
        Scenario::Replay => match config.replay_policy {
            ReplayMode::None => report.all(Outcome::ReplyEmitted),
            ReplayMode::FullHistory => report.all(Outcome::RejectedAtReplayCache),
        },
        Scenario::CacheBench => report.outcomes.iter().all(|r| {
            r.outcome == Outcome::FullyAuthenticated && r.history_size == Some(r.trial + 1)
        }),
    };

    Ok(ScenarioRun { scenario, report, transcript, cost, passed })
}

/// Writes the report, the transcript and, for `cache-bench`, the cost table
/// into `dir`.
pub fn write_outputs(run: &ScenarioRun, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::FileWrite(dir.to_path_buf(), e))?;
    let write = |name: &str, contents: String| {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::FileWrite(path, e))
    };
    write(REPORT_FILE, transcript::to_json_lines(&run.report.outcomes))?;
    write(TRANSCRIPT_FILE, transcript::to_json_lines(&run.transcript))?;
    if let Some(cost) = &run.cost {
        write(COST_FILE, cost.to_csv())?;
    }
    Ok(())
}
