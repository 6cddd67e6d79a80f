use std::fmt;
use std::time::Duration;

use serde::Serialize;

/// How far a login got before it was rejected, in protocol order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Outcome {
    /// Card step 1: entered identity or password did not reproduce `B1`.
    #[serde(rename = "rejected_at_credentials")]
    RejectedAtCredentials,
    #[serde(rename = "rejected_at_replay_cache")]
    RejectedAtReplayCache,
    /// Server step 3: no registered user behind `C`.
    #[serde(rename = "rejected_at_lookup")]
    RejectedAtLookup,
    #[serde(rename = "rejected_at_M_check")]
    RejectedAtMCheck,
    /// Server step 5 reached. For replay trials this is also the outcome when
    /// the adversary's follow-up `Z` was refused.
    #[serde(rename = "reply_emitted")]
    ReplyEmitted,
    #[serde(rename = "rejected_at_reply_freshness")]
    RejectedAtReplyFreshness,
    /// Card step 7: `h(C2) != h(C1)`.
    #[serde(rename = "rejected_at_server_verification")]
    RejectedAtServerVerification,
    #[serde(rename = "rejected_at_auth_freshness")]
    RejectedAtAuthFreshness,
    #[serde(rename = "rejected_at_auth_check")]
    RejectedAtAuthCheck,
    #[serde(rename = "fully_authenticated")]
    FullyAuthenticated,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::RejectedAtCredentials => "rejected_at_credentials",
            Outcome::RejectedAtReplayCache => "rejected_at_replay_cache",
            Outcome::RejectedAtLookup => "rejected_at_lookup",
            Outcome::RejectedAtMCheck => "rejected_at_M_check",
            Outcome::ReplyEmitted => "reply_emitted",
            Outcome::RejectedAtReplyFreshness => "rejected_at_reply_freshness",
            Outcome::RejectedAtServerVerification => "rejected_at_server_verification",
            Outcome::RejectedAtAuthFreshness => "rejected_at_auth_freshness",
            Outcome::RejectedAtAuthCheck => "rejected_at_auth_check",
            Outcome::FullyAuthenticated => "fully_authenticated",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One report line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub scenario: String,
    pub trial: usize,
    pub outcome: Outcome,
    pub history_size: Option<usize>,
    pub wall_time_ns: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keys_match: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackReport {
    pub scenario: String,
    pub trials: usize,
    pub outcomes: Vec<TrialRecord>,
    pub wall_time: Duration,
    pub history_size: Option<usize>,
}

impl AttackReport {
    pub fn new(scenario: impl Into<String>) -> Self {
        AttackReport {
            scenario: scenario.into(),
            trials: 0,
            outcomes: Vec::new(),
            wall_time: Duration::ZERO,
            history_size: None,
        }
    }

    pub fn push(
        &mut self,
        outcome: Outcome,
        history_size: Option<usize>,
        wall_time: Duration,
        keys_match: Option<bool>,
    ) {
        self.outcomes.push(TrialRecord {
            scenario: self.scenario.clone(),
            trial: self.trials,
            outcome,
            history_size,
            wall_time_ns: wall_time.as_nanos() as u64,
            keys_match,
        });
        self.trials += 1;
        self.wall_time += wall_time;
        if history_size.is_some() {
            self.history_size = history_size;
        }
    }

    pub fn count(&self, outcome: Outcome) -> usize {
        self.outcomes.iter().filter(|r| r.outcome == outcome).count()
    }

    pub fn all(&self, outcome: Outcome) -> bool {
        self.outcomes.iter().all(|r| r.outcome == outcome)
    }
}
