use std::path::{Path, PathBuf};

use ksauth_core::crypto::{DEFAULT_ID_WIDTH, MIN_PRIME_BITS};
use ksauth_core::harness::{WorldConfig, DEFAULT_DELTA_T};
use ksauth_core::{ReplayMode, DIGEST_WIDTH};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Settings for one command invocation. Loaded from a TOML file whose keys
/// are the field names, then overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub prime_bits: u32,
    pub digest_width: usize,
    pub id_width: usize,
    pub delta_t: u64,
    pub seed: u64,
    pub trials: usize,
    pub replay_policy: ReplayMode,
    /// Unset means the scenario's own default.
    pub id_s_known: Option<bool>,
    pub output_path: PathBuf,
    /// Sessions recorded before a replay (`m`).
    pub recorded_sessions: usize,
    /// Which recorded session's login request is replayed (`k`, 1-based).
    pub replay_from: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            prime_bits: 256,
            digest_width: DIGEST_WIDTH,
            id_width: DEFAULT_ID_WIDTH,
            delta_t: DEFAULT_DELTA_T,
            seed: 0,
            trials: 100,
            replay_policy: ReplayMode::None,
            id_s_known: None,
            output_path: PathBuf::from("ksauth-out"),
            recorded_sessions: 5,
            replay_from: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::ConfigInvalid(msg));
        if self.prime_bits < MIN_PRIME_BITS {
            return fail(format!("prime_bits must be at least {MIN_PRIME_BITS}"));
        }
        if self.digest_width != DIGEST_WIDTH {
            return fail(format!("digest_width must be {DIGEST_WIDTH} (SHA-256)"));
        }
        if self.id_width == 0 || self.id_width > self.digest_width {
            return fail("id_width must be in 1..=digest_width".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.recorded_sessions == 0 {
            return fail("recorded_sessions must be at least 1".into());
        }
        if self.replay_from == 0 || self.replay_from > self.recorded_sessions {
            return fail("replay_from must be in 1..=recorded_sessions".into());
        }
        Ok(())
    }

    pub fn world_config(&self) -> WorldConfig {
        WorldConfig {
            prime_bits: self.prime_bits,
            id_width: self.id_width,
            delta_t: self.delta_t,
            policy: self.replay_policy,
        }
    }
}
