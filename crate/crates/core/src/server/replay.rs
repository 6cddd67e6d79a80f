//! Replay-cache policies for login requests.
//!
//! `FullHistory` keeps every accepted login request digest per user and
//! compares each new request against all of them. Nothing is ever evicted.
//!
//! On-disk layout: `KSRH1`, then per user the 32-byte lookup token, a 4-byte
//! big-endian entry count and that many 32-byte request digests.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::db::DbError;
use crate::crypto::{Digest, DIGEST_WIDTH};

pub const HISTORY_MAGIC: &[u8; 5] = b"KSRH1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayMode {
    None,
    FullHistory,
}

impl fmt::Display for ReplayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReplayMode::None => "none",
            ReplayMode::FullHistory => "full_history",
        })
    }
}

impl FromStr for ReplayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ReplayMode::None),
            "full_history" | "full-history" => Ok(ReplayMode::FullHistory),
            other => Err(format!("unknown replay policy {other:?}")),
        }
    }
}

/// Cost of the most recent history check.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckCost {
    pub comparisons: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayPolicy {
    mode: ReplayMode,
    history: BTreeMap<Digest, Vec<Digest>>,
    last_check: CheckCost,
}

impl ReplayPolicy {
    pub fn new(mode: ReplayMode) -> Self {
        ReplayPolicy { mode, history: BTreeMap::new(), last_check: CheckCost::default() }
    }

    pub fn mode(&self) -> ReplayMode {
        self.mode
    }

    /// Whether `request` was already accepted for `user`. Always false when
    /// the mode is `None`.
    pub fn seen(&mut self, user: &Digest, request: &Digest) -> bool {
        if self.mode == ReplayMode::None {
            return false;
        }
        let start = Instant::now();
        let past = self.history.get(user).map(Vec::as_slice).unwrap_or_default();
        let mut comparisons = 0;
        let mut found = false;
        for entry in past {
            comparisons += 1;
            if entry == request {
                found = true;
                break;
            }
        }
        self.last_check = CheckCost { comparisons, elapsed: start.elapsed() };
        found
    }

    pub fn record(&mut self, user: &Digest, request: Digest) {
        if self.mode == ReplayMode::FullHistory {
            self.history.entry(*user).or_default().push(request);
        }
    }

    pub fn last_check(&self) -> CheckCost {
        self.last_check
    }

    pub fn history_size(&self, user: &Digest) -> usize {
        self.history.get(user).map_or(0, Vec::len)
    }

    pub fn total_entries(&self) -> usize {
        self.history.values().map(Vec::len).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = HISTORY_MAGIC.to_vec();
        for (user, entries) in &self.history {
            out.extend_from_slice(user.as_bytes());
            out.extend_from_slice(&(entries.len() as u32).to_be_bytes());
            for entry in entries {
                out.extend_from_slice(entry.as_bytes());
            }
        }
        out
    }

    /// Loads a persisted history; the result is always in `FullHistory` mode.
    pub fn from_bytes(data: &[u8]) -> Result<Self, DbError> {
        let mut rest =
            data.strip_prefix(HISTORY_MAGIC.as_slice()).ok_or(DbError::Malformed("bad magic"))?;
        let mut policy = ReplayPolicy::new(ReplayMode::FullHistory);
        while !rest.is_empty() {
            if rest.len() < DIGEST_WIDTH + 4 {
                return Err(DbError::Malformed("truncated history"));
            }
            let user = Digest::from_bytes(&rest[..DIGEST_WIDTH])?;
            let count =
                u32::from_be_bytes(rest[DIGEST_WIDTH..DIGEST_WIDTH + 4].try_into().unwrap());
            rest = &rest[DIGEST_WIDTH + 4..];
            let needed = count as usize * DIGEST_WIDTH;
            if rest.len() < needed {
                return Err(DbError::Malformed("truncated history"));
            }
            let entries = rest[..needed]
                .chunks(DIGEST_WIDTH)
                .map(Digest::from_bytes)
                .collect::<Result<Vec<_>, _>>()?;
            rest = &rest[needed..];
            if policy.history.insert(user, entries).is_some() {
                return Err(DbError::Malformed("duplicate user"));
            }
        }
        Ok(policy)
    }
}
