use serde::Serialize;

use super::HarnessError;
use crate::wire::MessageKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    UserToServer,
    ServerToUser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Card,
    Server,
    Adversary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TapeEntry {
    pub direction: Direction,
    pub actor: Actor,
    pub kind: MessageKind,
    pub bytes: Vec<u8>,
    pub time: u64,
}

/// Everything that crossed the channel, as the adversary sees it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChannelTape {
    entries: Vec<TapeEntry>,
}

impl ChannelTape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a message; `time` must be later than every recorded entry.
    /// Returns the index of the new entry.
    pub fn record(
        &mut self,
        direction: Direction,
        actor: Actor,
        kind: MessageKind,
        bytes: Vec<u8>,
        time: u64,
    ) -> Result<usize, HarnessError> {
        if let Some(last) = self.entries.last() {
            if time <= last.time {
                return Err(HarnessError::NonMonotonicTime { last: last.time, got: time });
            }
        }
        self.entries.push(TapeEntry { direction, actor, kind, bytes, time });
        Ok(self.entries.len() - 1)
    }

    /// The exact bytes recorded at `index`.
    pub fn replay(&self, index: usize) -> Result<&[u8], HarnessError> {
        self.entries
            .get(index)
            .map(|e| e.bytes.as_slice())
            .ok_or(HarnessError::IndexOutOfRange { index, len: self.entries.len() })
    }

    pub fn entries(&self) -> &[TapeEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
