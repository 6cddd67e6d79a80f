use std::collections::BTreeMap;

use ksauth_core::harness::{Actor, ChannelTape};
use ksauth_core::wire::Message;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One message on the channel. `fields` holds each message component in hex
/// plus `wire`, the hex of the full encoded message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub trial: usize,
    pub time: u64,
    pub actor: String,
    pub event: String,
    pub fields: BTreeMap<String, String>,
}

impl TranscriptLine {
    /// The exact wire bytes this line was made from.
    pub fn wire_bytes(&self) -> Result<Vec<u8>, CliError> {
        let wire = self
            .fields
            .get("wire")
            .ok_or_else(|| CliError::MalformedFile("transcript line without wire field".into()))?;
        hex::decode(wire).map_err(|e| CliError::MalformedFile(e.to_string()))
    }
}

fn actor_name(actor: Actor) -> &'static str {
    match actor {
        Actor::Card => "card",
        Actor::Server => "server",
        Actor::Adversary => "adversary",
    }
}

pub fn from_tape(trial: usize, tape: &ChannelTape) -> Result<Vec<TranscriptLine>, CliError> {
    tape.entries()
        .iter()
        .map(|entry| {
            let message = Message::decode(&entry.bytes)
                .map_err(|e| CliError::MalformedFile(e.to_string()))?;
            let mut fields: BTreeMap<String, String> = message
                .fields()
                .into_iter()
                .map(|(name, value)| (name.to_string(), hex::encode(value)))
                .collect();
            fields.insert("wire".into(), hex::encode(&entry.bytes));
            Ok(TranscriptLine {
                trial,
                time: entry.time,
                actor: actor_name(entry.actor).into(),
                event: entry.kind.name().into(),
                fields,
            })
        })
        .collect()
}

pub fn to_json_lines<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("plain data serializes"));
        out.push('\n');
    }
    out
}
