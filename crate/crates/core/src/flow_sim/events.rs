use serde::{Deserialize, Serialize};

use super::config::ConsentScope;
use crate::codec::{ConsentRecord, Deciseconds};

/// Schema version written on every exported event line.
pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    First,
    Third,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reader {
    Cmp(String),
    Vendor(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    AcceptAll,
    RejectAll,
    Custom,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    ScriptLoad { from_domain: String, party: Party },
    PixelLoad { from_domain: String, party: Party },
    IpExposure { observer_domain: String, ip: String },
    CookieSet { domain: String, name: String, value: String, party: Party, setter: String },
    UserAction { action: ActionKind },
    ConsentStored { scope: ConsentScope, location: String, signal: String, record: ConsentRecord },
    SignalRead { reader: Reader, domain: Option<String>, record: Option<ConsentRecord> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at: Deciseconds,
    pub visitor: String,
    pub site: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Serialize, Deserialize)]
struct EventLine {
    schema: u32,
    #[serde(flatten)]
    event: Event,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: unsupported schema version {found}")]
    Schema { line: usize, found: u32 },
    #[error("line {line}: sequence number {seq} does not increase")]
    Order { line: usize, seq: u64 },
}

/// Ordered observable events.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventTrace {
    pub events: Vec<Event>,
}

impl EventTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    /// One JSON object per line, each tagged with the schema version.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let line = EventLine { schema: TRACE_SCHEMA_VERSION, event: e.clone() };
            out.push_str(&serde_json::to_string(&line).expect("events are serializable"));
            out.push('\n');
        }
        out
    }

    /// Parses JSON lines, skipping blank lines. Sequence numbers must
    /// strictly increase.
    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let mut events: Vec<Event> = Vec::new();
        for (i, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line = i + 1;
            let parsed: EventLine = serde_json::from_str(raw).map_err(|source| TraceError::Json { line, source })?;
            if parsed.schema != TRACE_SCHEMA_VERSION {
                return Err(TraceError::Schema { line, found: parsed.schema });
            }
            if events.last().is_some_and(|p| p.seq >= parsed.event.seq) {
                return Err(TraceError::Order { line, seq: parsed.event.seq });
            }
            events.push(parsed.event);
        }
        Ok(Self { events })
    }
}

impl<'a> IntoIterator for &'a EventTrace {
    type Item = &'a Event;
    type IntoIter = std::slice::Iter<'a, Event>;

    fn into_iter(self) -> Self::IntoIter {
        self.events.iter()
    }
}
