//! Deterministic simulation of publishers, CMPs, vendors and visitors.
//!
//! HTTP is modelled as request events against host names; cookies are
//! attached by domain suffix. All randomness comes from the world seed, so
//! the same config, script and seed always give the same trace.

mod config;
mod events;
mod jar;
mod world;

pub use config::{
    CmpBehavior, CmpConfig, ConsentScope, CookieValueKind, ServingMode, SiteConfig, SiteCookieConfig, TrackerConfig,
    VisitorConfig, WorldConfig,
};
pub use events::{ActionKind, Event, EventKind, EventTrace, Party, Reader, TraceError, TRACE_SCHEMA_VERSION};
pub use jar::CookieJar;
pub use world::{build_world, CustomChoice, SignalRead, SimError, SimulationWorld, UserChoice, CONSENT_COOKIE, VENDOR_ACCESS_HOST};

use serde::{Deserialize, Serialize};

use crate::codec::ConsentRecord;

/// One step of an action script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    Visit { visitor: String, site: String },
    Interact { visitor: String, site: String, action: UserChoice },
    VendorRequest { visitor: String, site: String, reader: Reader },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepOutcome {
    pub step: usize,
    pub op: &'static str,
    /// Number of events the step emitted.
    pub events: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<ConsentRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScriptOutcome {
    pub seed: u64,
    pub steps: Vec<StepOutcome>,
    pub trace: EventTrace,
}

/// Runs a script against a fresh world.
pub fn run_script(config: &WorldConfig, seed: u64, steps: &[Step]) -> Result<ScriptOutcome, SimError> {
    let mut world = build_world(config, seed)?;
    let mut outcomes = Vec::with_capacity(steps.len());
    for (i, step) in steps.iter().enumerate() {
        let before = world.trace().len();
        let (op, record) = match step {
            Step::Visit { visitor, site } => {
                world.visit(visitor, site)?;
                ("visit", None)
            }
            Step::Interact { visitor, site, action } => ("interact", Some(world.interact(visitor, site, action)?)),
            Step::VendorRequest { visitor, site, reader } => {
                ("vendor_request", world.vendor_request(reader, visitor, site)?.record)
            }
        };
        let signal = record.as_ref().map(crate::codec::encode).transpose()?.map(|s| s.into_string());
        outcomes.push(StepOutcome { step: i, op, events: world.trace().len() - before, record, signal });
    }
    Ok(ScriptOutcome { seed, steps: outcomes, trace: world.trace().clone() })
}
