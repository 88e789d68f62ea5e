use std::collections::BTreeMap;

use super::{Finding, RuleId};
use crate::codec::ConsentRecord;
use crate::flow_sim::{ActionKind, EventKind, EventTrace};

/// Audits stored consent against the user actions that preceded it.
///
/// Each positive store (any non-empty consent set) is attributed to the
/// latest decisive action (`accept_all`, `custom`, `reject_all`) of the
/// same visitor on the same site. No decisive action yields
/// `R_NO_ACTION_POSITIVE`; a `reject_all` yields `R_OPTOUT_IGNORED`.
///
/// `observed` is a record read from storage after the trace ends, e.g. by a
/// vendor. It is attributed to the context of the trace's last event.
pub fn audit_flow(trace: &EventTrace, observed: Option<&ConsentRecord>) -> Vec<Finding> {
    let mut last_choice: BTreeMap<(&str, &str), ActionKind> = BTreeMap::new();
    let mut no_action = Vec::new();
    let mut ignored = Vec::new();

    let mut judge = |choice: Option<ActionKind>, anchor: String| match choice {
        None => no_action.push(anchor),
        Some(ActionKind::RejectAll) => ignored.push(anchor),
        Some(_) => {}
    };

    for e in trace {
        let ctx = (e.visitor.as_str(), e.site.as_str());
        match &e.kind {
            EventKind::UserAction { action: ActionKind::None } => {}
            EventKind::UserAction { action } => {
                last_choice.insert(ctx, *action);
            }
            EventKind::ConsentStored { record, .. } if record.is_positive() => {
                judge(last_choice.get(&ctx).copied(), format!("seq:{}", e.seq));
            }
            _ => {}
        }
    }
    if observed.is_some_and(ConsentRecord::is_positive) {
        let choice = trace.events.last().and_then(|e| last_choice.get(&(e.visitor.as_str(), e.site.as_str())).copied());
        judge(choice, "observed".to_owned());
    }

    let mut out = Vec::new();
    if !no_action.is_empty() {
        out.push(Finding::new(
            RuleId::NoActionPositive,
            format!("{} positive consent store(s) without any user choice", no_action.len()),
            no_action,
        ));
    }
    if !ignored.is_empty() {
        out.push(Finding::new(
            RuleId::OptoutIgnored,
            format!("{} positive consent store(s) after the user rejected all", ignored.len()),
            ignored,
        ));
    }
    out.sort_by_key(|f| f.rule_id);
    out
}
