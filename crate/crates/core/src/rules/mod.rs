//! Consent-validity and dark-pattern rules.
//!
//! Three audits share one finding format: [`audit_banner`] inspects a
//! banner's structure, [`audit_flow`] checks what was stored against what
//! the user did, and [`audit_vendor_breadth`] compares consented vendors
//! with the vendors actually present on a site.

mod banner;
mod banner_audit;
mod breadth;
mod flow_audit;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use banner::{BannerDescriptor, BannerError, Control, ControlKind, Layer, PlacedControl};
pub use banner_audit::audit_banner;
pub use breadth::{audit_vendor_breadth, Threshold, ThresholdError};
pub use flow_audit::audit_flow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warning,
    Violation,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Violation => "violation",
        })
    }
}

/// The fixed rule catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleId {
    #[serde(rename = "R_FALSE_HIERARCHY")]
    FalseHierarchy,
    #[serde(rename = "R_NO_ACTION_POSITIVE")]
    NoActionPositive,
    #[serde(rename = "R_NO_REJECT_L1")]
    NoRejectL1,
    #[serde(rename = "R_OBSTRUCTION")]
    Obstruction,
    #[serde(rename = "R_OPTOUT_IGNORED")]
    OptoutIgnored,
    #[serde(rename = "R_PRE_REGISTRATION")]
    PreRegistration,
    #[serde(rename = "R_PRETICKED")]
    Preticked,
    #[serde(rename = "R_REJECT_HARDER")]
    RejectHarder,
    #[serde(rename = "R_SNEAKING")]
    Sneaking,
}

impl RuleId {
    pub const ALL: [RuleId; 9] = [
        RuleId::FalseHierarchy,
        RuleId::NoActionPositive,
        RuleId::NoRejectL1,
        RuleId::Obstruction,
        RuleId::OptoutIgnored,
        RuleId::PreRegistration,
        RuleId::Preticked,
        RuleId::RejectHarder,
        RuleId::Sneaking,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RuleId::FalseHierarchy => "R_FALSE_HIERARCHY",
            RuleId::NoActionPositive => "R_NO_ACTION_POSITIVE",
            RuleId::NoRejectL1 => "R_NO_REJECT_L1",
            RuleId::Obstruction => "R_OBSTRUCTION",
            RuleId::OptoutIgnored => "R_OPTOUT_IGNORED",
            RuleId::PreRegistration => "R_PRE_REGISTRATION",
            RuleId::Preticked => "R_PRETICKED",
            RuleId::RejectHarder => "R_REJECT_HARDER",
            RuleId::Sneaking => "R_SNEAKING",
        }
    }

    pub fn severity(&self) -> Severity {
        match self {
            RuleId::Preticked | RuleId::NoActionPositive | RuleId::OptoutIgnored => Severity::Violation,
            _ => Severity::Warning,
        }
    }

    /// Which audit emits the rule.
    pub fn audit(&self) -> &'static str {
        match self {
            RuleId::NoActionPositive | RuleId::OptoutIgnored => "flow",
            RuleId::PreRegistration => "breadth",
            _ => "banner",
        }
    }

    /// Trigger condition, as documented in RULES.md.
    pub fn condition(&self) -> &'static str {
        match self {
            RuleId::FalseHierarchy => {
                "A layer holds both accept_all and reject_all, and some accept/reject pair on it does not share a parity_group."
            }
            RuleId::NoActionPositive => {
                "A record with a non-empty consent set is stored while the visitor has made no accept_all, custom or reject_all choice on that site."
            }
            RuleId::NoRejectL1 => "Layer 1 has no reject_all control.",
            RuleId::Obstruction => {
                "The cheapest refusal path needs strictly more layer transitions than the cheapest accept_all, or no refusal path exists."
            }
            RuleId::OptoutIgnored => {
                "A record with a non-empty consent set is stored after the visitor's latest choice on that site was reject_all."
            }
            RuleId::PreRegistration => {
                "The share of consented vendors not present on the site exceeds the threshold (strict >); the default threshold is 0.5."
            }
            RuleId::Preticked => "Some purpose or vendor toggle has default_on = true.",
            RuleId::RejectHarder => {
                "Refusal costs more than acceptance (cost = layer transitions + 1 scroll if below the fold + 1 click). Not reported when R_OBSTRUCTION fires."
            }
            RuleId::Sneaking => {
                "An accept_all is above the fold while a confirm_choices is below it, or while the cheapest reject_all is below it and refusal is not already costlier than acceptance."
            }
        }
    }

    /// Legal or taxonomic basis, carried in every finding.
    pub fn basis(&self) -> &'static str {
        match self {
            RuleId::FalseHierarchy => "Dark-pattern taxonomy: interface interference / false hierarchy",
            RuleId::NoActionPositive => "GDPR Art. 4(11): consent requires an unambiguous affirmative action",
            RuleId::NoRejectL1 => "GDPR Art. 7(3), EDPB 05/2020: refusing must be as easy as accepting",
            RuleId::Obstruction => "Dark-pattern taxonomy: obstruction",
            RuleId::OptoutIgnored => "GDPR Art. 6(1)(a), Art. 7: processing after refusal lacks a legal basis",
            RuleId::PreRegistration => "GDPR Art. 5(1)(c), Art. 25: data minimisation",
            RuleId::Preticked => "GDPR Art. 4(11), Recital 32: pre-ticked boxes do not constitute consent",
            RuleId::RejectHarder => "GDPR Art. 7(3), EDPB 05/2020: refusing must be as easy as accepting",
            RuleId::Sneaking => "Dark-pattern taxonomy: sneaking",
        }
    }
}

impl PartialOrd for RuleId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RuleId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One audit outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule_id: RuleId,
    pub severity: Severity,
    pub message: String,
    /// Control or event references, e.g. `L2#7:reject_all` or `seq:14`.
    pub anchors: Vec<String>,
    #[serde(rename = "paper_ref")]
    pub basis: String,
}

impl Finding {
    pub fn new(rule_id: RuleId, message: impl Into<String>, anchors: Vec<String>) -> Self {
        Self { rule_id, severity: rule_id.severity(), message: message.into(), anchors, basis: rule_id.basis().to_owned() }
    }
}

/// Markdown rule catalog.
pub fn rules_markdown() -> String {
    let mut out = String::from(
        "# Rule catalog\n\n\
         Generated by `tcfkit rules`. Findings are sorted by rule id; each rule fires at most once per audit.\n\n\
         | Rule | Audit | Severity | Fires when |\n|---|---|---|---|\n",
    );
    for r in RuleId::ALL {
        out.push_str(&format!("| `{}` | {} | {} | {} |\n", r, r.audit(), r.severity(), r.condition()));
    }
    out.push_str(
        "\n## Refusal path\n\n\
         The refusal path is the set of reject_all controls. When a banner has no reject_all at all and every \
         toggle defaults to off, confirm_choices controls count as the refusal path, since confirming the \
         defaults records no consent.\n\n\
         ## Interaction cost\n\n\
         `cost = (layer - 1) + follow_up_layers + (below fold ? 1 : 0) + 1`. `follow_up_layers` counts extra \
         screens shown after the control is activated (for example a confirmation dialog).\n",
    );
    out
}
