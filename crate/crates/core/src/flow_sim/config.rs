use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::codec::{Deciseconds, Language};
use crate::rules::BannerDescriptor;
use crate::vendor_list::VendorList;

/// JSON world description. Every field may be omitted; `{}` is an empty world.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    #[serde(default)]
    pub vendor_list: Option<VendorList>,
    #[serde(default)]
    pub cmps: Vec<CmpConfig>,
    #[serde(default)]
    pub sites: Vec<SiteConfig>,
    #[serde(default)]
    pub visitors: Vec<VisitorConfig>,
    /// Simulated clock at the first event.
    #[serde(default = "default_start")]
    pub start_time: Deciseconds,
}

fn default_start() -> Deciseconds {
    // 2021-01-13T00:00:00Z
    Deciseconds(16_104_960_000)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServingMode {
    /// Script served from the CMP's own domain.
    OwnDomain,
    /// Script served from `<name>.mgr.consensu.org`.
    DelegatedSubdomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsentScope {
    Global,
    ServiceSpecific,
}

/// How faithfully a CMP records the user's choice.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpBehavior {
    #[default]
    Compliant,
    /// Stores an accept-all record on page load, before any user action.
    PositiveWithoutAction,
    /// Stores an accept-all record when the user rejects everything.
    IgnoreOptOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerConfig {
    /// Host serving the pixel, e.g. `pixel.quantserve.com`.
    pub host: String,
    /// Cookie domain; defaults to the host's parent with a leading dot.
    #[serde(default)]
    pub cookie_domain: Option<String>,
    #[serde(default = "default_tracker_cookie")]
    pub cookie_name: String,
}

fn default_tracker_cookie() -> String {
    "mc".to_owned()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmpConfig {
    /// DNS label, used for the delegated subdomain.
    pub name: String,
    /// Numeric id written into consent records.
    pub cmp_id: u16,
    #[serde(default)]
    pub cmp_version: u16,
    pub serving_mode: ServingMode,
    /// Required in `own_domain` mode.
    #[serde(default)]
    pub own_domain: Option<String>,
    #[serde(default)]
    pub registered: bool,
    #[serde(default)]
    pub bundled_tracker: bool,
    /// Pixel details when `bundled_tracker` is set; defaults to
    /// `pixel.<name>-metrics.example`.
    #[serde(default)]
    pub tracker: Option<TrackerConfig>,
    /// Defaults to `global` for registered CMPs and `service_specific`
    /// otherwise.
    #[serde(default)]
    pub scope: Option<ConsentScope>,
    #[serde(default)]
    pub behavior: CmpBehavior,
    #[serde(default = "default_language")]
    pub consent_language: Language,
    #[serde(default = "default_policy_version")]
    pub policy_version: u8,
}

fn default_language() -> Language {
    Language::EN
}

fn default_policy_version() -> u8 {
    2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CookieValueKind {
    /// Same value for every visitor and visit.
    Constant { value: String },
    /// A 128-bit identifier, stable per visitor.
    PerVisitor,
    /// A fresh 128-bit nonce on every visit.
    PerVisit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteCookieConfig {
    pub name: String,
    /// Host setting the cookie; defaults to the site's domain.
    #[serde(default)]
    pub setter: Option<String>,
    /// Cookie domain; defaults to the setter host (host-only cookie).
    #[serde(default)]
    pub domain: Option<String>,
    pub value: CookieValueKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    pub id: String,
    pub domain: String,
    #[serde(default)]
    pub publisher: Option<String>,
    #[serde(default)]
    pub cmp: Option<String>,
    #[serde(default)]
    pub present_vendor_ids: BTreeSet<u16>,
    #[serde(default)]
    pub banner: Option<BannerDescriptor>,
    #[serde(default)]
    pub cookies: Vec<SiteCookieConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisitorConfig {
    pub id: String,
    /// Opaque address label.
    pub ip: String,
}
