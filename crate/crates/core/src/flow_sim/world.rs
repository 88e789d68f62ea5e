use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::config::{CmpBehavior, ConsentScope, CookieValueKind, ServingMode, SiteConfig, WorldConfig};
use super::events::{ActionKind, Event, EventKind, EventTrace, Party, Reader};
use super::jar::CookieJar;
use crate::codec::{self, CodecError, ConsentRecord, Deciseconds};
use crate::domain;
use crate::vendor_list::VendorList;

/// Name of the globally-scoped consent cookie.
pub const CONSENT_COOKIE: &str = "euconsent-v2";
/// Host through which registered vendors reach the consent cookie.
pub const VENDOR_ACCESS_HOST: &str = "vendors.mgr.consensu.org";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("config error at {path}: {message}")]
    ConfigError { path: String, message: String },
    #[error("unknown {kind} `{id}`")]
    UnknownId { kind: &'static str, id: String },
    #[error("visitor `{visitor}` has not visited site `{site}`")]
    NotVisited { visitor: String, site: String },
    #[error("site `{site}` shows no consent banner")]
    NoBanner { site: String },
    #[error("custom choice includes {field} id {id} that the banner does not offer")]
    InvalidChoice { field: &'static str, id: u16 },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

fn config_err(path: impl Into<String>, message: impl Into<String>) -> SimError {
    SimError::ConfigError { path: path.into(), message: message.into() }
}

/// What the user does with a banner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserChoice {
    AcceptAll,
    RejectAll,
    Custom(CustomChoice),
    None,
}

impl UserChoice {
    pub fn kind(&self) -> ActionKind {
        match self {
            UserChoice::AcceptAll => ActionKind::AcceptAll,
            UserChoice::RejectAll => ActionKind::RejectAll,
            UserChoice::Custom(_) => ActionKind::Custom,
            UserChoice::None => ActionKind::None,
        }
    }
}

/// Explicit selections; every id must be offered by the banner.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomChoice {
    #[serde(default)]
    pub purposes: BTreeSet<u8>,
    #[serde(default)]
    pub purposes_li: BTreeSet<u8>,
    #[serde(default)]
    pub special_features: BTreeSet<u8>,
    #[serde(default)]
    pub vendors: BTreeSet<u16>,
    #[serde(default)]
    pub vendors_li: BTreeSet<u16>,
}

/// Result of a vendor or CMP asking for the consent signal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignalRead {
    pub reader: Reader,
    pub domain: Option<String>,
    pub record: Option<ConsentRecord>,
}

#[derive(Debug, Clone)]
struct Tracker {
    host: String,
    cookie_domain: String,
    cookie_name: String,
}

#[derive(Debug, Clone)]
struct Cmp {
    cmp_id: u16,
    cmp_version: u16,
    registered: bool,
    serving_host: String,
    consensu_host: Option<String>,
    scope: ConsentScope,
    behavior: CmpBehavior,
    tracker: Option<Tracker>,
    language: codec::Language,
    policy_version: u8,
}

#[derive(Debug, Clone)]
struct Visitor {
    ip: String,
    jar: CookieJar,
}

/// A single-owner state machine over sites, CMPs and visitors.
#[derive(Debug, Clone)]
pub struct SimulationWorld {
    seed: u64,
    rng: ChaCha8Rng,
    clock: Deciseconds,
    vendor_list: Option<VendorList>,
    cmps: BTreeMap<String, Cmp>,
    sites: BTreeMap<String, SiteConfig>,
    visitors: BTreeMap<String, Visitor>,
    local_storage: BTreeMap<(String, String), ConsentRecord>,
    visited: BTreeSet<(String, String)>,
    trace: EventTrace,
}

fn party_of(host: &str, site_domain: &str) -> Party {
    if domain::is_subdomain_or_equal(host, site_domain) {
        Party::First
    } else {
        Party::Third
    }
}

/// Per-visitor identifier: 128 bits from a ChaCha stream keyed by the
/// world seed, the visitor and the cookie, rendered as hex.
fn visitor_identifier(seed: u64, visitor: &str, cookie_domain: &str, cookie_name: &str) -> String {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [visitor, cookie_domain, cookie_name] {
        h.update(part.as_bytes());
        h.update([0]);
    }
    let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
    format!("{:032x}", rng.gen::<u128>())
}

/// Validates a config and builds a world seeded with `seed`.
pub fn build_world(config: &WorldConfig, seed: u64) -> Result<SimulationWorld, SimError> {
    if config.vendor_list.as_ref().is_some_and(|l| l.version() > 4095) {
        return Err(config_err("vendor_list.version", "must fit in 12 bits"));
    }

    let mut cmps = BTreeMap::new();
    for (i, c) in config.cmps.iter().enumerate() {
        let path = |f: &str| format!("cmps[{i}].{f}");
        if !domain::is_valid_host(&c.name) || c.name.contains('.') {
            return Err(config_err(path("name"), "must be a single lower-case DNS label"));
        }
        if c.cmp_id > 4095 || c.cmp_version > 4095 {
            return Err(config_err(path("cmp_id"), "cmp_id and cmp_version must fit in 12 bits"));
        }
        if !c.consent_language.is_valid() {
            return Err(config_err(path("consent_language"), "must be two upper-case letters"));
        }
        if c.policy_version > 63 {
            return Err(config_err(path("policy_version"), "must fit in 6 bits"));
        }
        let consensu_host = c.registered.then(|| domain::delegated_host(&c.name));
        let serving_host = match c.serving_mode {
            ServingMode::DelegatedSubdomain => {
                consensu_host.clone().ok_or_else(|| config_err(path("serving_mode"), "only registered CMPs have a delegated subdomain"))?
            }
            ServingMode::OwnDomain => {
                let d = c.own_domain.clone().ok_or_else(|| config_err(path("own_domain"), "required in own_domain mode"))?;
                if !domain::is_valid_host(&d) {
                    return Err(config_err(path("own_domain"), "invalid host"));
                }
                d
            }
        };
        let scope = c.scope.unwrap_or(if c.registered { ConsentScope::Global } else { ConsentScope::ServiceSpecific });
        if scope == ConsentScope::Global && !c.registered {
            return Err(config_err(path("scope"), "globally-scoped storage needs a registered CMP"));
        }
        let tracker = if c.bundled_tracker {
            let t = c.tracker.clone();
            let host = t.as_ref().map(|t| t.host.clone()).unwrap_or_else(|| format!("pixel.{}-metrics.example", c.name));
            if !domain::is_valid_host(&host) {
                return Err(config_err(path("tracker.host"), "invalid host"));
            }
            let cookie_domain = t.as_ref().and_then(|t| t.cookie_domain.clone()).unwrap_or_else(|| match host.split_once('.') {
                Some((_, parent)) if parent.contains('.') => format!(".{parent}"),
                _ => host.clone(),
            });
            if !domain::may_set_cookie(&host, &cookie_domain) {
                return Err(config_err(path("tracker.cookie_domain"), "tracker host may not set cookies on this domain"));
            }
            Some(Tracker { host, cookie_domain, cookie_name: t.map(|t| t.cookie_name).unwrap_or_else(|| "mc".into()) })
        } else {
            None
        };
        let cmp = Cmp {
            cmp_id: c.cmp_id,
            cmp_version: c.cmp_version,
            registered: c.registered,
            serving_host,
            consensu_host,
            scope,
            behavior: c.behavior,
            tracker,
            language: c.consent_language,
            policy_version: c.policy_version,
        };
        if cmps.insert(c.name.clone(), cmp).is_some() {
            return Err(config_err(path("name"), format!("duplicate CMP `{}`", c.name)));
        }
    }

    let mut sites = BTreeMap::new();
    for (i, s) in config.sites.iter().enumerate() {
        let path = |f: &str| format!("sites[{i}].{f}");
        if !domain::is_valid_host(&s.domain) {
            return Err(config_err(path("domain"), "invalid host"));
        }
        if let Some(c) = &s.cmp {
            if !cmps.contains_key(c) {
                return Err(config_err(path("cmp"), format!("unknown CMP `{c}`")));
            }
        }
        if let Some(b) = &s.banner {
            b.check().map_err(|e| config_err(path("banner"), e.to_string()))?;
        }
        for (j, ck) in s.cookies.iter().enumerate() {
            let setter = ck.setter.as_deref().unwrap_or(&s.domain);
            let dom = ck.domain.as_deref().unwrap_or(setter);
            if !domain::is_valid_host(setter) || !domain::may_set_cookie(setter, dom) {
                return Err(config_err(format!("sites[{i}].cookies[{j}]"), "setter may not set a cookie on this domain"));
            }
        }
        if sites.insert(s.id.clone(), s.clone()).is_some() {
            return Err(config_err(path("id"), format!("duplicate site `{}`", s.id)));
        }
    }

    let mut visitors = BTreeMap::new();
    for (i, v) in config.visitors.iter().enumerate() {
        if visitors.insert(v.id.clone(), Visitor { ip: v.ip.clone(), jar: CookieJar::default() }).is_some() {
            return Err(config_err(format!("visitors[{i}].id"), format!("duplicate visitor `{}`", v.id)));
        }
    }

    Ok(SimulationWorld {
        seed,
        rng: ChaCha8Rng::seed_from_u64(seed),
        clock: config.start_time,
        vendor_list: config.vendor_list.clone(),
        cmps,
        sites,
        visitors,
        local_storage: BTreeMap::new(),
        visited: BTreeSet::new(),
        trace: EventTrace::default(),
    })
}

impl SimulationWorld {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Every event emitted so far.
    pub fn trace(&self) -> &EventTrace {
        &self.trace
    }

    pub fn site_ids(&self) -> impl Iterator<Item = &str> {
        self.sites.keys().map(String::as_str)
    }

    pub fn visitor_ids(&self) -> impl Iterator<Item = &str> {
        self.visitors.keys().map(String::as_str)
    }

    pub fn cmp_names(&self) -> impl Iterator<Item = &str> {
        self.cmps.keys().map(String::as_str)
    }

    pub fn site(&self, id: &str) -> Option<&SiteConfig> {
        self.sites.get(id)
    }

    pub fn vendor_list(&self) -> Option<&VendorList> {
        self.vendor_list.as_ref()
    }

    /// Host the CMP's script is served from.
    pub fn cmp_serving_host(&self, cmp: &str) -> Option<&str> {
        self.cmps.get(cmp).map(|c| c.serving_host.as_str())
    }

    pub fn cmp_is_registered(&self, cmp: &str) -> Option<bool> {
        self.cmps.get(cmp).map(|c| c.registered)
    }

    pub fn jar(&self, visitor: &str) -> Option<&CookieJar> {
        self.visitors.get(visitor).map(|v| &v.jar)
    }

    fn emit(&mut self, visitor: &str, site: &str, kind: EventKind) {
        self.clock = Deciseconds(self.clock.0 + 1);
        let seq = self.trace.events.last().map_or(0, |e| e.seq + 1);
        self.trace.events.push(Event { seq, at: self.clock, visitor: visitor.to_owned(), site: site.to_owned(), kind });
    }

    fn check_ids(&self, visitor: &str, site: &str) -> Result<(), SimError> {
        if !self.visitors.contains_key(visitor) {
            return Err(SimError::UnknownId { kind: "visitor", id: visitor.to_owned() });
        }
        if !self.sites.contains_key(site) {
            return Err(SimError::UnknownId { kind: "site", id: site.to_owned() });
        }
        Ok(())
    }

    fn load(&mut self, visitor: &str, site: &str, host: &str, site_domain: &str, pixel: bool) {
        let party = party_of(host, site_domain);
        let from_domain = host.to_owned();
        let kind = if pixel { EventKind::PixelLoad { from_domain, party } } else { EventKind::ScriptLoad { from_domain, party } };
        self.emit(visitor, site, kind);
        if party == Party::Third {
            let ip = self.visitors[visitor].ip.clone();
            self.emit(visitor, site, EventKind::IpExposure { observer_domain: host.to_owned(), ip });
        }
    }

    fn set_cookie(&mut self, visitor: &str, site: &str, setter: &str, cookie_domain: &str, name: &str, value: String) {
        let site_domain = self.sites[site].domain.clone();
        if self.visitors.get_mut(visitor).expect("checked").jar.set(setter, cookie_domain, name, &value) {
            let party = party_of(setter, &site_domain);
            self.emit(
                visitor,
                site,
                EventKind::CookieSet { domain: cookie_domain.to_owned(), name: name.to_owned(), value, party, setter: setter.to_owned() },
            );
        }
    }

    fn stable_value(&self, visitor: &str, cookie_domain: &str, name: &str) -> String {
        match self.visitors[visitor].jar.get(cookie_domain, name) {
            Some(v) => v.to_owned(),
            None => visitor_identifier(self.seed, visitor, cookie_domain, name),
        }
    }

    /// Loads a site page for a visitor: the publisher page, the CMP script,
    /// the bundled pixel if any, then the site's configured cookies.
    /// Returns the events this visit produced.
    pub fn visit(&mut self, visitor: &str, site: &str) -> Result<EventTrace, SimError> {
        self.check_ids(visitor, site)?;
        let start = self.trace.len();
        let site_cfg = self.sites[site].clone();
        let sd = site_cfg.domain.as_str();
        self.load(visitor, site, sd, sd, false);
        let mut loaded: BTreeSet<String> = BTreeSet::from([sd.to_owned()]);

        if let Some(cmp_name) = &site_cfg.cmp {
            let cmp = self.cmps[cmp_name].clone();
            self.load(visitor, site, &cmp.serving_host, sd, false);
            loaded.insert(cmp.serving_host.clone());
            if cmp.behavior == CmpBehavior::PositiveWithoutAction {
                if let Some(banner) = &site_cfg.banner {
                    let record = self.build_record(&cmp, visitor, site, &UserChoice::AcceptAll, banner)?;
                    self.store(visitor, site, &cmp, record)?;
                }
            }
            if let Some(t) = &cmp.tracker {
                self.load(visitor, site, &t.host, sd, true);
                loaded.insert(t.host.clone());
                let value = self.stable_value(visitor, &t.cookie_domain, &t.cookie_name);
                self.set_cookie(visitor, site, &t.host, &t.cookie_domain, &t.cookie_name, value);
            }
        }

        for ck in &site_cfg.cookies {
            let setter = ck.setter.clone().unwrap_or_else(|| sd.to_owned());
            let dom = ck.domain.clone().unwrap_or_else(|| setter.clone());
            if loaded.insert(setter.clone()) {
                self.load(visitor, site, &setter, sd, false);
            }
            let value = match &ck.value {
                CookieValueKind::Constant { value } => value.clone(),
                CookieValueKind::PerVisitor => self.stable_value(visitor, &dom, &ck.name),
                CookieValueKind::PerVisit => format!("{:032x}", self.rng.gen::<u128>()),
            };
            self.set_cookie(visitor, site, &setter, &dom, &ck.name, value);
        }

        self.visited.insert((visitor.to_owned(), site.to_owned()));
        Ok(EventTrace { events: self.trace.events[start..].to_vec() })
    }

    fn existing_record(&self, visitor: &str, site: &str, cmp: &Cmp) -> Option<ConsentRecord> {
        match cmp.scope {
            ConsentScope::ServiceSpecific => self.local_storage.get(&(visitor.to_owned(), site.to_owned())).cloned(),
            ConsentScope::Global => self.visitors[visitor]
                .jar
                .get(&format!(".{}", domain::CONSENSU_DOMAIN), CONSENT_COOKIE)
                .and_then(|v| codec::decode(v).ok()),
        }
    }

    fn build_record(
        &self,
        cmp: &Cmp,
        visitor: &str,
        site: &str,
        choice: &UserChoice,
        banner: &crate::rules::BannerDescriptor,
    ) -> Result<ConsentRecord, SimError> {
        let now = Deciseconds(self.clock.0 + 1);
        let mut r = ConsentRecord::empty(now);
        if let Some(prev) = self.existing_record(visitor, site, cmp) {
            r.created = prev.created.min(now);
        }
        r.cmp_id = cmp.cmp_id;
        r.cmp_version = cmp.cmp_version;
        r.consent_language = cmp.language;
        r.policy_version = cmp.policy_version;
        r.vendor_list_version = self.vendor_list.as_ref().map_or(0, |l| l.version() as u16);
        r.service_specific = cmp.scope == ConsentScope::ServiceSpecific;
        use crate::rules::ControlKind as K;
        let screen_of = |k: &K| banner.layer_of(k).unwrap_or(1).min(63) as u8;
        match choice {
            UserChoice::AcceptAll => {
                r.consent_screen = screen_of(&K::AcceptAll);
                r.special_feature_optins = banner.offered_special_features.clone();
                r.purposes_consent = banner.offered_purposes.clone();
                r.purposes_li = banner.offered_li_purposes.clone();
                r.vendors_consent = banner.configured_vendor_ids.clone();
                r.vendors_li = banner.configured_li_vendor_ids.clone();
            }
            UserChoice::RejectAll => r.consent_screen = screen_of(&K::RejectAll),
            UserChoice::None => {}
            UserChoice::Custom(c) => {
                fn within<T: Ord + Copy + Into<u16>>(
                    chosen: &BTreeSet<T>,
                    offered: &BTreeSet<T>,
                    field: &'static str,
                ) -> Result<BTreeSet<T>, SimError> {
                    match chosen.difference(offered).next() {
                        Some(&bad) => Err(SimError::InvalidChoice { field, id: bad.into() }),
                        None => Ok(chosen.clone()),
                    }
                }
                r.consent_screen = screen_of(&K::ConfirmChoices);
                r.purposes_consent = within(&c.purposes, &banner.offered_purposes, "purpose")?;
                r.purposes_li = within(&c.purposes_li, &banner.offered_li_purposes, "purpose_li")?;
                r.special_feature_optins = within(&c.special_features, &banner.offered_special_features, "special_feature")?;
                r.vendors_consent = within(&c.vendors, &banner.configured_vendor_ids, "vendor")?;
                r.vendors_li = within(&c.vendors_li, &banner.configured_li_vendor_ids, "vendor_li")?;
            }
        }
        Ok(r)
    }

    fn store(&mut self, visitor: &str, site: &str, cmp: &Cmp, record: ConsentRecord) -> Result<(), SimError> {
        let signal = codec::encode(&record)?.into_string();
        match cmp.scope {
            ConsentScope::Global => {
                let host = cmp.consensu_host.clone().expect("global scope implies registration");
                if host != cmp.serving_host {
                    let sd = self.sites[site].domain.clone();
                    self.load(visitor, site, &host, &sd, false);
                }
                let cookie_domain = format!(".{}", domain::CONSENSU_DOMAIN);
                self.set_cookie(visitor, site, &host, &cookie_domain, CONSENT_COOKIE, signal.clone());
                self.emit(
                    visitor,
                    site,
                    EventKind::ConsentStored {
                        scope: ConsentScope::Global,
                        location: format!("cookie:{cookie_domain}/{CONSENT_COOKIE}"),
                        signal,
                        record,
                    },
                );
            }
            ConsentScope::ServiceSpecific => {
                let location = format!("local:{}", self.sites[site].domain);
                self.local_storage.insert((visitor.to_owned(), site.to_owned()), record.clone());
                self.emit(visitor, site, EventKind::ConsentStored { scope: ConsentScope::ServiceSpecific, location, signal, record });
            }
        }
        Ok(())
    }

    /// Applies a user action to the banner shown during an earlier visit and
    /// returns the record the user's choice corresponds to. `None` stores
    /// nothing for compliant CMPs and returns the empty record.
    pub fn interact(&mut self, visitor: &str, site: &str, choice: &UserChoice) -> Result<ConsentRecord, SimError> {
        self.check_ids(visitor, site)?;
        if !self.visited.contains(&(visitor.to_owned(), site.to_owned())) {
            return Err(SimError::NotVisited { visitor: visitor.to_owned(), site: site.to_owned() });
        }
        let site_cfg = self.sites[site].clone();
        let (Some(cmp_name), Some(banner)) = (&site_cfg.cmp, &site_cfg.banner) else {
            return Err(SimError::NoBanner { site: site.to_owned() });
        };
        let cmp = self.cmps[cmp_name].clone();
        let record = self.build_record(&cmp, visitor, site, choice, banner)?;
        self.emit(visitor, site, EventKind::UserAction { action: choice.kind() });
        let stored = match (choice, cmp.behavior) {
            (UserChoice::RejectAll, CmpBehavior::IgnoreOptOut) => {
                Some(self.build_record(&cmp, visitor, site, &UserChoice::AcceptAll, banner)?)
            }
            (UserChoice::None, _) => None,
            _ => Some(record.clone()),
        };
        if let Some(s) = stored {
            self.store(visitor, site, &cmp, s)?;
        }
        Ok(record)
    }

    /// A reader asks for the visitor's consent signal while on `site`.
    ///
    /// Registered readers (registered CMPs through their delegated
    /// subdomain, vendors in the vendor list through
    /// [`VENDOR_ACCESS_HOST`]) see the site-local record of this site if
    /// one exists, otherwise the globally-scoped cookie. Unregistered
    /// readers see nothing.
    pub fn vendor_request(&mut self, reader: &Reader, visitor: &str, site: &str) -> Result<SignalRead, SimError> {
        self.check_ids(visitor, site)?;
        let host = match reader {
            Reader::Cmp(name) => {
                let cmp = self.cmps.get(name).ok_or_else(|| SimError::UnknownId { kind: "cmp", id: name.clone() })?;
                match &cmp.consensu_host {
                    Some(h) => Some(h.clone()),
                    None => return Ok(self.record_read(reader, visitor, site, Some(cmp.serving_host.clone()), None)),
                }
            }
            Reader::Vendor(id) => self.vendor_list.as_ref().filter(|l| l.contains(*id)).map(|_| VENDOR_ACCESS_HOST.to_owned()),
        };
        let Some(host) = host else {
            return Ok(self.record_read(reader, visitor, site, None, None));
        };
        let local = self.local_storage.get(&(visitor.to_owned(), site.to_owned())).cloned();
        let global = self.visitors[visitor]
            .jar
            .attached_to(&host)
            .find(|(_, name, _)| *name == CONSENT_COOKIE)
            .and_then(|(_, _, v)| codec::decode(v).ok());
        Ok(self.record_read(reader, visitor, site, Some(host), local.or(global)))
    }

    fn record_read(
        &mut self,
        reader: &Reader,
        visitor: &str,
        site: &str,
        domain: Option<String>,
        record: Option<ConsentRecord>,
    ) -> SignalRead {
        let read = SignalRead { reader: reader.clone(), domain, record };
        self.emit(
            visitor,
            site,
            EventKind::SignalRead { reader: read.reader.clone(), domain: read.domain.clone(), record: read.record.clone() },
        );
        read
    }
}
