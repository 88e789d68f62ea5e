use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow_sim::Party;

/// Minimum cohort for a verdict: this many visitors, each seen this many times.
pub const MIN_VISITORS: usize = 2;
pub const MIN_VISITS: usize = 2;

/// Values one cookie took across visitors and visits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CookieObservation {
    pub name: String,
    pub set_on_domain: String,
    pub party: Party,
    pub setter_domain: String,
    /// Visitor id to the values observed on successive visits.
    pub samples: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObservationError {
    #[error("observation has no visitors")]
    NoVisitors,
    #[error("visitor `{0}` has no samples")]
    EmptySamples(String),
}

impl CookieObservation {
    pub fn check(&self) -> Result<(), ObservationError> {
        if self.samples.is_empty() {
            return Err(ObservationError::NoVisitors);
        }
        match self.samples.iter().find(|(_, v)| v.is_empty()) {
            Some((id, _)) => Err(ObservationError::EmptySamples(id.clone())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingClass {
    CrossSiteTracking,
    SiteTracking,
    NonTracking,
    /// Too few visitors or visits to tell identifiers from nonces.
    Indeterminate,
}

impl TrackingClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackingClass::CrossSiteTracking => "cross_site_tracking",
            TrackingClass::SiteTracking => "site_tracking",
            TrackingClass::NonTracking => "non_tracking",
            TrackingClass::Indeterminate => "indeterminate",
        }
    }

    pub fn is_tracking(&self) -> bool {
        matches!(self, TrackingClass::CrossSiteTracking | TrackingClass::SiteTracking)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CookieVerdict {
    /// `None` when indeterminate.
    pub user_specific: Option<bool>,
    pub tracking_class: TrackingClass,
}

impl CookieVerdict {
    pub const INDETERMINATE: CookieVerdict = CookieVerdict { user_specific: None, tracking_class: TrackingClass::Indeterminate };
}

/// A cookie is user-specific when its value never changes for a visitor and
/// no two visitors share a value. User-specific third-party cookies track
/// across sites, first-party ones within the site.
pub fn classify_cookie(obs: &CookieObservation) -> CookieVerdict {
    if obs.check().is_err()
        || obs.samples.len() < MIN_VISITORS
        || obs.samples.values().any(|v| v.len() < MIN_VISITS)
    {
        return CookieVerdict::INDETERMINATE;
    }
    let stable = obs.samples.values().all(|v| v.iter().all(|x| *x == v[0]));
    let distinct = obs.samples.values().map(|v| &v[0]).collect::<BTreeSet<_>>().len() == obs.samples.len();
    let user_specific = stable && distinct;
    let tracking_class = match (user_specific, obs.party) {
        (true, Party::Third) => TrackingClass::CrossSiteTracking,
        (true, Party::First) => TrackingClass::SiteTracking,
        (false, _) => TrackingClass::NonTracking,
    };
    CookieVerdict { user_specific: Some(user_specific), tracking_class }
}
