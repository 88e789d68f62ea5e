use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Finding, RuleId};
use crate::codec::ConsentRecord;

/// Fraction in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Threshold(f64);

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("threshold {0} is outside (0, 1]")]
pub struct ThresholdError(pub f64);

impl Threshold {
    pub const DEFAULT: Threshold = Threshold(0.5);

    pub fn new(v: f64) -> Result<Self, ThresholdError> {
        if v > 0.0 && v <= 1.0 {
            Ok(Self(v))
        } else {
            Err(ThresholdError(v))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<f64> for Threshold {
    type Error = ThresholdError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<Threshold> for f64 {
    fn from(t: Threshold) -> f64 {
        t.0
    }
}

/// Flags records that pre-authorise many vendors absent from the site:
/// `|consented \ present| / max(1, |consented|) > threshold`.
pub fn audit_vendor_breadth(record: &ConsentRecord, present: &BTreeSet<u16>, threshold: Threshold) -> Vec<Finding> {
    let consented = record.vendors_consent.len();
    let absent = record.vendors_consent.difference(present).count();
    let ratio = absent as f64 / consented.max(1) as f64;
    if ratio <= threshold.get() {
        return Vec::new();
    }
    vec![Finding::new(
        RuleId::PreRegistration,
        format!(
            "{absent} of {consented} consented vendors are not present on the site ({:.1}% > {:.1}%)",
            ratio * 100.0,
            threshold.get() * 100.0
        ),
        vec![format!("vendors_consent={consented}"), format!("present={}", present.len()), format!("absent={absent}")],
    )]
}
