use std::collections::BTreeSet;
use std::fmt;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// The only format version this codec reads and writes.
pub const FORMAT_VERSION: u8 = 2;
/// Highest special-feature id.
pub const MAX_SPECIAL_FEATURE: u8 = 12;
/// Highest purpose id.
pub const MAX_PURPOSE: u8 = 24;

/// A point in time in deciseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Deciseconds(pub u64);

impl Deciseconds {
    /// Truncates sub-decisecond precision.
    pub fn from_millis(millis: u64) -> Self {
        Self(millis / 100)
    }

    pub fn from_system_time(t: SystemTime) -> Self {
        let ms = t.duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        Self::from_millis(u64::try_from(ms).unwrap_or(u64::MAX))
    }

    pub fn now() -> Self {
        Self::from_system_time(SystemTime::now())
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

/// Two-letter consent language code, e.g. `EN`.
///
/// Any two bytes are representable so that lower-case or non-letter input
/// can be carried to [`ConsentRecord::check`] and rejected there with a
/// field-level error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Language([u8; 2]);

impl Language {
    pub const EN: Language = Language(*b"EN");

    /// Builds a language from exactly two bytes of text.
    pub fn new(code: &str) -> Option<Self> {
        let b = code.as_bytes();
        (b.len() == 2).then(|| Self([b[0], b[1]]))
    }

    pub(crate) fn from_letter_indices(a: u8, b: u8) -> Self {
        Self([b'A' + a, b'A' + b])
    }

    /// True when both bytes are upper-case ASCII letters.
    pub fn is_valid(&self) -> bool {
        self.0.iter().all(u8::is_ascii_uppercase)
    }

    /// Letter indices with `A = 0`. Only meaningful for valid codes.
    pub(crate) fn letter_indices(&self) -> [u8; 2] {
        [self.0[0] - b'A', self.0[1] - b'A']
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).unwrap_or("??")
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Language {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Language {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Language::new(&s).ok_or_else(|| serde::de::Error::custom("language code must be two bytes"))
    }
}

/// A decoded consent signal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsentRecord {
    pub version: u8,
    pub created: Deciseconds,
    pub last_updated: Deciseconds,
    pub cmp_id: u16,
    pub cmp_version: u16,
    pub consent_screen: u8,
    pub consent_language: Language,
    pub vendor_list_version: u16,
    pub policy_version: u8,
    /// `true` when the signal is confined to one site, `false` when it is
    /// globally scoped and shared across sites.
    pub service_specific: bool,
    #[serde(default)]
    pub special_feature_optins: BTreeSet<u8>,
    #[serde(default)]
    pub purposes_consent: BTreeSet<u8>,
    #[serde(default)]
    pub purposes_li: BTreeSet<u8>,
    #[serde(default)]
    pub vendors_consent: BTreeSet<u16>,
    #[serde(default)]
    pub vendors_li: BTreeSet<u16>,
    /// Segments following the core segment, kept verbatim.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub opaque_segments: Vec<String>,
}

/// Set sizes of a record, the figures most reports care about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalCounts {
    pub special_features: usize,
    pub purposes_consent: usize,
    pub purposes_li: usize,
    pub vendors_consent: usize,
    pub vendors_li: usize,
}

impl fmt::Display for SignalCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}/{}",
            self.special_features, self.purposes_consent, self.purposes_li, self.vendors_consent, self.vendors_li
        )
    }
}

impl ConsentRecord {
    /// A version-2 record with every set empty, created and updated at `at`.
    pub fn empty(at: Deciseconds) -> Self {
        Self {
            version: FORMAT_VERSION,
            created: at,
            last_updated: at,
            cmp_id: 0,
            cmp_version: 0,
            consent_screen: 0,
            consent_language: Language::EN,
            vendor_list_version: 0,
            policy_version: 0,
            service_specific: false,
            special_feature_optins: BTreeSet::new(),
            purposes_consent: BTreeSet::new(),
            purposes_li: BTreeSet::new(),
            vendors_consent: BTreeSet::new(),
            vendors_li: BTreeSet::new(),
            opaque_segments: Vec::new(),
        }
    }

    pub fn counts(&self) -> SignalCounts {
        SignalCounts {
            special_features: self.special_feature_optins.len(),
            purposes_consent: self.purposes_consent.len(),
            purposes_li: self.purposes_li.len(),
            vendors_consent: self.vendors_consent.len(),
            vendors_li: self.vendors_li.len(),
        }
    }

    /// True when any consent-based set (special features, purposes or
    /// vendors under consent) is non-empty. Legitimate-interest sets are
    /// not consent and do not count.
    pub fn is_positive(&self) -> bool {
        !(self.special_feature_optins.is_empty() && self.purposes_consent.is_empty() && self.vendors_consent.is_empty())
    }

    /// True when the signal carries unknown trailing segments.
    pub fn has_unknown_segments(&self) -> bool {
        !self.opaque_segments.is_empty()
    }

    /// Checks every field against its range and returns the first offending
    /// field name.
    pub fn check(&self) -> Result<(), &'static str> {
        use super::layout as w;
        fn fits(v: u64, width: u32) -> bool {
            v >> width == 0
        }
        if self.version != FORMAT_VERSION {
            return Err("version");
        }
        if !fits(self.created.0, w::CREATED) {
            return Err("created");
        }
        if !fits(self.last_updated.0, w::LAST_UPDATED) || self.created > self.last_updated {
            return Err("last_updated");
        }
        if !fits(self.cmp_id.into(), w::CMP_ID) {
            return Err("cmp_id");
        }
        if !fits(self.cmp_version.into(), w::CMP_VERSION) {
            return Err("cmp_version");
        }
        if !fits(self.consent_screen.into(), w::CONSENT_SCREEN) {
            return Err("consent_screen");
        }
        if !self.consent_language.is_valid() {
            return Err("consent_language");
        }
        if !fits(self.vendor_list_version.into(), w::VENDOR_LIST_VERSION) {
            return Err("vendor_list_version");
        }
        if !fits(self.policy_version.into(), w::POLICY_VERSION) {
            return Err("policy_version");
        }
        let in_range = |set: &BTreeSet<u8>, max: u8| set.iter().all(|&id| (1..=max).contains(&id));
        if !in_range(&self.special_feature_optins, MAX_SPECIAL_FEATURE) {
            return Err("special_feature_optins");
        }
        if !in_range(&self.purposes_consent, MAX_PURPOSE) {
            return Err("purposes_consent");
        }
        if !in_range(&self.purposes_li, MAX_PURPOSE) {
            return Err("purposes_li");
        }
        if self.vendors_consent.contains(&0) {
            return Err("vendors_consent");
        }
        if self.vendors_li.contains(&0) {
            return Err("vendors_li");
        }
        if !self.opaque_segments.iter().all(|s| super::is_base64url_segment(s)) {
            return Err("opaque_segments");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn millis_are_truncated_to_deciseconds() {
        assert_eq!(Deciseconds::from_millis(1_234), Deciseconds(12));
        assert_eq!(Deciseconds::from_millis(99), Deciseconds(0));
    }

    #[test]
    fn lowercase_language_fails_check() {
        let mut r = ConsentRecord::empty(Deciseconds(1));
        r.consent_language = Language::new("en").unwrap();
        assert_eq!(r.check(), Err("consent_language"));
    }

    #[test]
    fn out_of_range_purpose_fails_check() {
        let mut r = ConsentRecord::empty(Deciseconds(1));
        r.purposes_consent.insert(25);
        assert_eq!(r.check(), Err("purposes_consent"));
        r.purposes_consent = [0].into();
        assert_eq!(r.check(), Err("purposes_consent"));
    }

    #[test]
    fn created_after_update_fails_check() {
        let mut r = ConsentRecord::empty(Deciseconds(10));
        r.created = Deciseconds(11);
        assert_eq!(r.check(), Err("last_updated"));
    }

    #[test]
    fn positive_ignores_legitimate_interest() {
        let mut r = ConsentRecord::empty(Deciseconds(1));
        r.purposes_li.insert(2);
        r.vendors_li.insert(5);
        assert!(!r.is_positive());
        r.vendors_consent.insert(5);
        assert!(r.is_positive());
    }
}
