//! Versioned vendor registry, loaded from and saved to JSON.
//!
//! ```json
//! {"version": 3, "vendors": [
//!   {"id": 11, "name": "Quantcast", "purposes_consent": [1, 3], "purposes_li": [2], "special_features": []}
//! ]}
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{MAX_PURPOSE, MAX_SPECIAL_FEATURE};

/// Human-readable purpose names, indexed by `id - 1`.
pub const PURPOSE_NAMES: [&str; MAX_PURPOSE as usize] = [
    "Store and/or access information on a device",
    "Select basic ads",
    "Create a personalised ads profile",
    "Select personalised ads",
    "Create a personalised content profile",
    "Select personalised content",
    "Measure ad performance",
    "Measure content performance",
    "Apply market research to generate audience insights",
    "Develop and improve products",
    "Technically deliver ads or content",
    "Match and combine offline data sources",
    "Reserved purpose 13",
    "Reserved purpose 14",
    "Reserved purpose 15",
    "Reserved purpose 16",
    "Reserved purpose 17",
    "Reserved purpose 18",
    "Reserved purpose 19",
    "Reserved purpose 20",
    "Reserved purpose 21",
    "Reserved purpose 22",
    "Reserved purpose 23",
    "Reserved purpose 24",
];

/// Id of "Create a personalised ads profile".
pub const PURPOSE_PERSONALISED_ADS_PROFILE: u8 = 3;

pub fn purpose_name(id: u8) -> Option<&'static str> {
    PURPOSE_NAMES.get(usize::from(id).checked_sub(1)?).copied()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VendorListError {
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError { line: usize, column: usize, message: String },
    #[error("vendor {0} appears more than once")]
    DuplicateVendor(u16),
    #[error("`{field}` value {value} out of range{}", vendor.map(|v| format!(" for vendor {v}")).unwrap_or_default())]
    RangeViolation { vendor: Option<u16>, field: &'static str, value: i64 },
    #[error("vendor {vendor} declares purpose {purpose} under both consent and legitimate interest")]
    ConflictingLegalBasis { vendor: u16, purpose: u8 },
    #[error("unknown vendor {0}")]
    UnknownVendor(u16),
    #[error("old list version {old} is newer than new list version {new}")]
    VersionOrder { old: u32, new: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VendorEntry {
    pub id: u16,
    pub name: String,
    pub purposes_consent: BTreeSet<u8>,
    pub purposes_li: BTreeSet<u8>,
    pub special_features: BTreeSet<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VendorList {
    version: u32,
    vendors: BTreeMap<u16, VendorEntry>,
}

// Wide integer types so out-of-range numbers reach the range checks instead
// of failing inside serde.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawList {
    version: i64,
    vendors: Vec<RawVendor>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVendor {
    id: i64,
    #[serde(default)]
    name: String,
    #[serde(default)]
    purposes_consent: Vec<i64>,
    #[serde(default)]
    purposes_li: Vec<i64>,
    #[serde(default)]
    special_features: Vec<i64>,
}

fn id_set(values: &[i64], max: u8, vendor: u16, field: &'static str) -> Result<BTreeSet<u8>, VendorListError> {
    values
        .iter()
        .map(|&v| {
            if (1..=i64::from(max)).contains(&v) {
                Ok(v as u8)
            } else {
                Err(VendorListError::RangeViolation { vendor: Some(vendor), field, value: v })
            }
        })
        .collect()
}

impl VendorList {
    /// Builds a list from entries, enforcing every invariant.
    pub fn new(version: u32, entries: impl IntoIterator<Item = VendorEntry>) -> Result<Self, VendorListError> {
        if version == 0 {
            return Err(VendorListError::RangeViolation { vendor: None, field: "version", value: 0 });
        }
        let mut vendors = BTreeMap::new();
        for e in entries {
            if e.id == 0 {
                return Err(VendorListError::RangeViolation { vendor: None, field: "id", value: 0 });
            }
            let check = |set: &BTreeSet<u8>, max: u8, field| match set.iter().find(|&&p| p == 0 || p > max) {
                Some(&bad) => Err(VendorListError::RangeViolation { vendor: Some(e.id), field, value: bad.into() }),
                None => Ok(()),
            };
            check(&e.purposes_consent, MAX_PURPOSE, "purposes_consent")?;
            check(&e.purposes_li, MAX_PURPOSE, "purposes_li")?;
            check(&e.special_features, MAX_SPECIAL_FEATURE, "special_features")?;
            if let Some(&p) = e.purposes_consent.intersection(&e.purposes_li).next() {
                return Err(VendorListError::ConflictingLegalBasis { vendor: e.id, purpose: p });
            }
            let id = e.id;
            if vendors.insert(id, e).is_some() {
                return Err(VendorListError::DuplicateVendor(id));
            }
        }
        Ok(Self { version, vendors })
    }

    /// Parses a JSON registry document.
    pub fn load(source: &str) -> Result<Self, VendorListError> {
        let raw: RawList = serde_json::from_str(source).map_err(|e| VendorListError::ParseError {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let version = u32::try_from(raw.version)
            .ok()
            .filter(|&v| v >= 1)
            .ok_or(VendorListError::RangeViolation { vendor: None, field: "version", value: raw.version })?;
        let mut entries = Vec::with_capacity(raw.vendors.len());
        for v in raw.vendors {
            let id = u16::try_from(v.id)
                .ok()
                .filter(|&id| id >= 1)
                .ok_or(VendorListError::RangeViolation { vendor: None, field: "id", value: v.id })?;
            entries.push(VendorEntry {
                id,
                name: v.name,
                purposes_consent: id_set(&v.purposes_consent, MAX_PURPOSE, id, "purposes_consent")?,
                purposes_li: id_set(&v.purposes_li, MAX_PURPOSE, id, "purposes_li")?,
                special_features: id_set(&v.special_features, MAX_SPECIAL_FEATURE, id, "special_features")?,
            });
        }
        Self::new(version, entries)
    }

    /// Canonical JSON: sorted keys, ascending vendor ids, pretty-printed.
    pub fn save(&self) -> String {
        let doc = serde_json::json!({
            "version": self.version,
            "vendors": self.vendors.values().collect::<Vec<_>>(),
        });
        serde_json::to_string_pretty(&doc).expect("vendor list is always serializable")
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.vendors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vendors.is_empty()
    }

    pub fn get(&self, id: u16) -> Option<&VendorEntry> {
        self.vendors.get(&id)
    }

    pub fn contains(&self, id: u16) -> bool {
        self.vendors.contains_key(&id)
    }

    pub fn max_id(&self) -> Option<u16> {
        self.vendors.keys().next_back().copied()
    }

    /// Entries in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &VendorEntry> {
        self.vendors.values()
    }

    /// `(purposes_consent, purposes_li)` declared by a vendor.
    pub fn declared_purposes(&self, id: u16) -> Result<(&BTreeSet<u8>, &BTreeSet<u8>), VendorListError> {
        self.get(id).map(|e| (&e.purposes_consent, &e.purposes_li)).ok_or(VendorListError::UnknownVendor(id))
    }
}

impl Serialize for VendorList {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serde_json::json!({
            "version": self.version,
            "vendors": self.vendors.values().collect::<Vec<_>>(),
        })
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VendorList {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        VendorList::load(&v.to_string()).map_err(serde::de::Error::custom)
    }
}

/// Vendor ids that differ between two list versions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VendorListDiff {
    pub added: BTreeSet<u16>,
    pub removed: BTreeSet<u16>,
    pub changed: BTreeSet<u16>,
}

impl VendorListDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }
}

pub fn diff(old: &VendorList, new: &VendorList) -> Result<VendorListDiff, VendorListError> {
    if old.version > new.version {
        return Err(VendorListError::VersionOrder { old: old.version, new: new.version });
    }
    let mut out = VendorListDiff::default();
    for (id, entry) in &old.vendors {
        match new.vendors.get(id) {
            None => {
                out.removed.insert(*id);
            }
            Some(n) if n != entry => {
                out.changed.insert(*id);
            }
            Some(_) => {}
        }
    }
    out.added.extend(new.vendors.keys().filter(|id| !old.vendors.contains_key(id)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"{"version": 1, "vendors": [
        {"id": 1, "name": "One", "purposes_consent": [1]},
        {"id": 2, "name": "Two", "purposes_consent": [1, 2], "purposes_li": [7]},
        {"id": 11, "name": "Quantcast", "purposes_consent": [1, 3, 4], "purposes_li": [2, 7, 10], "special_features": [1]}
    ]}"#;

    #[test]
    fn minimal_document() {
        let l = VendorList::load(r#"{"version":1,"vendors":[{"id":1,"purposes_consent":[1]}]}"#).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l.declared_purposes(1).unwrap(), (&BTreeSet::from([1]), &BTreeSet::new()));
    }

    #[test]
    fn quantcast_declares_ads_profile() {
        let l = VendorList::load(TOY).unwrap();
        let (consent, _) = l.declared_purposes(11).unwrap();
        assert!(consent.contains(&PURPOSE_PERSONALISED_ADS_PROFILE));
        assert_eq!(purpose_name(PURPOSE_PERSONALISED_ADS_PROFILE), Some("Create a personalised ads profile"));
        assert_eq!(purpose_name(11), Some("Technically deliver ads or content"));
        assert_eq!(purpose_name(12), Some("Match and combine offline data sources"));
        assert_eq!(purpose_name(0), None);
        assert_eq!(purpose_name(25), None);
    }

    #[test]
    fn unknown_vendor_lookup() {
        let l = VendorList::load(TOY).unwrap();
        assert_eq!(l.declared_purposes(99), Err(VendorListError::UnknownVendor(99)));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let doc = r#"{"version":1,"vendors":[{"id":7},{"id":7}]}"#;
        assert_eq!(VendorList::load(doc), Err(VendorListError::DuplicateVendor(7)));
    }

    #[test]
    fn range_errors() {
        let doc = r#"{"version":1,"vendors":[{"id":0}]}"#;
        assert!(matches!(VendorList::load(doc), Err(VendorListError::RangeViolation { field: "id", .. })));
        let doc = r#"{"version":1,"vendors":[{"id":70000}]}"#;
        assert!(matches!(VendorList::load(doc), Err(VendorListError::RangeViolation { field: "id", value: 70000, .. })));
        let doc = r#"{"version":0,"vendors":[]}"#;
        assert!(matches!(VendorList::load(doc), Err(VendorListError::RangeViolation { field: "version", .. })));
        let doc = r#"{"version":1,"vendors":[{"id":3,"purposes_consent":[25]}]}"#;
        assert!(matches!(
            VendorList::load(doc),
            Err(VendorListError::RangeViolation { vendor: Some(3), field: "purposes_consent", value: 25 })
        ));
        let doc = r#"{"version":1,"vendors":[{"id":3,"special_features":[13]}]}"#;
        assert!(matches!(VendorList::load(doc), Err(VendorListError::RangeViolation { field: "special_features", .. })));
    }

    #[test]
    fn overlapping_legal_bases_rejected() {
        let doc = r#"{"version":1,"vendors":[{"id":3,"purposes_consent":[2],"purposes_li":[2]}]}"#;
        assert_eq!(VendorList::load(doc), Err(VendorListError::ConflictingLegalBasis { vendor: 3, purpose: 2 }));
    }

    #[test]
    fn parse_error_has_location() {
        match VendorList::load("{\n  \"version\": 1,\n  \"vendors\": [ }") {
            Err(VendorListError::ParseError { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn save_is_canonical_and_reloads() {
        let shuffled = r#"{"vendors": [{"purposes_consent":[1],"id": 9,"name":"B"}, {"id": 2, "name":"A"}], "version": 4}"#;
        let l = VendorList::load(shuffled).unwrap();
        let saved = l.save();
        assert!(saved.find("\"id\": 2").unwrap() < saved.find("\"id\": 9").unwrap());
        assert_eq!(VendorList::load(&saved).unwrap(), l);
        assert_eq!(VendorList::load(&saved).unwrap().save(), saved);
    }

    #[test]
    fn diff_identity_and_addition() {
        let l1 = VendorList::load(TOY).unwrap();
        assert!(diff(&l1, &l1).unwrap().is_empty());
        let mut entries: Vec<_> = l1.iter().cloned().collect();
        entries.push(VendorEntry {
            id: 5,
            name: "Five".into(),
            purposes_consent: BTreeSet::new(),
            purposes_li: BTreeSet::new(),
            special_features: BTreeSet::new(),
        });
        let l2 = VendorList::new(2, entries).unwrap();
        let d = diff(&l1, &l2).unwrap();
        assert_eq!(d.added, BTreeSet::from([5]));
        assert!(d.removed.is_empty() && d.changed.is_empty());
    }

    #[test]
    fn diff_rejects_version_regression() {
        let l1 = VendorList::new(3, []).unwrap();
        let l2 = VendorList::new(2, []).unwrap();
        assert_eq!(diff(&l1, &l2), Err(VendorListError::VersionOrder { old: 3, new: 2 }));
    }
}
