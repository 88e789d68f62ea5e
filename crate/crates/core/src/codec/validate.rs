use serde::Serialize;

use super::ConsentRecord;
use crate::vendor_list::VendorList;

/// Inconsistency between a consent record and a vendor registry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A vendor id in the record is not registered.
    UnknownVendor { vendor: u16 },
    /// A purpose consented for a vendor that declared it under neither
    /// legal basis.
    UndeclaredPurpose { vendor: u16, purpose: u8 },
}

/// Cross-checks a record against a registry. Violations come out ordered by
/// vendor id; an empty result means the two are consistent.
pub fn validate(record: &ConsentRecord, list: &VendorList) -> Vec<Violation> {
    let mut out = Vec::new();
    let ids: std::collections::BTreeSet<u16> = record.vendors_consent.union(&record.vendors_li).copied().collect();
    for id in ids {
        let Some(entry) = list.get(id) else {
            out.push(Violation::UnknownVendor { vendor: id });
            continue;
        };
        if !record.vendors_consent.contains(&id) {
            continue;
        }
        for &p in &record.purposes_consent {
            if !entry.purposes_consent.contains(&p) && !entry.purposes_li.contains(&p) {
                out.push(Violation::UndeclaredPurpose { vendor: id, purpose: p });
            }
        }
    }
    out
}
