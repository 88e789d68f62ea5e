//! Cookie classification: user-specific identifier detection and purpose
//! categories, plus a site scanner that drives the simulator.

mod category;
mod classify;

pub use category::{categorize, CategoryDb, CategoryRule, PurposeCategory};
pub use classify::{classify_cookie, CookieObservation, CookieVerdict, ObservationError, TrackingClass, MIN_VISITORS, MIN_VISITS};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::flow_sim::{build_world, EventKind, Party, SimError, WorldConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScanError {
    #[error("a scan needs at least {MIN_VISITORS} visitors, got {0}")]
    TooFewVisitors(usize),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanRow {
    pub name: String,
    pub domain: String,
    pub party: Party,
    pub setter: String,
    pub visitors: usize,
    pub visits: usize,
    pub distinct_values: usize,
    pub user_specific: Option<bool>,
    pub tracking_class: TrackingClass,
    pub category: PurposeCategory,
    pub needs_manual: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanReport {
    pub site: String,
    pub seed: u64,
    pub visitors: Vec<String>,
    /// One row per distinct `(domain, name)`, sorted by domain then name.
    pub rows: Vec<ScanRow>,
}

impl ScanReport {
    /// Rows classified as site or cross-site tracking.
    pub fn tracker_count(&self) -> usize {
        self.rows.iter().filter(|r| r.tracking_class.is_tracking()).count()
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let header = ["NAME", "DOMAIN", "PARTY", "SETTER", "USER_SPECIFIC", "CLASS", "CATEGORY", "MANUAL"];
        let rows: Vec<[String; 8]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.name.clone(),
                    r.domain.clone(),
                    match r.party {
                        Party::First => "first".into(),
                        Party::Third => "third".into(),
                    },
                    r.setter.clone(),
                    r.user_specific.map_or("?".into(), |b| b.to_string()),
                    r.tracking_class.as_str().into(),
                    r.category.as_str().into(),
                    if r.needs_manual { "yes".into() } else { "no".into() },
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: &[&str]| {
            let parts: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&header);
        for row in &rows {
            line(&row.each_ref().map(String::as_str));
        }
        out
    }
}

/// Visits `site` twice with each visitor on a fresh world, gathers every
/// cookie set, then classifies and categorizes each one.
pub fn scan_site(
    config: &WorldConfig,
    seed: u64,
    site: &str,
    visitors: &[String],
    db: &CategoryDb,
) -> Result<ScanReport, ScanError> {
    if visitors.len() < MIN_VISITORS {
        return Err(ScanError::TooFewVisitors(visitors.len()));
    }
    let mut world = build_world(config, seed)?;
    let mut seen: BTreeMap<(String, String), CookieObservation> = BTreeMap::new();
    for _round in 0..MIN_VISITS {
        for v in visitors {
            for e in world.visit(v, site)?.events {
                if let EventKind::CookieSet { domain, name, value, party, setter } = e.kind {
                    seen.entry((domain.clone(), name.clone()))
                        .or_insert_with(|| CookieObservation {
                            name,
                            set_on_domain: domain,
                            party,
                            setter_domain: setter,
                            samples: BTreeMap::new(),
                        })
                        .samples
                        .entry(v.clone())
                        .or_default()
                        .push(value);
                }
            }
        }
    }
    let rows = seen
        .into_values()
        .map(|obs| {
            let verdict = classify_cookie(&obs);
            let category = categorize(&obs.name, &obs.setter_domain, db);
            let distinct_values = obs.samples.values().flatten().collect::<std::collections::BTreeSet<_>>().len();
            ScanRow {
                visitors: obs.samples.len(),
                visits: obs.samples.values().map(Vec::len).sum(),
                distinct_values,
                user_specific: verdict.user_specific,
                tracking_class: verdict.tracking_class,
                needs_manual: category == PurposeCategory::Unknown,
                category,
                name: obs.name,
                domain: obs.set_on_domain,
                party: obs.party,
                setter: obs.setter_domain,
            }
        })
        .collect();
    Ok(ScanReport { site: site.to_owned(), seed, visitors: visitors.to_vec(), rows })
}
