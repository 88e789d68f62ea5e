use serde::{Deserialize, Serialize};

use crate::domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurposeCategory {
    StrictlyNecessary,
    Performance,
    Functionality,
    Targeting,
    /// Not in the database; needs manual sorting.
    Unknown,
}

impl PurposeCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            PurposeCategory::StrictlyNecessary => "strictly_necessary",
            PurposeCategory::Performance => "performance",
            PurposeCategory::Functionality => "functionality",
            PurposeCategory::Targeting => "targeting",
            PurposeCategory::Unknown => "unknown",
        }
    }
}

/// One database entry. `name_pattern` is an exact name or a prefix ending in `*`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryRule {
    pub name_pattern: String,
    #[serde(default)]
    pub domain_suffix: Option<String>,
    pub category: PurposeCategory,
}

impl CategoryRule {
    fn name_matches(&self, name: &str) -> bool {
        match self.name_pattern.strip_suffix('*') {
            Some(prefix) => name.starts_with(prefix),
            None => name == self.name_pattern,
        }
    }
}

/// Cookie-category database, a JSON list of [`CategoryRule`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryDb {
    pub rules: Vec<CategoryRule>,
}

const BUILTIN: &str = include_str!("../../data/cookie_categories.json");

impl CategoryDb {
    pub fn load(source: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(source)
    }

    /// A small database of well-known consent and analytics cookies.
    pub fn builtin() -> Self {
        Self::load(BUILTIN).expect("bundled category database parses")
    }
}

/// Rules naming a domain suffix take precedence over name-only rules;
/// within a tier the first matching rule wins.
pub fn categorize(name: &str, setter_domain: &str, db: &CategoryDb) -> PurposeCategory {
    let with_domain = db.rules.iter().find(|r| {
        r.domain_suffix.as_deref().is_some_and(|d| domain::is_subdomain_or_equal(setter_domain, d)) && r.name_matches(name)
    });
    with_domain
        .or_else(|| db.rules.iter().find(|r| r.domain_suffix.is_none() && r.name_matches(name)))
        .map_or(PurposeCategory::Unknown, |r| r.category)
}
