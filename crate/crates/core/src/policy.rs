//! Policy files: the declarative form of an anonymization run.
//!
//! JSON is the reference encoding:
//!
//! ```json
//! {
//!   "attributes": [
//!     {"name": "StudentNo", "category": "pii"},
//!     {"name": "BirthDate", "category": "quasi", "hierarchy": "birthdate", "level": 1},
//!     {"name": "Hall", "category": "non_sensitive"}
//!   ],
//!   "hierarchies": {
//!     "birthdate": {"kind": "level_table", "file": "birthdate_dgh.csv", "rooted": true}
//!   },
//!   "params": {"k": 2, "mode": "frequency", "budget": 1.0, "suppressed_marker": ""},
//!   "retain": [],
//!   "directives": [{"kind": "cell_value", "attribute": "Hall", "value": "COMPLEX"}]
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::anonymizer::{SuppressionBudget, SuppressionDirective};
use crate::csvio::{CsvOptions, DEFAULT_MARKER};
use crate::error::{Error, Result};
use crate::hierarchy::HierarchySpec;
use crate::metrics::{CheckMode, PrivacyParams};
use crate::model::{AttributeCategory, RetainList};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttribute {
    name: String,
    category: AttributeCategory,
    #[serde(default)]
    hierarchy: Option<String>,
    #[serde(default)]
    level: Option<usize>,
}

fn default_k() -> usize {
    2
}

fn default_budget() -> f64 {
    1.0
}

fn default_marker() -> String {
    DEFAULT_MARKER.to_owned()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default)]
    l: Option<usize>,
    #[serde(default)]
    mode: CheckMode,
    #[serde(default)]
    linkage_attrs: Vec<String>,
    #[serde(default = "default_budget")]
    budget: f64,
    #[serde(default = "default_marker")]
    suppressed_marker: String,
}

impl Default for RawParams {
    fn default() -> Self {
        Self {
            k: default_k(),
            l: None,
            mode: CheckMode::default(),
            linkage_attrs: Vec::new(),
            budget: default_budget(),
            suppressed_marker: default_marker(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    attributes: Vec<RawAttribute>,
    #[serde(default)]
    hierarchies: BTreeMap<String, HierarchySpec>,
    #[serde(default)]
    params: RawParams,
    #[serde(default)]
    retain: Vec<String>,
    #[serde(default)]
    directives: Vec<SuppressionDirective>,
}

/// A validated policy with every cross-reference resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile {
    /// Declared attributes in file order.
    pub attribute_order: Vec<String>,
    pub assignments: BTreeMap<String, AttributeCategory>,
    /// Named hierarchy specs as declared.
    pub named_hierarchies: BTreeMap<String, HierarchySpec>,
    /// Attribute -> spec of the hierarchy it references.
    pub hierarchies: BTreeMap<String, HierarchySpec>,
    /// Attribute -> generalization level applied before enforcement.
    pub base_levels: BTreeMap<String, usize>,
    pub params: PrivacyParams,
    pub budget: SuppressionBudget,
    pub suppressed_marker: String,
    pub retain: RetainList,
    pub directives: Vec<SuppressionDirective>,
}

impl PolicyFile {
    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions::with_marker(self.suppressed_marker.clone())
    }
}

fn parse_error(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        location: location.into(),
        message: message.into(),
    }
}

/// Parses policy JSON. Relative hierarchy file paths are resolved against
/// `base_dir`.
pub fn parse_policy_str(text: &str, base_dir: &Path) -> Result<PolicyFile> {
    let raw: RawPolicy = serde_json::from_str(text)
        .map_err(|e| parse_error(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;

    let mut attribute_order = Vec::new();
    let mut assignments = BTreeMap::new();
    let mut hierarchies = BTreeMap::new();
    let mut base_levels = BTreeMap::new();
    for (i, attr) in raw.attributes.iter().enumerate() {
        let location = format!("attributes[{i}]");
        if attr.name.is_empty() {
            return Err(parse_error(location, "attribute name is empty"));
        }
        if let Some(previous) = assignments.insert(attr.name.clone(), attr.category) {
            return Err(parse_error(
                location,
                format!("`{}` is already classified as {previous}", attr.name),
            ));
        }
        attribute_order.push(attr.name.clone());
        match (&attr.hierarchy, attr.level) {
            (Some(name), level) => {
                let mut spec = raw
                    .hierarchies
                    .get(name)
                    .cloned()
                    .ok_or_else(|| Error::UnknownHierarchyRef(name.clone()))?;
                spec.resolve_paths(base_dir);
                hierarchies.insert(attr.name.clone(), spec);
                if let Some(level) = level {
                    base_levels.insert(attr.name.clone(), level);
                }
            }
            (None, Some(_)) => {
                return Err(parse_error(
                    location,
                    format!("`{}` sets a level without a hierarchy", attr.name),
                ))
            }
            (None, None) => {}
        }
    }

    let named_hierarchies = raw
        .hierarchies
        .into_iter()
        .map(|(name, mut spec)| {
            spec.resolve_paths(base_dir);
            (name, spec)
        })
        .collect();

    let params = PrivacyParams {
        k: raw.params.k,
        l: raw.params.l,
        mode: raw.params.mode,
        linkage_attrs: raw.params.linkage_attrs,
    };
    params.validate()?;
    for a in &params.linkage_attrs {
        if !assignments.contains_key(a) {
            return Err(parse_error(
                "params.linkage_attrs",
                format!("`{a}` is not a declared attribute"),
            ));
        }
    }
    let budget = SuppressionBudget::new(raw.params.budget)?;

    let mut seen = BTreeSet::new();
    for a in &raw.retain {
        if assignments.get(a) != Some(&AttributeCategory::Pii) {
            return Err(Error::RetainNotPii(a.clone()));
        }
        if !seen.insert(a) {
            return Err(parse_error("retain", format!("`{a}` listed twice")));
        }
    }

    for (i, d) in raw.directives.iter().enumerate() {
        let attr = match d {
            SuppressionDirective::CellValue { attribute, .. }
            | SuppressionDirective::CellAt { attribute, .. } => Some(attribute),
            SuppressionDirective::Record { .. } => None,
        };
        if let Some(a) = attr.filter(|a| !assignments.contains_key(*a)) {
            return Err(parse_error(
                format!("directives[{i}]"),
                format!("unknown attribute `{a}`"),
            ));
        }
    }

    Ok(PolicyFile {
        attribute_order,
        assignments,
        named_hierarchies,
        hierarchies,
        base_levels,
        params,
        budget,
        suppressed_marker: raw.params.suppressed_marker,
        retain: RetainList::new(raw.retain),
        directives: raw.directives,
    })
}

pub fn parse_policy_file(path: &Path) -> Result<PolicyFile> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_policy_str(&text, base)
}
