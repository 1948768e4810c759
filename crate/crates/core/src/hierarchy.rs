//! Domain generalization hierarchies.
//!
//! A hierarchy of height `h` is a chain of value domains `D0 -> D1 -> ... -> Dh`
//! where each step is a total function from one level to the next. Level 0
//! holds the ground values found in the data. The suppression sentinel sits
//! above every hierarchy as an implicit universal root: it generalizes to
//! itself at every level.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Cell, Dataset};

/// Hierarchies keyed by the attribute they apply to.
pub type Hierarchies = BTreeMap<String, GeneralizationHierarchy>;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Step {
    parents: BTreeMap<String, BTreeSet<String>>,
    catch_all: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralizationHierarchy {
    attribute: String,
    domains: Vec<BTreeSet<String>>,
    // steps[i] maps domains[i] onto domains[i + 1]
    steps: Vec<Step>,
    rooted: bool,
}

impl GeneralizationHierarchy {
    /// Builds a hierarchy from explicit level domains and child/parent edges.
    /// `edges[i]` maps level `i` to level `i + 1`. Nothing is validated here;
    /// see [`validate_hierarchy`].
    pub fn from_levels(
        attribute: impl Into<String>,
        domains: Vec<Vec<String>>,
        edges: Vec<Vec<(String, String)>>,
        rooted: bool,
    ) -> Result<Self> {
        if domains.is_empty() {
            return Err(Error::MalformedSpec("hierarchy needs a ground level".into()));
        }
        if edges.len() + 1 != domains.len() {
            return Err(Error::MalformedSpec(format!(
                "{} levels need {} edge sets, got {}",
                domains.len(),
                domains.len() - 1,
                edges.len()
            )));
        }
        let steps = edges
            .into_iter()
            .map(|level| {
                let mut parents: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
                for (child, parent) in level {
                    parents.entry(child).or_default().insert(parent);
                }
                Step {
                    parents,
                    catch_all: None,
                }
            })
            .collect();
        Ok(Self {
            attribute: attribute.into(),
            domains: domains.into_iter().map(|d| d.into_iter().collect()).collect(),
            steps,
            rooted,
        })
    }

    /// Builds a hierarchy from full ancestor chains, one per ground value
    /// (`chain[0]` is the ground value, `chain[h]` its top ancestor).
    /// `catch_all` maps a level `1..=h` to the default parent for values of
    /// the level below that have no explicit entry.
    pub fn from_chains(
        attribute: impl Into<String>,
        chains: &[Vec<String>],
        catch_all: &BTreeMap<usize, String>,
        rooted: bool,
    ) -> Result<Self> {
        let width = match chains.first() {
            Some(c) => c.len(),
            None => catch_all.keys().max().map_or(1, |m| m + 1),
        };
        if width == 0 {
            return Err(Error::MalformedSpec("empty ancestor chain".into()));
        }
        if let Some(i) = chains.iter().position(|c| c.len() != width) {
            return Err(Error::MalformedSpec(format!(
                "chain {i} has {} levels, expected {width}",
                chains[i].len()
            )));
        }
        let height = width - 1;
        if let Some(&bad) = catch_all.keys().find(|&&l| l == 0 || l > height) {
            return Err(Error::MalformedSpec(format!(
                "catch-all declared for level {bad} outside 1..={height}"
            )));
        }
        let mut domains = vec![BTreeSet::new(); width];
        let mut steps: Vec<Step> = (1..=height)
            .map(|l| Step {
                parents: BTreeMap::new(),
                catch_all: catch_all.get(&l).cloned(),
            })
            .collect();
        for chain in chains {
            for (level, value) in chain.iter().enumerate() {
                domains[level].insert(value.clone());
                if level < height {
                    steps[level]
                        .parents
                        .entry(value.clone())
                        .or_default()
                        .insert(chain[level + 1].clone());
                }
            }
        }
        for (i, step) in steps.iter().enumerate() {
            if let Some(c) = &step.catch_all {
                domains[i + 1].insert(c.clone());
            }
        }
        // A catch-all value itself needs a parent one level up.
        for i in 0..height.saturating_sub(1) {
            if let Some(c) = steps[i].catch_all.clone() {
                if !steps[i + 1].parents.contains_key(&c) && steps[i + 1].catch_all.is_none() {
                    return Err(Error::MalformedSpec(format!(
                        "catch-all `{c}` at level {} has no parent at level {}",
                        i + 1,
                        i + 2
                    )));
                }
            }
        }
        Ok(Self {
            attribute: attribute.into(),
            domains,
            steps,
            rooted,
        })
    }

    /// Synthesizes `date -> year -> decade* -> *` from the observed dates.
    pub fn date_pattern<'a>(
        attribute: impl Into<String>,
        pattern: &DatePattern,
        observed: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let mut chains = Vec::new();
        for value in observed {
            let year = pattern
                .year_of(value)
                .ok_or_else(|| Error::UncoveredGroundValue(value.to_owned()))?;
            let decade = format!("{}*", &year[..3]);
            chains.push(vec![value.to_owned(), year, decade, "*".to_owned()]);
        }
        let mut h = Self::from_chains(attribute, &chains, &BTreeMap::new(), true)?;
        if chains.is_empty() {
            // keep the declared height even with no data
            h.domains = vec![
                BTreeSet::new(),
                BTreeSet::new(),
                BTreeSet::new(),
                ["*".to_owned()].into(),
            ];
            h.steps = (0..3)
                .map(|_| Step {
                    parents: BTreeMap::new(),
                    catch_all: None,
                })
                .collect();
        }
        Ok(h)
    }

    pub fn attribute(&self) -> &str {
        &self.attribute
    }

    pub fn height(&self) -> usize {
        self.steps.len()
    }

    pub fn is_rooted(&self) -> bool {
        self.rooted
    }

    pub fn domain(&self, level: usize) -> Option<&BTreeSet<String>> {
        self.domains.get(level)
    }

    /// Same hierarchy bound to a different attribute name.
    pub fn rebind(&self, attribute: impl Into<String>) -> Self {
        Self {
            attribute: attribute.into(),
            ..self.clone()
        }
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level > self.height() {
            return Err(Error::LevelOutOfRange {
                level,
                height: self.height(),
            });
        }
        Ok(())
    }

    fn parent_of(&self, level: usize, value: &str) -> Option<&str> {
        let step = &self.steps[level];
        match step.parents.get(value).and_then(|p| p.iter().next()) {
            Some(p) => Some(p),
            None => step.catch_all.as_deref(),
        }
    }

    /// True when `value` is accepted at level 0, either explicitly or through
    /// a level-1 catch-all.
    pub fn covers_ground(&self, value: &str) -> bool {
        self.domains[0].contains(value) || self.steps.first().is_some_and(|s| s.catch_all.is_some())
    }

    /// Moves a value that currently sits at level `from` up to level `to`.
    pub fn lift(&self, value: &Cell, from: usize, to: usize) -> Result<Cell> {
        self.check_level(to)?;
        if from > to {
            return Err(Error::LevelOutOfRange {
                level: from,
                height: to,
            });
        }
        let Cell::Value(v) = value else {
            return Ok(Cell::Suppressed);
        };
        if from == 0 && !self.covers_ground(v) {
            return Err(Error::UnknownValue {
                value: v.clone(),
                row: None,
            });
        }
        let mut current = v.as_str();
        for level in from..to {
            current = self
                .parent_of(level, current)
                .ok_or_else(|| Error::UnknownValue {
                    value: v.clone(),
                    row: None,
                })?;
        }
        Ok(Cell::Value(current.to_owned()))
    }
}

/// Returns the level-`level` ancestor of a ground value.
pub fn generalize_value(h: &GeneralizationHierarchy, v: &Cell, level: usize) -> Result<Cell> {
    h.lift(v, 0, level)
}

/// Replaces every cell of `attr` by its level-`level` ancestor.
pub fn generalize_column(
    d: &Dataset,
    attr: &str,
    h: &GeneralizationHierarchy,
    level: usize,
) -> Result<Dataset> {
    lift_column(d, attr, h, 0, level)
}

/// Column form of [`GeneralizationHierarchy::lift`], for data already at
/// level `from`.
pub fn lift_column(
    d: &Dataset,
    attr: &str,
    h: &GeneralizationHierarchy,
    from: usize,
    to: usize,
) -> Result<Dataset> {
    if h.attribute() != attr {
        return Err(Error::HierarchyMismatch {
            hierarchy: h.attribute().to_owned(),
            attribute: attr.to_owned(),
        });
    }
    let col = d.column_index(attr)?;
    h.check_level(to)?;
    if from == to {
        return Ok(d.clone());
    }
    let mut cache: BTreeMap<&Cell, Cell> = BTreeMap::new();
    let mut out = Vec::with_capacity(d.row_count());
    for (i, row) in d.rows().iter().enumerate() {
        let lifted = match cache.get(&row[col]) {
            Some(c) => c.clone(),
            None => {
                let c = h.lift(&row[col], from, to).map_err(|e| match e {
                    Error::UnknownValue { value, .. } => Error::UnknownValue { value, row: Some(i) },
                    other => other,
                })?;
                cache.insert(&row[col], c.clone());
                c
            }
        };
        let mut r = row.clone();
        r[col] = lifted;
        out.push(r);
    }
    Ok(d.with_rows(out))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A value at `level` has no parent and no catch-all applies.
    UncoveredGroundValue { level: usize, value: String },
    /// A value at `level` has more than one parent.
    MultipleParents {
        level: usize,
        value: String,
        parents: Vec<String>,
    },
    /// An edge starts from a value that is not in its level's domain.
    UnknownChild { level: usize, value: String },
    /// An edge or catch-all points outside the next level's domain.
    ParentNotInLevel {
        level: usize,
        value: String,
        parent: String,
    },
    /// Declared rooted but the top level is not a single value.
    NotRooted { top_size: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UncoveredGroundValue { level, value } => {
                write!(f, "level {level} value `{value}` has no parent")
            }
            Violation::MultipleParents {
                level,
                value,
                parents,
            } => {
                write!(
                    f,
                    "level {level} value `{value}` has parents {}",
                    parents.join(", ")
                )
            }
            Violation::UnknownChild { level, value } => {
                write!(f, "edge from `{value}` which is not in level {level}")
            }
            Violation::ParentNotInLevel { level, value, parent } => {
                write!(
                    f,
                    "`{value}` at level {level} maps to `{parent}` outside level {}",
                    level + 1
                )
            }
            Violation::NotRooted { top_size } => {
                write!(f, "declared rooted but top level has {top_size} values")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HierarchyValidation {
    pub attribute: String,
    pub height: usize,
    pub violations: Vec<Violation>,
}

impl HierarchyValidation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks totality, functionality and level ordering, reporting every
/// violation found.
pub fn validate_hierarchy(h: &GeneralizationHierarchy) -> HierarchyValidation {
    let mut violations = Vec::new();
    for (level, step) in h.steps.iter().enumerate() {
        let here = &h.domains[level];
        let next = &h.domains[level + 1];
        for value in here {
            match step.parents.get(value) {
                None if step.catch_all.is_none() => violations.push(Violation::UncoveredGroundValue {
                    level,
                    value: value.clone(),
                }),
                Some(p) if p.len() > 1 => violations.push(Violation::MultipleParents {
                    level,
                    value: value.clone(),
                    parents: p.iter().cloned().collect(),
                }),
                _ => {}
            }
        }
        for (child, parents) in &step.parents {
            if !here.contains(child) {
                violations.push(Violation::UnknownChild {
                    level,
                    value: child.clone(),
                });
            }
            for parent in parents.iter().filter(|p| !next.contains(*p)) {
                violations.push(Violation::ParentNotInLevel {
                    level,
                    value: child.clone(),
                    parent: parent.clone(),
                });
            }
        }
        if let Some(c) = step.catch_all.as_ref().filter(|c| !next.contains(*c)) {
            violations.push(Violation::ParentNotInLevel {
                level,
                value: "<catch-all>".into(),
                parent: c.clone(),
            });
        }
    }
    let top = h.domains.last().map_or(0, BTreeSet::len);
    if h.rooted && top != 1 {
        violations.push(Violation::NotRooted { top_size: top });
    }
    HierarchyValidation {
        attribute: h.attribute.clone(),
        height: h.height(),
        violations,
    }
}

/// Date layout such as `dd/mm/yy` or `yyyy-mm-dd`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatePattern {
    tokens: Vec<DateToken>,
    century: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum DateToken {
    Day,
    Month,
    ShortYear,
    Year,
    Literal(char),
}

impl DatePattern {
    /// `century` is prefixed to two-digit years.
    pub fn parse(pattern: &str, century: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut rest = pattern;
        while !rest.is_empty() {
            let (tok, len) = if rest.starts_with("yyyy") {
                (DateToken::Year, 4)
            } else if rest.starts_with("yy") {
                (DateToken::ShortYear, 2)
            } else if rest.starts_with("dd") {
                (DateToken::Day, 2)
            } else if rest.starts_with("mm") {
                (DateToken::Month, 2)
            } else {
                let c = rest.chars().next().unwrap();
                (DateToken::Literal(c), c.len_utf8())
            };
            tokens.push(tok);
            rest = &rest[len..];
        }
        let count = |t: &DateToken| tokens.iter().filter(|x| *x == t).count();
        let years = count(&DateToken::Year) + count(&DateToken::ShortYear);
        if years != 1 || count(&DateToken::Day) > 1 || count(&DateToken::Month) > 1 {
            return Err(Error::MalformedSpec(format!(
                "date pattern `{pattern}` must contain exactly one year field"
            )));
        }
        if century.len() != 2 || !century.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::MalformedSpec(format!(
                "century `{century}` must be two digits"
            )));
        }
        Ok(Self {
            tokens,
            century: century.to_owned(),
        })
    }

    /// Four-digit year of a date written in this pattern.
    pub fn year_of(&self, value: &str) -> Option<String> {
        let mut rest = value;
        let mut year = None;
        for tok in &self.tokens {
            let digits = |n: usize, rest: &str| {
                (rest.len() >= n && rest.as_bytes()[..n].iter().all(u8::is_ascii_digit))
                    .then(|| rest[..n].to_owned())
            };
            match tok {
                DateToken::Literal(c) => rest = rest.strip_prefix(*c)?,
                DateToken::Day | DateToken::Month => {
                    digits(2, rest)?;
                    rest = &rest[2..];
                }
                DateToken::ShortYear => {
                    year = Some(format!("{}{}", self.century, digits(2, rest)?));
                    rest = &rest[2..];
                }
                DateToken::Year => {
                    year = Some(digits(4, rest)?);
                    rest = &rest[4..];
                }
            }
        }
        if rest.is_empty() {
            year
        } else {
            None
        }
    }
}

fn default_century() -> String {
    "19".to_owned()
}

/// Declarative description of a hierarchy, as written in a policy file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HierarchySpec {
    LevelTable {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rows: Option<Vec<Vec<String>>>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        catch_all: BTreeMap<usize, String>,
        #[serde(default)]
        rooted: bool,
    },
    DatePattern {
        pattern: String,
        #[serde(default = "default_century")]
        century: String,
    },
}

impl HierarchySpec {
    /// Rewrites a relative `file` against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let HierarchySpec::LevelTable { file: Some(f), .. } = self {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
    }
}

/// Reads a level table file: header `level_0,...,level_h`, one ancestor
/// chain per row.
pub fn read_level_table(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_owned(),
                source,
            },
            other => Error::MalformedSpec(format!("{}: {other:?}", path.display())),
        })?;
    let header = reader
        .headers()
        .map_err(|e| Error::MalformedSpec(format!("{}: {e}", path.display())))?
        .clone();
    for (i, name) in header.iter().enumerate() {
        if name.trim() != format!("level_{i}") {
            return Err(Error::MalformedSpec(format!(
                "{}: header column {i} is `{name}`, expected `level_{i}`",
                path.display()
            )));
        }
    }
    reader
        .records()
        .map(|r| {
            r.map(|rec| rec.iter().map(str::to_owned).collect())
                .map_err(|e| Error::MalformedSpec(format!("{}: {e}", path.display())))
        })
        .collect()
}

/// Builds the hierarchy a spec describes without validating it.
pub fn build_hierarchy(
    attribute: &str,
    spec: &HierarchySpec,
    observed_ground_values: &BTreeSet<String>,
) -> Result<GeneralizationHierarchy> {
    Ok(match spec {
        HierarchySpec::LevelTable {
            file,
            rows,
            catch_all,
            rooted,
        } => {
            let chains = match (file, rows) {
                (Some(path), None) => read_level_table(path)?,
                (None, Some(rows)) => rows.clone(),
                _ => {
                    return Err(Error::MalformedSpec(
                        "level table needs exactly one of `file` or `rows`".into(),
                    ))
                }
            };
            GeneralizationHierarchy::from_chains(attribute, &chains, catch_all, *rooted)?
        }
        HierarchySpec::DatePattern { pattern, century } => {
            let pattern = DatePattern::parse(pattern, century)?;
            GeneralizationHierarchy::date_pattern(
                attribute,
                &pattern,
                observed_ground_values.iter().map(String::as_str),
            )?
        }
    })
}

/// Resolves a spec into a validated hierarchy for `attribute`, checking that
/// every observed ground value is covered.
pub fn load_hierarchy(
    attribute: &str,
    spec: &HierarchySpec,
    observed_ground_values: &BTreeSet<String>,
) -> Result<GeneralizationHierarchy> {
    let h = build_hierarchy(attribute, spec, observed_ground_values)?;
    let report = validate_hierarchy(&h);
    if !report.is_valid() {
        let msg: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        return Err(Error::MalformedSpec(msg.join("; ")));
    }
    if let Some(v) = observed_ground_values.iter().find(|v| !h.covers_ground(v)) {
        return Err(Error::UncoveredGroundValue(v.clone()));
    }
    Ok(h)
}
