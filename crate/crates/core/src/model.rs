//! Tabular data model, attribute classification and PII removal.
//!
//! A [`Dataset`] is an immutable rectangle of string cells under a named
//! schema. Every transformation in the crate takes a dataset by reference and
//! returns a new one.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single cell: either a concrete value or the suppression sentinel.
///
/// `Suppressed` sorts after every concrete value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cell {
    Value(String),
    Suppressed,
}

impl Cell {
    pub fn value(v: impl Into<String>) -> Self {
        Cell::Value(v.into())
    }

    pub fn is_suppressed(&self) -> bool {
        matches!(self, Cell::Suppressed)
    }

    pub fn as_value(&self) -> Option<&str> {
        match self {
            Cell::Value(v) => Some(v),
            Cell::Suppressed => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Value(v) => f.write_str(v),
            Cell::Suppressed => f.write_str("<suppressed>"),
        }
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Value(v.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    schema: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Dataset {
    /// Validates the schema and the arity of every row.
    pub fn new(schema: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        if schema.is_empty() {
            return Err(Error::EmptySchema);
        }
        let mut seen = HashSet::with_capacity(schema.len());
        for name in &schema {
            if name.is_empty() {
                return Err(Error::EmptyAttributeName);
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateAttribute(name.clone()));
            }
        }
        if let Some(idx) = rows.iter().position(|r| r.len() != schema.len()) {
            return Err(Error::ArityMismatch(idx));
        }
        Ok(Self { schema, rows })
    }

    /// Convenience constructor from plain strings; no cell is suppressed.
    pub fn from_text<S: AsRef<str>, R: AsRef<[S]>>(schema: &[&str], rows: &[R]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|c| Cell::value(c.as_ref())).collect())
            .collect();
        Self::new(schema.iter().map(|s| s.to_string()).collect(), rows)
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, attr: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|a| a == attr)
            .ok_or_else(|| Error::UnknownAttribute(attr.to_owned()))
    }

    pub fn has_attribute(&self, attr: &str) -> bool {
        self.schema.iter().any(|a| a == attr)
    }

    pub fn column(&self, attr: &str) -> Result<impl Iterator<Item = &Cell> + '_> {
        let idx = self.column_index(attr)?;
        Ok(self.rows.iter().map(move |r| &r[idx]))
    }

    pub fn cell(&self, row: usize, attr: &str) -> Result<&Cell> {
        let idx = self.column_index(attr)?;
        self.rows
            .get(row)
            .map(|r| &r[idx])
            .ok_or(Error::RowOutOfRange(row))
    }

    /// Number of suppressed cells across the whole table.
    pub fn suppressed_cell_count(&self) -> usize {
        self.rows.iter().flatten().filter(|c| c.is_suppressed()).count()
    }

    /// Resolves attribute names to column indices, rejecting duplicates.
    pub(crate) fn indices_of<S: AsRef<str>>(&self, attrs: &[S]) -> Result<Vec<usize>> {
        let mut seen = HashSet::new();
        attrs
            .iter()
            .map(|a| {
                let a = a.as_ref();
                if !seen.insert(a) {
                    return Err(Error::DuplicateAttribute(a.to_owned()));
                }
                self.column_index(a)
            })
            .collect()
    }

    pub(crate) fn with_rows(&self, rows: Vec<Vec<Cell>>) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == self.schema.len()));
        Self {
            schema: self.schema.clone(),
            rows,
        }
    }

    /// Projects onto `attrs`, in the requested order. Rows are kept as a
    /// bag: duplicates survive and the row count never changes.
    pub fn project<S: AsRef<str>>(&self, attrs: &[S]) -> Result<Self> {
        if attrs.is_empty() {
            return Err(Error::EmptySchema);
        }
        let idx = self.indices_of(attrs)?;
        let schema = idx.iter().map(|&i| self.schema[i].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
            .collect();
        Ok(Self { schema, rows })
    }
}

/// Builds a dataset from an attribute list and rows of text cells.
pub fn build_dataset(schema: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Dataset> {
    Dataset::new(schema, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeCategory {
    /// Explicit identifier (names, registration numbers).
    Pii,
    /// Quasi-identifier: harmless alone, linkable with outside data.
    Quasi,
    Sensitive,
    NonSensitive,
}

impl fmt::Display for AttributeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttributeCategory::Pii => "pii",
            AttributeCategory::Quasi => "quasi",
            AttributeCategory::Sensitive => "sensitive",
            AttributeCategory::NonSensitive => "non_sensitive",
        };
        f.write_str(s)
    }
}

/// One category per schema attribute, kept in schema order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedSchema {
    assignments: Vec<(String, AttributeCategory)>,
}

impl ClassifiedSchema {
    pub fn category(&self, attr: &str) -> Option<AttributeCategory> {
        self.assignments.iter().find(|(a, _)| a == attr).map(|(_, c)| *c)
    }

    pub fn assignments(&self) -> &[(String, AttributeCategory)] {
        &self.assignments
    }

    /// Attributes of one category, in schema order.
    pub fn attributes_in(&self, category: AttributeCategory) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, c)| *c == category)
            .map(|(a, _)| a.as_str())
            .collect()
    }

    pub fn pii(&self) -> Vec<&str> {
        self.attributes_in(AttributeCategory::Pii)
    }

    pub fn quasi(&self) -> Vec<&str> {
        self.attributes_in(AttributeCategory::Quasi)
    }

    pub fn sensitive(&self) -> Vec<&str> {
        self.attributes_in(AttributeCategory::Sensitive)
    }

    pub fn non_sensitive(&self) -> Vec<&str> {
        self.attributes_in(AttributeCategory::NonSensitive)
    }

    fn covers(&self, dataset: &Dataset) -> Result<()> {
        for attr in dataset.schema() {
            if self.category(attr).is_none() {
                return Err(Error::UnclassifiedAttribute(attr.clone()));
            }
        }
        Ok(())
    }
}

/// Checks that `assignments` gives exactly one category to every schema
/// attribute. There is no default category.
pub fn classify_attributes(
    dataset: &Dataset,
    assignments: &BTreeMap<String, AttributeCategory>,
) -> Result<ClassifiedSchema> {
    if let Some(name) = assignments.keys().find(|a| !dataset.has_attribute(a)) {
        return Err(Error::UnknownAttribute(name.clone()));
    }
    let assignments = dataset
        .schema()
        .iter()
        .map(|a| {
            assignments
                .get(a)
                .map(|c| (a.clone(), *c))
                .ok_or_else(|| Error::UnclassifiedAttribute(a.clone()))
        })
        .collect::<Result<_>>()?;
    Ok(ClassifiedSchema { assignments })
}

/// Same as [`classify_attributes`] for callers holding a `HashMap`.
pub fn classify_attributes_from(
    dataset: &Dataset,
    assignments: &HashMap<String, AttributeCategory>,
) -> Result<ClassifiedSchema> {
    let sorted = assignments.iter().map(|(k, v)| (k.clone(), *v)).collect();
    classify_attributes(dataset, &sorted)
}

/// PII attributes deliberately kept in the published table.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RetainList(Vec<String>);

impl RetainList {
    pub fn new<S: Into<String>>(attrs: impl IntoIterator<Item = S>) -> Self {
        Self(attrs.into_iter().map(Into::into).collect())
    }

    pub fn contains(&self, attr: &str) -> bool {
        self.0.iter().any(|a| a == attr)
    }

    pub fn attributes(&self) -> &[String] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Drops every PII column except those on the retain list. Column order
/// follows the input; rows and cell values are untouched.
pub fn deidentify(dataset: &Dataset, cs: &ClassifiedSchema, retain: &RetainList) -> Result<Dataset> {
    cs.covers(dataset)?;
    for attr in retain.attributes() {
        if cs.category(attr) != Some(AttributeCategory::Pii) || !dataset.has_attribute(attr) {
            return Err(Error::RetainNotPii(attr.clone()));
        }
    }
    let keep: Vec<&str> = dataset
        .schema()
        .iter()
        .map(String::as_str)
        .filter(|a| cs.category(a) != Some(AttributeCategory::Pii) || retain.contains(a))
        .collect();
    dataset.project(&keep)
}

/// Free-function form of [`Dataset::project`].
pub fn project<S: AsRef<str>>(dataset: &Dataset, attrs: &[S]) -> Result<Dataset> {
    dataset.project(attrs)
}
