//! Equivalence classes, k-anonymity, per-attribute frequency checks,
//! l-diversity and utility measures.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchies;
use crate::model::{Cell, Dataset};

/// Rows sharing one quasi-identifier tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceClass {
    pub qid_tuple: Vec<Cell>,
    pub row_indices: Vec<usize>,
}

impl EquivalenceClass {
    pub fn size(&self) -> usize {
        self.row_indices.len()
    }
}

/// How the anonymity target is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    /// Every quasi-identifier tuple occurs at least k times.
    #[default]
    Strict,
    /// Every non-suppressed value of each checked attribute occurs at least
    /// k times, attribute by attribute.
    Frequency,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default)]
    pub mode: CheckMode,
    /// Extra attributes checked together with the quasi-identifiers.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub linkage_attrs: Vec<String>,
}

impl Default for PrivacyParams {
    fn default() -> Self {
        Self {
            k: 2,
            l: None,
            mode: CheckMode::Strict,
            linkage_attrs: Vec::new(),
        }
    }
}

impl PrivacyParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParam(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        if let Some(l) = self.l.filter(|&l| l < 2) {
            return Err(Error::InvalidParam(format!("l must be at least 2, got {l}")));
        }
        Ok(())
    }

    /// Quasi-identifiers followed by any linkage attributes not already
    /// listed, in schema order. Every name must exist in `d`.
    pub fn checked_attributes(&self, d: &Dataset, qid: &[&str]) -> Result<Vec<String>> {
        let wanted: HashSet<&str> = qid
            .iter()
            .copied()
            .chain(self.linkage_attrs.iter().map(String::as_str))
            .collect();
        for a in &wanted {
            d.column_index(a)?;
        }
        Ok(d.schema()
            .iter()
            .filter(|a| wanted.contains(a.as_str()))
            .cloned()
            .collect())
    }
}

/// Groups rows by their values on `qid`. Classes are sorted by tuple;
/// `Suppressed` only equals `Suppressed`.
pub fn partition_by_qid<S: AsRef<str>>(d: &Dataset, qid: &[S]) -> Result<Vec<EquivalenceClass>> {
    let idx = d.indices_of(qid)?;
    let mut groups: HashMap<Vec<&Cell>, Vec<usize>> = HashMap::new();
    for (i, row) in d.rows().iter().enumerate() {
        let key: Vec<&Cell> = idx.iter().map(|&c| &row[c]).collect();
        groups.entry(key).or_default().push(i);
    }
    let mut classes: Vec<EquivalenceClass> = groups
        .into_iter()
        .map(|(key, row_indices)| EquivalenceClass {
            qid_tuple: key.into_iter().cloned().collect(),
            row_indices,
        })
        .collect();
    classes.sort_by(|a, b| a.qid_tuple.cmp(&b.qid_tuple));
    Ok(classes)
}

/// Size of the smallest equivalence class.
pub fn k_anonymity_level<S: AsRef<str>>(d: &Dataset, qid: &[S]) -> Result<usize> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(partition_by_qid(d, qid)?
        .iter()
        .map(EquivalenceClass::size)
        .min()
        .unwrap_or(0))
}

/// Per attribute, the non-suppressed values seen fewer than `k` times.
/// Attributes without such values are left out, so an empty map is a pass.
pub fn attribute_frequency_violations<S: AsRef<str>>(
    d: &Dataset,
    attrs: &[S],
    k: usize,
) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let idx = d.indices_of(attrs)?;
    let mut out = BTreeMap::new();
    for (attr, col) in attrs.iter().zip(idx) {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for v in d.rows().iter().filter_map(|r| r[col].as_value()) {
            *counts.entry(v).or_default() += 1;
        }
        let rare: BTreeSet<String> = counts
            .into_iter()
            .filter(|&(_, n)| n < k)
            .map(|(v, _)| v.to_owned())
            .collect();
        if !rare.is_empty() {
            out.insert(attr.as_ref().to_owned(), rare);
        }
    }
    Ok(out)
}

/// Smallest number of distinct non-suppressed sensitive values in any class.
pub fn l_diversity_level<S: AsRef<str>>(d: &Dataset, qid: &[S], sensitive: &str) -> Result<usize> {
    if qid.iter().any(|a| a.as_ref() == sensitive) {
        return Err(Error::SensitiveInQid(sensitive.to_owned()));
    }
    let col = d.column_index(sensitive)?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = partition_by_qid(d, qid)?;
    Ok(classes
        .iter()
        .map(|c| {
            c.row_indices
                .iter()
                .filter_map(|&i| d.rows()[i][col].as_value())
                .collect::<HashSet<_>>()
                .len()
        })
        .min()
        .unwrap_or(0))
}

/// Minimum l-diversity across several sensitive attributes.
pub fn l_diversity_over<S: AsRef<str>, T: AsRef<str>>(
    d: &Dataset,
    qid: &[S],
    sensitive: &[T],
) -> Result<usize> {
    if sensitive.is_empty() {
        return Err(Error::NoSensitiveAttribute);
    }
    sensitive
        .iter()
        .map(|s| l_diversity_level(d, qid, s.as_ref()))
        .try_fold(usize::MAX, |acc, l| l.map(|l| acc.min(l)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityReport {
    /// One minus the mean normalized generalization height of the
    /// hierarchical quasi-identifier cells.
    pub precision: f64,
    /// Suppressed cells, counting every cell of a removed record, over all
    /// cells of the original table.
    pub suppression_ratio: f64,
    pub records_suppressed: usize,
    pub avg_class_size: f64,
    pub min_class_size: usize,
    pub per_attribute_level: BTreeMap<String, usize>,
}

/// Measures what the published table still carries compared to `original`.
///
/// Cells of hierarchical quasi-identifiers count `level / height`; suppressed
/// cells and removed records count 1.
pub fn compute_utility<S: AsRef<str>>(
    original: &Dataset,
    published: &Dataset,
    hierarchies: &Hierarchies,
    levels: &BTreeMap<String, usize>,
    qid: &[S],
) -> Result<UtilityReport> {
    if let Some(a) = published.schema().iter().find(|a| !original.has_attribute(a)) {
        return Err(Error::IncompatibleSchema(a.clone()));
    }
    let original_rows = original.row_count();
    let published_rows = published.row_count();
    if published_rows > original_rows {
        return Err(Error::IncompatibleSchema(format!(
            "published has {published_rows} rows, original {original_rows}"
        )));
    }
    let removed = original_rows - published_rows;

    let present: Vec<&str> = qid
        .iter()
        .map(AsRef::as_ref)
        .filter(|a| published.has_attribute(a))
        .collect();

    let mut per_attribute_level = BTreeMap::new();
    let mut measured = Vec::new();
    for &attr in &present {
        let Some(h) = hierarchies.get(attr) else { continue };
        let level = levels.get(attr).copied().unwrap_or(0);
        if level > h.height() {
            return Err(Error::LevelOutOfRange {
                level,
                height: h.height(),
            });
        }
        per_attribute_level.insert(attr.to_owned(), level);
        let ratio = if h.height() == 0 {
            0.0
        } else {
            level as f64 / h.height() as f64
        };
        measured.push((published.column_index(attr)?, ratio));
    }

    let precision = if original_rows == 0 {
        1.0
    } else if measured.is_empty() {
        1.0 - removed as f64 / original_rows as f64
    } else {
        let mut loss = removed as f64 * measured.len() as f64;
        for row in published.rows() {
            for &(col, ratio) in &measured {
                loss += if row[col].is_suppressed() { 1.0 } else { ratio };
            }
        }
        1.0 - loss / (original_rows as f64 * measured.len() as f64)
    };

    let columns = published.schema().len();
    let total_cells = original_rows * columns;
    let suppression_ratio = if total_cells == 0 {
        0.0
    } else {
        (published.suppressed_cell_count() + removed * columns) as f64 / total_cells as f64
    };

    let classes = partition_by_qid(published, &present)?;
    let (min_class_size, avg_class_size) = if published_rows == 0 {
        (0, 0.0)
    } else {
        (
            classes.iter().map(EquivalenceClass::size).min().unwrap_or(0),
            published_rows as f64 / classes.len() as f64,
        )
    };

    Ok(UtilityReport {
        precision: precision.clamp(0.0, 1.0),
        suppression_ratio,
        records_suppressed: removed,
        avg_class_size,
        min_class_size,
        per_attribute_level,
    })
}
