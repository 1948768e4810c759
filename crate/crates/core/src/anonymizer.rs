//! Suppression operators, greedy k-anonymity enforcement and the end-to-end
//! anonymization pipeline.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, PipelineStep, Result};
use crate::hierarchy::{generalize_column, lift_column, load_hierarchy, Hierarchies};
use crate::metrics::{
    attribute_frequency_violations, compute_utility, k_anonymity_level, l_diversity_over, partition_by_qid,
    CheckMode, PrivacyParams, UtilityReport,
};
use crate::model::{classify_attributes, deidentify, Cell, ClassifiedSchema, Dataset};
use crate::policy::PolicyFile;

/// Share of records above which the report carries a warning.
pub const SUPPRESSION_WARNING_RATIO: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SuppressionDirective {
    /// Suppress every occurrence of `value` in `attribute`.
    CellValue { attribute: String, value: String },
    /// Suppress `attribute` in the given rows.
    CellAt {
        attribute: String,
        rows: BTreeSet<usize>,
    },
    /// Remove whole records.
    Record { rows: BTreeSet<usize> },
}

/// Position of one suppressed cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct CellCoordinate {
    pub row: usize,
    pub attribute: String,
}

/// Cells a directive touches in `d` (only cells not already suppressed).
fn resolve_cells(d: &Dataset, directive: &SuppressionDirective) -> Result<Vec<(usize, usize)>> {
    match directive {
        SuppressionDirective::CellValue { attribute, value } => {
            let col = d.column_index(attribute)?;
            Ok(d.rows()
                .iter()
                .enumerate()
                .filter(|(_, r)| r[col].as_value() == Some(value.as_str()))
                .map(|(i, _)| (i, col))
                .collect())
        }
        SuppressionDirective::CellAt { attribute, rows } => {
            let col = d.column_index(attribute)?;
            if let Some(&bad) = rows.iter().find(|&&r| r >= d.row_count()) {
                return Err(Error::RowOutOfRange(bad));
            }
            Ok(rows
                .iter()
                .filter(|&&r| !d.rows()[r][col].is_suppressed())
                .map(|&r| (r, col))
                .collect())
        }
        SuppressionDirective::Record { .. } => Ok(Vec::new()),
    }
}

fn blank_cells(d: &Dataset, cells: &[(usize, usize)]) -> Dataset {
    let mut rows = d.rows().to_vec();
    for &(r, c) in cells {
        rows[r][c] = Cell::Suppressed;
    }
    d.with_rows(rows)
}

/// Applies a directive. Cell directives blank cells in place; `Record`
/// removes rows.
pub fn suppress_cells(d: &Dataset, directive: &SuppressionDirective) -> Result<Dataset> {
    match directive {
        SuppressionDirective::Record { rows } => suppress_records(d, rows),
        _ => Ok(blank_cells(d, &resolve_cells(d, directive)?)),
    }
}

/// Removes the given rows, keeping the survivors in order.
pub fn suppress_records(d: &Dataset, indices: &BTreeSet<usize>) -> Result<Dataset> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= d.row_count()) {
        return Err(Error::RowOutOfRange(bad));
    }
    let rows = d
        .rows()
        .iter()
        .enumerate()
        .filter(|(i, _)| !indices.contains(i))
        .map(|(_, r)| r.clone())
        .collect();
    Ok(d.with_rows(rows))
}

/// Generalization level per hierarchical attribute: a node of the
/// full-domain generalization lattice.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LevelVector(BTreeMap<String, usize>);

impl LevelVector {
    pub fn zeros<'a>(attrs: impl IntoIterator<Item = &'a str>) -> Self {
        Self(attrs.into_iter().map(|a| (a.to_owned(), 0)).collect())
    }

    pub fn get(&self, attr: &str) -> usize {
        self.0.get(attr).copied().unwrap_or(0)
    }

    pub fn set(&mut self, attr: &str, level: usize) {
        self.0.insert(attr.to_owned(), level);
    }

    pub fn as_map(&self) -> &BTreeMap<String, usize> {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.0.iter().map(|(a, l)| (a.as_str(), *l))
    }
}

impl<const N: usize> From<[(&str, usize); N]> for LevelVector {
    fn from(v: [(&str, usize); N]) -> Self {
        Self(v.into_iter().map(|(a, l)| (a.to_owned(), l)).collect())
    }
}

/// Largest fraction of input records enforcement may remove.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SuppressionBudget(f64);

impl SuppressionBudget {
    pub const UNLIMITED: Self = Self(1.0);
    pub const NONE: Self = Self(0.0);

    pub fn new(fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidParam(format!(
                "budget must be in [0, 1], got {fraction}"
            )));
        }
        Ok(Self(fraction))
    }

    pub fn fraction(self) -> f64 {
        self.0
    }

    /// Records that may be removed from a table of `rows` records.
    pub fn allowed(self, rows: usize) -> usize {
        ((self.0 * rows as f64) + 1e-9).floor() as usize
    }
}

impl Default for SuppressionBudget {
    fn default() -> Self {
        Self::UNLIMITED
    }
}

impl TryFrom<f64> for SuppressionBudget {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SuppressionBudget> for f64 {
    fn from(b: SuppressionBudget) -> f64 {
        b.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum EnforcementStep {
    Raise {
        attribute: String,
        level: usize,
        violators_after: usize,
    },
    SuppressRecords {
        count: usize,
    },
}

/// Result of the greedy search, before any report is assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct Enforcement {
    pub final_levels: LevelVector,
    /// Removed rows, as indices into the enforcement input.
    pub removed_rows: Vec<usize>,
    pub iterations: usize,
    pub steps: Vec<EnforcementStep>,
}

/// Interned column used by the search: one code per row, code -> cell.
#[derive(Clone)]
struct CodedColumn {
    dict: Vec<Cell>,
    codes: Vec<u32>,
}

impl CodedColumn {
    fn new<'a>(cells: impl Iterator<Item = &'a Cell>) -> Self {
        let mut index: HashMap<&Cell, u32> = HashMap::new();
        let mut dict = Vec::new();
        let codes = cells
            .map(|c| {
                *index.entry(c).or_insert_with(|| {
                    dict.push(c.clone());
                    (dict.len() - 1) as u32
                })
            })
            .collect();
        Self { dict, codes }
    }

    /// Maps every distinct value through `f`, re-interning the results.
    fn remap(&self, mut f: impl FnMut(&Cell) -> Result<Cell>) -> Result<Self> {
        let mut index: HashMap<Cell, u32> = HashMap::new();
        let mut dict = Vec::new();
        let mut translate = Vec::with_capacity(self.dict.len());
        for cell in &self.dict {
            let next = f(cell)?;
            let code = match index.get(&next) {
                Some(&c) => c,
                None => {
                    dict.push(next.clone());
                    let c = (dict.len() - 1) as u32;
                    index.insert(next, c);
                    c
                }
            };
            translate.push(code);
        }
        let codes = self.codes.iter().map(|&c| translate[c as usize]).collect();
        Ok(Self { dict, codes })
    }

    fn suppressed_code(&self) -> Option<u32> {
        self.dict.iter().position(Cell::is_suppressed).map(|p| p as u32)
    }
}

/// Rows violating the mode's k-check. In frequency mode removing a violator can
/// push other values under k, so the closure of that cascade is returned.
fn violating_rows(columns: &[&CodedColumn], rows: usize, k: usize, mode: CheckMode) -> Vec<usize> {
    match mode {
        CheckMode::Strict => {
            let mut class = vec![0u32; rows];
            for col in columns {
                let mut ids: HashMap<(u32, u32), u32> = HashMap::new();
                for (c, &code) in class.iter_mut().zip(&col.codes) {
                    let next = ids.len() as u32;
                    *c = *ids.entry((*c, code)).or_insert(next);
                }
            }
            let mut sizes: HashMap<u32, usize> = HashMap::new();
            for &c in &class {
                *sizes.entry(c).or_default() += 1;
            }
            (0..rows).filter(|&r| sizes[&class[r]] < k).collect()
        }
        CheckMode::Frequency => {
            let mut alive = vec![true; rows];
            loop {
                let mut newly = Vec::new();
                let mut bad = vec![false; rows];
                for col in columns {
                    let skip = col.suppressed_code();
                    let mut counts = vec![0usize; col.dict.len()];
                    for r in (0..rows).filter(|&r| alive[r]) {
                        counts[col.codes[r] as usize] += 1;
                    }
                    for r in (0..rows).filter(|&r| alive[r]) {
                        let code = col.codes[r];
                        if Some(code) != skip && counts[code as usize] < k {
                            bad[r] = true;
                        }
                    }
                }
                for r in 0..rows {
                    if bad[r] {
                        alive[r] = false;
                        newly.push(r);
                    }
                }
                if newly.is_empty() {
                    break;
                }
            }
            (0..rows).filter(|&r| !alive[r]).collect()
        }
    }
}

/// Greedy ascent over the generalization lattice starting at `start`.
///
/// Each round either removes the current violators (when they fit in the
/// budget) or raises by one level the attribute leaving the fewest violators.
/// Ties go to the smaller precision loss, then to schema order.
pub fn enforce_from(
    d: &Dataset,
    checked: &[String],
    hierarchies: &Hierarchies,
    start: &LevelVector,
    params: &PrivacyParams,
    budget: SuppressionBudget,
) -> Result<(Dataset, Enforcement)> {
    params.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = d.row_count();
    let allowed = budget.allowed(n);
    let idx = d.indices_of(checked)?;
    let mut columns: Vec<CodedColumn> = idx
        .iter()
        .map(|&c| CodedColumn::new(d.rows().iter().map(|r| &r[c])))
        .collect();

    // (position in `checked`, hierarchy, current level)
    let mut lattice: Vec<(usize, &crate::hierarchy::GeneralizationHierarchy, usize)> = Vec::new();
    for (pos, attr) in checked.iter().enumerate() {
        if let Some(h) = hierarchies.get(attr) {
            let level = start.get(attr);
            if level > h.height() {
                return Err(Error::LevelOutOfRange {
                    level,
                    height: h.height(),
                });
            }
            lattice.push((pos, h, level));
        }
    }

    let mut levels = start.clone();
    for (pos, _, level) in &lattice {
        levels.set(&checked[*pos], *level);
    }
    let mut steps = Vec::new();
    let mut iterations = 0;
    let removed = loop {
        let refs: Vec<&CodedColumn> = columns.iter().collect();
        let violators = violating_rows(&refs, n, params.k, params.mode);
        if violators.len() <= allowed {
            if !violators.is_empty() {
                iterations += 1;
                steps.push(EnforcementStep::SuppressRecords {
                    count: violators.len(),
                });
            }
            break violators;
        }

        // (violators, loss numerator, loss denominator, lattice slot, column)
        let mut best: Option<(usize, usize, usize, usize, CodedColumn)> = None;
        for (slot, &(pos, h, level)) in lattice.iter().enumerate() {
            if level >= h.height() {
                continue;
            }
            let raised = columns[pos].remap(|c| h.lift(c, level, level + 1))?;
            let mut trial: Vec<&CodedColumn> = columns.iter().collect();
            trial[pos] = &raised;
            let count = violating_rows(&trial, n, params.k, params.mode).len();
            let live = columns[pos].codes.len()
                - columns[pos]
                    .suppressed_code()
                    .map_or(0, |s| columns[pos].codes.iter().filter(|&&c| c == s).count());
            let height = h.height();
            let better = match &best {
                None => true,
                Some((bc, bn, bd, _, _)) => {
                    // loss = live / height, compared exactly
                    count < *bc || (count == *bc && live * bd < bn * height)
                }
            };
            if better {
                best = Some((count, live, height, slot, raised));
            }
        }
        let Some((count, _, _, slot, raised)) = best else {
            return Err(Error::InfeasibleWithinBudget {
                k: params.k,
                violators: violators.len(),
                allowed,
            });
        };
        let (pos, _, level) = &mut lattice[slot];
        *level += 1;
        columns[*pos] = raised;
        levels.set(&checked[*pos], *level);
        iterations += 1;
        steps.push(EnforcementStep::Raise {
            attribute: checked[*pos].clone(),
            level: *level,
            violators_after: count,
        });
    };

    let mut out = d.clone();
    for &(pos, h, level) in &lattice {
        let attr = &checked[pos];
        let from = start.get(attr);
        if level > from {
            out = lift_column(&out, attr, &h.rebind(attr.as_str()), from, level)?;
        }
    }
    let removed_set: BTreeSet<usize> = removed.iter().copied().collect();
    let out = suppress_records(&out, &removed_set)?;
    Ok((
        out,
        Enforcement {
            final_levels: levels,
            removed_rows: removed,
            iterations,
            steps,
        },
    ))
}

/// Enforces k-anonymity over `qid` plus `params.linkage_attrs`, starting
/// from level zero on every hierarchical attribute.
pub fn enforce_k_anonymity(
    d: &Dataset,
    qid: &[&str],
    hierarchies: &Hierarchies,
    params: &PrivacyParams,
    budget: SuppressionBudget,
) -> Result<(Dataset, AnonymizationReport)> {
    let checked = params.checked_attributes(d, qid)?;
    let start = LevelVector::zeros(
        checked
            .iter()
            .filter(|a| hierarchies.contains_key(*a))
            .map(String::as_str),
    );
    let (out, enforcement) = enforce_from(d, &checked, hierarchies, &start, params, budget)?;
    let utility = compute_utility(d, &out, hierarchies, enforcement.final_levels.as_map(), &checked)?;
    let report = AnonymizationReport::assemble(
        &out,
        &checked,
        params,
        budget,
        enforcement,
        Vec::new(),
        Vec::new(),
        LDiversityOutcome::NotApplicable,
        utility,
        Vec::new(),
    );
    Ok((out, report))
}

/// The mode's own anonymity measure: smallest tuple class in strict mode,
/// smallest per-attribute value frequency in frequency mode. `None` when there
/// is nothing to measure.
pub fn achieved_k(d: &Dataset, checked: &[String], mode: CheckMode) -> Option<usize> {
    if d.is_empty() {
        return None;
    }
    match mode {
        CheckMode::Strict => k_anonymity_level(d, checked).ok(),
        CheckMode::Frequency => {
            let mut min = None;
            for attr in checked {
                let col = d.column_index(attr).ok()?;
                let mut counts: HashMap<&str, usize> = HashMap::new();
                for v in d.rows().iter().filter_map(|r| r[col].as_value()) {
                    *counts.entry(v).or_default() += 1;
                }
                if let Some(m) = counts.values().min() {
                    min = Some(min.map_or(*m, |x: usize| x.min(*m)));
                }
            }
            min
        }
    }
}

/// Whether `d` passes the mode's k-check over `checked`.
pub fn satisfies_k(d: &Dataset, checked: &[String], params: &PrivacyParams) -> Result<bool> {
    Ok(match params.mode {
        CheckMode::Strict => d.is_empty() || k_anonymity_level(d, checked)? >= params.k,
        CheckMode::Frequency => attribute_frequency_violations(d, checked, params.k)?.is_empty(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LDiversityOutcome {
    NotApplicable,
    Level(usize),
}

impl Serialize for LDiversityOutcome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LDiversityOutcome::NotApplicable => s.serialize_str("NOT_APPLICABLE"),
            LDiversityOutcome::Level(l) => s.serialize_u64(*l as u64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuppressedCells {
    pub count: usize,
    pub coordinates: Vec<CellCoordinate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuppressedRecords {
    pub count: usize,
    pub indices: Vec<usize>,
}

/// Audit trail of one anonymization run. Row indices refer to the
/// de-identified input table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnonymizationReport {
    pub mode: CheckMode,
    pub k: usize,
    pub budget: f64,
    pub checked_attributes: Vec<String>,
    pub final_levels: LevelVector,
    pub directives: Vec<SuppressionDirective>,
    pub suppressed_cells: SuppressedCells,
    pub suppressed_records: SuppressedRecords,
    pub achieved_k: Option<usize>,
    /// Tuple-based level, reported in every mode.
    pub strict_k: Option<usize>,
    pub achieved_l: LDiversityOutcome,
    pub iterations: usize,
    pub steps: Vec<EnforcementStep>,
    pub utility: UtilityReport,
    pub retained_pii: Vec<String>,
    pub warnings: Vec<String>,
}

impl AnonymizationReport {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        published: &Dataset,
        checked: &[String],
        params: &PrivacyParams,
        budget: SuppressionBudget,
        enforcement: Enforcement,
        directives: Vec<SuppressionDirective>,
        cells: Vec<CellCoordinate>,
        achieved_l: LDiversityOutcome,
        utility: UtilityReport,
        retained_pii: Vec<String>,
    ) -> Self {
        let mut warnings = Vec::new();
        let input_rows = published.row_count() + utility.records_suppressed;
        if input_rows > 0 {
            let share = utility.records_suppressed as f64 / input_rows as f64;
            if share > SUPPRESSION_WARNING_RATIO {
                warnings.push(format!(
                    "{} of {} records suppressed ({:.1}%)",
                    utility.records_suppressed,
                    input_rows,
                    share * 100.0
                ));
            }
        }
        let mut records = enforcement.removed_rows;
        records.sort_unstable();
        Self {
            mode: params.mode,
            k: params.k,
            budget: budget.fraction(),
            checked_attributes: checked.to_vec(),
            final_levels: enforcement.final_levels,
            directives,
            suppressed_cells: SuppressedCells {
                count: cells.len(),
                coordinates: cells,
            },
            suppressed_records: SuppressedRecords {
                count: records.len(),
                indices: records,
            },
            achieved_k: achieved_k(published, checked, params.mode),
            strict_k: achieved_k(published, checked, CheckMode::Strict),
            achieved_l,
            iterations: enforcement.iterations,
            steps: enforcement.steps,
            utility,
            retained_pii,
            warnings,
        }
    }
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub published: Dataset,
    pub report: AnonymizationReport,
    /// The input after PII removal, before any generalization.
    pub deidentified: Dataset,
    pub hierarchies: Hierarchies,
}

fn observed_values(d: &Dataset, attr: &str) -> Result<BTreeSet<String>> {
    Ok(d.column(attr)?
        .filter_map(Cell::as_value)
        .map(str::to_owned)
        .collect())
}

/// Loads the hierarchies of attributes still present after PII removal.
pub fn load_policy_hierarchies(d: &Dataset, policy: &PolicyFile) -> Result<Hierarchies> {
    let mut out = Hierarchies::new();
    for (attr, spec) in &policy.hierarchies {
        if !d.has_attribute(attr) {
            continue;
        }
        out.insert(
            attr.clone(),
            load_hierarchy(attr, spec, &observed_values(d, attr)?)?,
        );
    }
    Ok(out)
}

fn checked_attributes(d: &Dataset, cs: &ClassifiedSchema, params: &PrivacyParams) -> Result<Vec<String>> {
    let qid: Vec<&str> = cs.quasi().into_iter().filter(|a| d.has_attribute(a)).collect();
    params.checked_attributes(d, &qid)
}

/// classify -> deidentify -> base generalization -> directives -> enforce ->
/// l-diversity -> utility.
pub fn run_pipeline(raw: &Dataset, policy: &PolicyFile) -> Result<(Dataset, AnonymizationReport)> {
    let out = run_pipeline_detailed(raw, policy)?;
    Ok((out.published, out.report))
}

pub fn run_pipeline_detailed(raw: &Dataset, policy: &PolicyFile) -> Result<PipelineOutput> {
    use PipelineStep::*;

    let cs = classify_attributes(raw, &policy.assignments).map_err(Error::at(Classify))?;
    let deidentified = deidentify(raw, &cs, &policy.retain).map_err(Error::at(Deidentify))?;
    let params = &policy.params;
    params.validate().map_err(Error::at(Classify))?;
    let checked = checked_attributes(&deidentified, &cs, params).map_err(Error::at(Classify))?;

    let hierarchies = load_policy_hierarchies(&deidentified, policy).map_err(Error::at(Generalize))?;
    let mut start = LevelVector::default();
    let mut current = deidentified.clone();
    for (attr, h) in &hierarchies {
        let level = policy.base_levels.get(attr).copied().unwrap_or(0);
        if level > 0 {
            current = generalize_column(&current, attr, h, level).map_err(Error::at(Generalize))?;
        }
        start.set(attr, level);
    }

    // origin[i] = row of `deidentified` now at position i
    let mut origin: Vec<usize> = (0..current.row_count()).collect();
    let mut cells = Vec::new();
    let mut directive_records = Vec::new();
    for directive in &policy.directives {
        let step = (|| -> Result<()> {
            let position: HashMap<usize, usize> = origin.iter().enumerate().map(|(p, &o)| (o, p)).collect();
            let check = |r: usize| {
                if r >= deidentified.row_count() {
                    Err(Error::RowOutOfRange(r))
                } else {
                    Ok(())
                }
            };
            match directive {
                SuppressionDirective::Record { rows } => {
                    rows.iter().try_for_each(|&r| check(r))?;
                    let local: BTreeSet<usize> =
                        rows.iter().filter_map(|r| position.get(r).copied()).collect();
                    current = suppress_records(&current, &local)?;
                    directive_records.extend(local.iter().map(|&p| origin[p]));
                    origin = origin
                        .iter()
                        .enumerate()
                        .filter(|(p, _)| !local.contains(p))
                        .map(|(_, &o)| o)
                        .collect();
                }
                SuppressionDirective::CellAt { attribute, rows } => {
                    rows.iter().try_for_each(|&r| check(r))?;
                    let local = SuppressionDirective::CellAt {
                        attribute: attribute.clone(),
                        rows: rows.iter().filter_map(|r| position.get(r).copied()).collect(),
                    };
                    let hit = resolve_cells(&current, &local)?;
                    cells.extend(hit.iter().map(|&(r, _)| CellCoordinate {
                        row: origin[r],
                        attribute: attribute.clone(),
                    }));
                    current = blank_cells(&current, &hit);
                }
                SuppressionDirective::CellValue { attribute, .. } => {
                    let hit = resolve_cells(&current, directive)?;
                    cells.extend(hit.iter().map(|&(r, _)| CellCoordinate {
                        row: origin[r],
                        attribute: attribute.clone(),
                    }));
                    current = blank_cells(&current, &hit);
                }
            }
            Ok(())
        })();
        step.map_err(Error::at(Directives))?;
    }
    cells.sort();

    let checked_hierarchies: Hierarchies = hierarchies
        .iter()
        .filter(|(a, _)| checked.contains(a))
        .map(|(a, h)| (a.clone(), h.clone()))
        .collect();
    let (published, mut enforcement) = if current.is_empty() {
        let levels = start.clone();
        (
            current.clone(),
            Enforcement {
                final_levels: levels,
                removed_rows: Vec::new(),
                iterations: 0,
                steps: Vec::new(),
            },
        )
    } else {
        enforce_from(
            &current,
            &checked,
            &checked_hierarchies,
            &start,
            params,
            policy.budget,
        )
        .map_err(Error::at(Enforce))?
    };
    for (attr, _) in start.iter() {
        if !enforcement.final_levels.as_map().contains_key(attr) {
            enforcement.final_levels.set(attr, start.get(attr));
        }
    }
    enforcement.removed_rows = enforcement
        .removed_rows
        .iter()
        .map(|&r| origin[r])
        .chain(directive_records)
        .collect();

    let sensitive: Vec<&str> = cs
        .sensitive()
        .into_iter()
        .filter(|a| published.has_attribute(a))
        .collect();
    let achieved_l = if sensitive.is_empty() || published.is_empty() {
        LDiversityOutcome::NotApplicable
    } else {
        let l = l_diversity_over(&published, &checked, &sensitive).map_err(Error::at(LDiversity))?;
        LDiversityOutcome::Level(l)
    };
    if let (Some(required), LDiversityOutcome::Level(achieved)) = (params.l, achieved_l) {
        if achieved < required {
            return Err(Error::at(LDiversity)(Error::LDiversityUnmet {
                required,
                achieved,
            }));
        }
    }

    let utility = compute_utility(
        &deidentified,
        &published,
        &hierarchies,
        enforcement.final_levels.as_map(),
        &checked,
    )
    .map_err(Error::at(Utility))?;
    let report = AnonymizationReport::assemble(
        &published,
        &checked,
        params,
        policy.budget,
        enforcement,
        policy.directives.clone(),
        cells,
        achieved_l,
        utility,
        policy.retain.attributes().to_vec(),
    );
    Ok(PipelineOutput {
        published,
        report,
        deidentified,
        hierarchies,
    })
}

/// Rebuilds the published table from the de-identified input and a report:
/// generalize to the final levels, blank the recorded cells, drop the
/// recorded records.
pub fn replay_report(
    deidentified: &Dataset,
    report: &AnonymizationReport,
    hierarchies: &Hierarchies,
) -> Result<Dataset> {
    let mut d = deidentified.clone();
    for (attr, level) in report.final_levels.iter() {
        if level > 0 {
            let h = hierarchies
                .get(attr)
                .ok_or_else(|| Error::UnknownHierarchyRef(attr.to_owned()))?;
            d = generalize_column(&d, attr, h, level)?;
        }
    }
    let mut by_attr: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for c in &report.suppressed_cells.coordinates {
        by_attr.entry(c.attribute.as_str()).or_default().insert(c.row);
    }
    for (attr, rows) in by_attr {
        d = suppress_cells(
            &d,
            &SuppressionDirective::CellAt {
                attribute: attr.to_owned(),
                rows,
            },
        )?;
    }
    suppress_records(&d, &report.suppressed_records.indices.iter().copied().collect())
}

/// Observation-only privacy check of a table under a policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub mode: CheckMode,
    pub k: usize,
    pub checked_attributes: Vec<String>,
    pub row_count: usize,
    pub class_count: usize,
    pub min_class_size: usize,
    pub strict_k: Option<usize>,
    pub achieved_k: Option<usize>,
    pub frequency_violations: BTreeMap<String, BTreeSet<String>>,
    pub achieved_l: LDiversityOutcome,
    pub required_l: Option<usize>,
    pub passed: bool,
}

pub fn check_privacy(d: &Dataset, policy: &PolicyFile) -> Result<CheckReport> {
    let cs = classify_attributes(d, &policy.assignments)?;
    let params = &policy.params;
    params.validate()?;
    let checked = checked_attributes(d, &cs, params)?;
    let classes = partition_by_qid(d, &checked)?;
    let frequency_violations = attribute_frequency_violations(d, &checked, params.k)?;
    let sensitive: Vec<&str> = cs.sensitive();
    let achieved_l = if sensitive.is_empty() || d.is_empty() {
        LDiversityOutcome::NotApplicable
    } else {
        LDiversityOutcome::Level(l_diversity_over(d, &checked, &sensitive)?)
    };
    let l_ok = match (params.l, achieved_l) {
        (Some(req), LDiversityOutcome::Level(got)) => got >= req,
        _ => true,
    };
    let passed = satisfies_k(d, &checked, params)? && l_ok;
    Ok(CheckReport {
        mode: params.mode,
        k: params.k,
        checked_attributes: checked.clone(),
        row_count: d.row_count(),
        class_count: classes.len(),
        min_class_size: classes.iter().map(|c| c.size()).min().unwrap_or(0),
        strict_k: achieved_k(d, &checked, CheckMode::Strict),
        achieved_k: achieved_k(d, &checked, params.mode),
        frequency_violations,
        achieved_l,
        required_l: params.l,
        passed,
    })
}
