//! Shared vocabulary: tables, columns, concepts, sources and distributions.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Casefolds, trims and collapses internal whitespace runs to one space.
///
/// The same function is used when building indexes and when querying them,
/// so entity keys and concept labels always compare byte for byte.
pub fn normalize_entity(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for word in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// A symbol is any character that is neither alphanumeric nor whitespace.
#[inline]
pub fn is_symbol(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

const CURRENCY: &[char] = &['$', '€', '£', '¥', '₹', '₩', '₽', '¢'];

/// Parses web-table style numbers: thousands separators are stripped and one
/// leading sign or currency symbol is accepted. Non-finite results are rejected.
pub fn parse_number(raw: &str) -> Option<f64> {
    let trimmed = raw.trim();
    let mut rest = trimmed;
    let mut negative = false;
    let mut first = rest.chars().next()?;
    if first == '+' || first == '-' {
        negative = first == '-';
        rest = &rest[first.len_utf8()..];
        first = rest.chars().next()?;
    }
    if CURRENCY.contains(&first) {
        rest = &rest[first.len_utf8()..];
    }
    let cleaned: String = rest.chars().filter(|&c| c != ',').collect();
    if cleaned.is_empty()
        || !cleaned.bytes().any(|b| b.is_ascii_digit())
        || !cleaned
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'+' | b'-'))
    {
        return None;
    }
    // A second sign directly after the first one ("--5") is not a number.
    if cleaned.starts_with(['+', '-']) {
        return None;
    }
    let value: f64 = cleaned.parse().ok()?;
    if !value.is_finite() {
        return None;
    }
    Some(if negative { -value } else { value })
}

/// A normalized concept label. Never empty.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Concept(Arc<str>);

impl Concept {
    /// Normalizes `raw`; returns `None` when nothing is left.
    pub fn new(raw: &str) -> Option<Self> {
        let label = normalize_entity(raw);
        (!label.is_empty()).then(|| Concept(label.into()))
    }

    /// Wraps a label that is already normalized (index loading hot path).
    pub(crate) fn from_normalized(label: String) -> Self {
        debug_assert_eq!(normalize_entity(&label), label);
        debug_assert!(!label.is_empty());
        Concept(label.into())
    }

    pub fn label(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Concept {
    type Error = ModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Concept::new(&value).ok_or(ModelError::EmptyConcept)
    }
}

impl From<Concept> for String {
    fn from(c: Concept) -> String {
        c.0.to_string()
    }
}

impl Borrow<str> for Concept {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Short code naming one reference data source. Used in file names, so it is
/// restricted to ASCII alphanumerics, `-` and `_`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SourceId(Arc<str>);

impl SourceId {
    pub fn new(id: &str) -> Result<Self, ModelError> {
        let valid = !id.is_empty()
            && id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if valid {
            Ok(SourceId(id.into()))
        } else {
            Err(ModelError::InvalidSourceId(id.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for SourceId {
    type Error = ModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        SourceId::new(&value)
    }
}

impl From<SourceId> for String {
    fn from(s: SourceId) -> String {
        s.0.to_string()
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SourceId({})", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Numeric,
    Mixed,
}

impl ColumnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Categorical => "categorical",
            ColumnKind::Numeric => "numeric",
            ColumnKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Share of non-empty cells that must parse as numbers for a numeric column.
pub const NUMERIC_SHARE: f64 = 0.8;
/// Share of non-empty cells mixing symbols and alphanumerics for a mixed column.
pub const MIXED_SHARE: f64 = 0.5;

/// Assigns a column kind from its raw cell values. Empty cells are ignored.
pub fn classify_column<S: AsRef<str>>(values: &[S]) -> Result<ColumnKind, ModelError> {
    let mut non_empty = 0usize;
    let mut numeric = 0usize;
    let mut mixed = 0usize;
    for v in values {
        let v = v.as_ref().trim();
        if v.is_empty() {
            continue;
        }
        non_empty += 1;
        if parse_number(v).is_some() {
            numeric += 1;
        }
        if v.chars().any(is_symbol) && v.chars().any(char::is_alphanumeric) {
            mixed += 1;
        }
    }
    if non_empty == 0 {
        return Err(ModelError::AllEmpty);
    }
    let total = non_empty as f64;
    Ok(if numeric as f64 >= NUMERIC_SHARE * total {
        ColumnKind::Numeric
    } else if mixed as f64 >= MIXED_SHARE * total {
        ColumnKind::Mixed
    } else {
        ColumnKind::Categorical
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub header: Option<String>,
    pub values: Vec<String>,
}

impl Column {
    pub fn new(header: Option<String>, values: Vec<String>) -> Self {
        Column { header, values }
    }
}

/// An `n x m` table: `m >= 1` columns of equal length `n >= 1`, order preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<Column>,
    rows: usize,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Result<Self, ModelError> {
        let rows = columns.first().map(|c| c.values.len()).unwrap_or(0);
        if columns.is_empty() || rows == 0 {
            return Err(ModelError::EmptyTable);
        }
        if let Some((index, col)) = columns
            .iter()
            .enumerate()
            .find(|(_, c)| c.values.len() != rows)
        {
            return Err(ModelError::RaggedTable {
                column: index,
                expected: rows,
                found: col.values.len(),
            });
        }
        Ok(Table { columns, rows })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows
    }
}

/// Where a distribution came from; only cell-level ones must sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionContext {
    Cell,
    Column,
    PostBeliefSharing,
}

/// Concept → probability (or unnormalized score) for a cell, column or candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptDistribution {
    pub entries: BTreeMap<Concept, f64>,
    pub context: DistributionContext,
}

impl ConceptDistribution {
    pub fn new(context: DistributionContext) -> Self {
        ConceptDistribution {
            entries: BTreeMap::new(),
            context,
        }
    }

    pub fn get(&self, concept: &str) -> f64 {
        self.entries.get(concept).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Entries sorted by descending value, ties broken by label.
    pub fn ranked(&self) -> Vec<(Concept, f64)> {
        let mut out: Vec<_> = self.entries.iter().map(|(c, &p)| (c.clone(), p)).collect();
        sort_ranked(&mut out);
        out
    }
}

/// Grid on which scores are compared, so that mathematically equal scores
/// computed along different float paths still tie.
pub const SCORE_RESOLUTION: f64 = 1e-10;

/// Comparison key of a score; non-finite scores keep their value.
pub fn score_key(score: f64) -> f64 {
    (score / SCORE_RESOLUTION).round()
}

/// Sorts descending by score; scores equal at [`SCORE_RESOLUTION`] are
/// ordered by concept label.
pub fn sort_ranked(items: &mut [(Concept, f64)]) {
    items.sort_by(|a, b| {
        score_key(b.1)
            .total_cmp(&score_key(a.1))
            .then_with(|| a.0.cmp(&b.0))
    });
}
