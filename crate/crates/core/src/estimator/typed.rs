//! Numeric and mixed columns: co-occurrence scoping, then index scoring.

use std::collections::{BTreeMap, BTreeSet};

use super::{ColumnCandidates, EstimatorConfig, Indexes};
use crate::error::EstimateError;
use crate::model::{parse_number, sort_ranked, ColumnKind, Concept};
use crate::util;

/// Softmax of each categorical column's log scores, averaged over columns.
pub fn given_distribution(categorical: &[&ColumnCandidates]) -> Vec<(Concept, f64)> {
    let mut acc: BTreeMap<Concept, f64> = BTreeMap::new();
    let cols: Vec<&&ColumnCandidates> = categorical.iter().filter(|c| !c.ranked.is_empty()).collect();
    for col in &cols {
        let top = col.ranked[0].1;
        let weights: Vec<f64> = col.ranked.iter().map(|(_, s)| (s - top).exp()).collect();
        let z: f64 = weights.iter().sum();
        for ((c, _), w) in col.ranked.iter().zip(weights) {
            *acc.entry(c.clone()).or_default() += w / z / cols.len() as f64;
        }
    }
    let mut out: Vec<(Concept, f64)> = acc.into_iter().collect();
    sort_ranked(&mut out);
    out
}

/// Concepts searched for a numeric or mixed column: the top co-occurring
/// targets accepted by `eligible`, or every eligible concept when there is
/// no categorical evidence to scope by.
pub fn search_scope(
    categorical: &[&ColumnCandidates],
    indexes: &Indexes,
    config: &EstimatorConfig,
    all_eligible: &BTreeSet<Concept>,
) -> BTreeSet<Concept> {
    let given = given_distribution(categorical);
    if given.is_empty() {
        return all_eligible.clone();
    }
    let scope: BTreeSet<Concept> = indexes
        .cooccur
        .top_cooccurring(&given, config.numeric_scope_k, |c| all_eligible.contains(c))
        .into_iter()
        .map(|(c, _)| c)
        .collect();
    if scope.is_empty() {
        all_eligible.clone()
    } else {
        scope
    }
}

pub fn numeric_concepts(indexes: &Indexes) -> BTreeSet<Concept> {
    indexes.numeric.concepts().cloned().collect()
}

pub fn pattern_concepts(indexes: &Indexes) -> BTreeSet<Concept> {
    indexes.pattern.concepts()
}

fn into_candidates(column_index: usize, kind: ColumnKind, scores: Vec<(Concept, f64)>, top_k: usize) -> ColumnCandidates {
    let mut ranked: Vec<(Concept, f64)> = scores
        .into_iter()
        .filter(|(_, s)| *s > 0.0)
        .map(|(c, s)| (c, s.ln()))
        .collect();
    sort_ranked(&mut ranked);
    ranked.truncate(top_k);
    ColumnCandidates {
        column_index,
        kind,
        ranked,
        validation_scale: 1.0,
    }
}

/// Ranks `scope` by the interval score of the column's [min, max].
pub fn numeric_column_candidates<S: AsRef<str>>(
    values: &[S],
    column_index: usize,
    scope: &BTreeSet<Concept>,
    indexes: &Indexes,
    config: &EstimatorConfig,
) -> Result<ColumnCandidates, EstimateError> {
    let (lo, hi) = values
        .iter()
        .filter_map(|v| parse_number(v.as_ref()))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if lo > hi {
        return Err(EstimateError::NoParseableValues);
    }
    let scores = indexes
        .numeric
        .score_concepts(lo, hi, Some(scope))
        .expect("range from min/max is ordered");
    let out = into_candidates(column_index, ColumnKind::Numeric, scores, config.top_k);
    if out.ranked.is_empty() {
        return Err(EstimateError::NoEvidence);
    }
    Ok(out)
}

/// Ranks `scope` by the share of sampled values matching the concept's leaves.
pub fn mixed_column_candidates<S: AsRef<str>>(
    values: &[S],
    column_index: usize,
    scope: &BTreeSet<Concept>,
    indexes: &Indexes,
    config: &EstimatorConfig,
) -> Result<ColumnCandidates, EstimateError> {
    let seed = util::derive_seed(config.seed, "mixed", column_index as u64);
    let scores = indexes.pattern.score_concepts(values, Some(scope), seed);
    let out = into_candidates(column_index, ColumnKind::Mixed, scores, config.top_k);
    if out.ranked.is_empty() {
        return Err(EstimateError::NoRoutedLeaves);
    }
    Ok(out)
}
