//! Column annotation: categorical columns first, then scoped numeric and
//! mixed columns, then tuple validation and a joint table-level choice.

mod categorical;
mod config;
mod joint;
mod typed;

#[cfg(test)]
mod tests;

use rayon::prelude::*;
use serde::Serialize;

pub use categorical::{categorical_column_candidates, cell_distribution};
pub use config::EstimatorConfig;
pub use joint::{joint_rerank, tuple_validate, JOINT_BUDGET};
pub use typed::{given_distribution, mixed_column_candidates, numeric_column_candidates, search_scope};

use crate::belief::ConceptRelations;
use crate::cooccur::CooccurrenceIndex;
use crate::entity_index::EntityConceptIndex;
use crate::error::EstimateError;
use crate::model::{classify_column, ColumnKind, Concept, Table};
use crate::numeric_index::NumericIntervalIndex;
use crate::pattern::PatternTree;

/// Everything the estimator reads; immutable once loaded.
#[derive(Debug, Default)]
pub struct Indexes {
    pub entity: EntityConceptIndex,
    pub numeric: NumericIntervalIndex,
    pub pattern: PatternTree,
    pub cooccur: CooccurrenceIndex,
    pub relations: ConceptRelations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnCandidates {
    pub column_index: usize,
    pub kind: ColumnKind,
    /// (concept, log score), descending; ties by label.
    pub ranked: Vec<(Concept, f64)>,
    /// Multiplier of `ln(matches)` in tuple validation: the number of
    /// entity-source terms behind a categorical score, 1 otherwise.
    pub validation_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoredConcept {
    pub concept: Concept,
    pub log_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ColumnAnnotation {
    pub column_index: usize,
    pub header: Option<String>,
    pub kind: Option<ColumnKind>,
    pub candidates: Vec<ScoredConcept>,
    pub joint_choice: Option<Concept>,
    /// Why the column has no candidates.
    pub unannotated: Option<String>,
}

impl ColumnAnnotation {
    /// Joint choice first, then the remaining candidates in order.
    pub fn ranking(&self) -> Vec<&Concept> {
        let mut out: Vec<&Concept> = self.joint_choice.iter().collect();
        out.extend(self.candidates.iter().map(|s| &s.concept).filter(|c| Some(*c) != self.joint_choice.as_ref()));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AnnotationResult {
    pub columns: Vec<ColumnAnnotation>,
    pub joint_score: Option<f64>,
}

/// Annotates every column of `table`. Column failures become unannotated
/// entries; only an invalid configuration fails the call.
pub fn annotate(table: &Table, indexes: &Indexes, config: &EstimatorConfig) -> Result<AnnotationResult, EstimateError> {
    config.validate()?;
    let columns = table.columns();
    let kinds: Vec<Option<ColumnKind>> = columns.iter().map(|c| classify_column(&c.values).ok()).collect();

    let categorical: Vec<Result<ColumnCandidates, EstimateError>> = (0..columns.len())
        .into_par_iter()
        .map(|i| match kinds[i] {
            Some(ColumnKind::Categorical) => categorical_column_candidates(&columns[i].values, i, indexes, config),
            _ => Err(EstimateError::NoEvidence),
        })
        .collect();
    let resolved: Vec<&ColumnCandidates> = categorical.iter().filter_map(|r| r.as_ref().ok()).collect();
    let numeric_scope = search_scope(&resolved, indexes, config, &typed::numeric_concepts(indexes));
    let mixed_scope = search_scope(&resolved, indexes, config, &typed::pattern_concepts(indexes));

    let results: Vec<Result<ColumnCandidates, EstimateError>> = categorical
        .into_par_iter()
        .enumerate()
        .map(|(i, cat)| match kinds[i] {
            Some(ColumnKind::Categorical) => cat,
            Some(ColumnKind::Numeric) => {
                numeric_column_candidates(&columns[i].values, i, &numeric_scope, indexes, config)
            }
            Some(ColumnKind::Mixed) => mixed_column_candidates(&columns[i].values, i, &mixed_scope, indexes, config),
            None => Err(EstimateError::Model(crate::error::ModelError::AllEmpty)),
        })
        .collect();

    let mut annotated: Vec<ColumnCandidates> = results.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    if config.tuple_validation {
        tuple_validate(&mut annotated, table, indexes, config);
    }
    let (pick, score) = joint_rerank(&annotated, indexes, config);

    let mut out: Vec<ColumnAnnotation> = columns
        .iter()
        .enumerate()
        .map(|(i, col)| ColumnAnnotation {
            column_index: i,
            header: col.header.clone(),
            kind: kinds[i],
            candidates: Vec::new(),
            joint_choice: None,
            unannotated: results[i].as_ref().err().map(|e| e.to_string()),
        })
        .collect();
    for (cands, &p) in annotated.iter().zip(&pick) {
        let col = &mut out[cands.column_index];
        col.joint_choice = cands.ranked.get(p).map(|(c, _)| c.clone());
        col.candidates = cands
            .ranked
            .iter()
            .map(|(c, s)| ScoredConcept {
                concept: c.clone(),
                log_score: *s,
            })
            .collect();
    }
    Ok(AnnotationResult {
        columns: out,
        joint_score: (!annotated.is_empty()).then_some(score),
    })
}
