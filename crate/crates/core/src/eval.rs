//! Synonym-aware top-k accuracy over a set of annotated tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::belief::{ConceptRelations, RelationsBuilder};
use crate::error::EvalError;
use crate::estimator::{annotate, EstimatorConfig, Indexes};
use crate::model::Concept;
use crate::table::read_table;

/// Ranks scored; accuracy is reported cumulatively for 1..=MAX_K.
pub const MAX_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub column: usize,
    pub concept: Concept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvaluationCase {
    pub table: PathBuf,
    pub ground_truth: Vec<GroundTruth>,
    #[serde(default)]
    pub synonyms: Vec<Vec<Concept>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSet {
    pub cases: Vec<EvaluationCase>,
}

impl CaseSet {
    /// Reads a case file; table paths are relative to its directory.
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut set: CaseSet = serde_json::from_str(&text).map_err(|e| EvalError::InvalidCases(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut set.cases {
            if c.table.is_relative() {
                c.table = base.join(&c.table);
            }
        }
        Ok(set)
    }
}

/// Synonym sets from a file of tab-separated sets, one per line.
pub fn load_synonyms(path: &Path) -> Result<String, EvalError> {
    fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Accuracy {
    pub columns: usize,
    pub top1: f64,
    pub top2: f64,
    pub top3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ColumnOutcome {
    pub table: String,
    pub column: usize,
    pub truth: Concept,
    pub predicted: Vec<Concept>,
    /// 1-based rank of the first correct prediction within the top three.
    pub rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EvaluationReport {
    pub cases: usize,
    pub failed_cases: usize,
    pub accuracy: Accuracy,
    pub per_kind: BTreeMap<String, Accuracy>,
    pub details: Vec<ColumnOutcome>,
    pub wall_clock_seconds: f64,
}

#[derive(Default)]
struct Tally {
    columns: usize,
    hits: [usize; MAX_K],
}

impl Tally {
    fn add(&mut self, rank: Option<usize>) {
        self.columns += 1;
        if let Some(r) = rank {
            for k in r..=MAX_K {
                self.hits[k - 1] += 1;
            }
        }
    }

    fn accuracy(&self) -> Accuracy {
        let f = |h: usize| if self.columns == 0 { 0.0 } else { h as f64 / self.columns as f64 };
        Accuracy {
            columns: self.columns,
            top1: f(self.hits[0]),
            top2: f(self.hits[1]),
            top3: f(self.hits[2]),
        }
    }
}

fn is_correct(pred: &Concept, truth: &Concept, global: &ConceptRelations, local: &ConceptRelations) -> bool {
    pred == truth || global.are_synonyms(pred, truth) || local.are_synonyms(pred, truth)
}

/// Annotates each case and scores every ground-truth column. A case that
/// cannot be read or annotated counts all its columns as incorrect.
pub fn evaluate(
    cases: &CaseSet,
    indexes: &Indexes,
    config: &EstimatorConfig,
    synonyms: &str,
) -> Result<EvaluationReport, EvalError> {
    if cases.cases.is_empty() {
        return Err(EvalError::EmptyCaseSet);
    }
    let start = Instant::now();
    let global = RelationsBuilder::new()
        .synonyms_text(synonyms)
        .build()
        .map_err(|e| EvalError::InvalidCases(e.to_string()))?;
    let mut overall = Tally::default();
    let mut kinds: BTreeMap<String, Tally> = BTreeMap::new();
    let mut details = Vec::new();
    let mut failed = 0;
    for case in &cases.cases {
        let mut local = RelationsBuilder::new();
        for set in &case.synonyms {
            local = local.synonyms(set.iter().cloned());
        }
        let local = local.build().map_err(|e| EvalError::InvalidCases(e.to_string()))?;
        let table_name = case.table.display().to_string();
        let outcome = read_table(&case.table)
            .map_err(|e| e.to_string())
            .and_then(|t| annotate(&t, indexes, config).map_err(|e| e.to_string()));
        let result = match outcome {
            Ok(r) => r,
            Err(e) => {
                failed += 1;
                for gt in &case.ground_truth {
                    overall.add(None);
                    kinds.entry("unknown".into()).or_default().add(None);
                    details.push(ColumnOutcome {
                        table: table_name.clone(),
                        column: gt.column,
                        truth: gt.concept.clone(),
                        predicted: vec![],
                        rank: None,
                        error: Some(e.clone()),
                    });
                }
                continue;
            }
        };
        for gt in &case.ground_truth {
            let Some(col) = result.columns.get(gt.column) else {
                overall.add(None);
                kinds.entry("unknown".into()).or_default().add(None);
                details.push(ColumnOutcome {
                    table: table_name.clone(),
                    column: gt.column,
                    truth: gt.concept.clone(),
                    predicted: vec![],
                    rank: None,
                    error: Some(format!("table has no column {}", gt.column)),
                });
                continue;
            };
            let predicted: Vec<Concept> = col.ranking().into_iter().take(MAX_K).cloned().collect();
            let rank = predicted
                .iter()
                .position(|p| is_correct(p, &gt.concept, &global, &local))
                .map(|i| i + 1);
            overall.add(rank);
            let kind = col.kind.map_or("unknown", |k| k.as_str());
            kinds.entry(kind.into()).or_default().add(rank);
            details.push(ColumnOutcome {
                table: table_name.clone(),
                column: gt.column,
                truth: gt.concept.clone(),
                predicted,
                rank,
                error: col.unannotated.clone(),
            });
        }
    }
    Ok(EvaluationReport {
        cases: cases.cases.len(),
        failed_cases: failed,
        accuracy: overall.accuracy(),
        per_kind: kinds.into_iter().map(|(k, t)| (k, t.accuracy())).collect(),
        details,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}
