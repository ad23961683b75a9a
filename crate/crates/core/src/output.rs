//! Annotation output as JSON lines or TSV.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::estimator::{AnnotationResult, ColumnAnnotation, ScoredConcept};
use crate::model::{ColumnKind, Concept};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Jsonl,
    Tsv,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "jsonl" => Ok(OutputFormat::Jsonl),
            "tsv" => Ok(OutputFormat::Tsv),
            other => Err(format!("unknown format {other:?} (expected jsonl or tsv)")),
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Record<'a> {
    column_index: usize,
    header: Option<&'a str>,
    kind: Option<ColumnKind>,
    candidates: &'a [ScoredConcept],
    joint_choice: Option<&'a Concept>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unannotated: Option<&'a str>,
}

fn clean(s: &str) -> String {
    s.chars().map(|c| if c == '\t' || c == '\n' || c == '\r' { ' ' } else { c }).collect()
}

fn reported(col: &ColumnAnnotation, top_k: usize) -> &[ScoredConcept] {
    &col.candidates[..col.candidates.len().min(top_k)]
}

/// One record per column, keeping `top_k` candidates each.
pub fn render(result: &AnnotationResult, top_k: usize, format: OutputFormat) -> String {
    let mut out = String::new();
    match format {
        OutputFormat::Jsonl => {
            for col in &result.columns {
                let rec = Record {
                    column_index: col.column_index,
                    header: col.header.as_deref(),
                    kind: col.kind,
                    candidates: reported(col, top_k),
                    joint_choice: col.joint_choice.as_ref(),
                    unannotated: col.unannotated.as_deref(),
                };
                out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
                out.push('\n');
            }
        }
        OutputFormat::Tsv => {
            out.push_str("column_index\theader\tkind\tjoint_choice\tcandidates\n");
            for col in &result.columns {
                let cands: Vec<String> = reported(col, top_k)
                    .iter()
                    .map(|s| format!("{}={}", s.concept, s.log_score))
                    .collect();
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    col.column_index,
                    clean(col.header.as_deref().unwrap_or("")),
                    col.kind.map_or("", ColumnKind::as_str),
                    col.joint_choice.as_ref().map_or("", Concept::label),
                    cands.join("|"),
                )
                .expect("write to string");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result() -> AnnotationResult {
        let c = |l: &str| Concept::new(l).unwrap();
        AnnotationResult {
            columns: vec![
                ColumnAnnotation {
                    column_index: 0,
                    header: Some("Where\tnow".into()),
                    kind: Some(ColumnKind::Categorical),
                    candidates: vec![
                        ScoredConcept {
                            concept: c("city"),
                            log_score: -0.5,
                        },
                        ScoredConcept {
                            concept: c("town"),
                            log_score: -2.0,
                        },
                    ],
                    joint_choice: Some(c("city")),
                    unannotated: None,
                },
                ColumnAnnotation {
                    column_index: 1,
                    header: None,
                    kind: Some(ColumnKind::Numeric),
                    candidates: vec![],
                    joint_choice: None,
                    unannotated: Some("no evidence".into()),
                },
            ],
            joint_score: Some(-0.5),
        }
    }

    #[test]
    fn jsonl() {
        let text = render(&result(), 1, OutputFormat::Jsonl);
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0]["candidates"].as_array().unwrap().len(), 1);
        assert_eq!(lines[0]["candidates"][0]["concept"], "city");
        assert_eq!(lines[0]["candidates"][0]["logScore"], -0.5);
        assert_eq!(lines[0]["jointChoice"], "city");
        assert_eq!(lines[1]["jointChoice"], serde_json::Value::Null);
        assert_eq!(lines[1]["unannotated"], "no evidence");
    }

    #[test]
    fn tsv() {
        let text = render(&result(), 3, OutputFormat::Tsv);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "0\tWhere now\tcategorical\tcity\tcity=-0.5|town=-2");
        assert_eq!(lines[2], "1\t\tnumeric\t\t");
        assert_eq!("tsv".parse::<OutputFormat>(), Ok(OutputFormat::Tsv));
        assert!("xml".parse::<OutputFormat>().is_err());
    }
}
