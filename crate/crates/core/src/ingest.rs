//! Corpus ingestion: reference tables and knowledge-graph triples become
//! [`IndexRecord`]s, from which every index is built.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::IngestError;
use crate::estimator::EstimatorConfig;
use crate::model::{classify_column, normalize_entity, parse_number, ColumnKind, Concept, SourceId};
use crate::table::{parse_delimited, RawTable};
use crate::util;

pub const DEFAULT_MIN_CONCEPT_FREQUENCY: u64 = 100;
/// Sampled values carried by one mixed-type column record.
pub const PATTERN_SAMPLE_VALUES: usize = 1000;
/// Row tuples kept per (file, column pair).
pub const TUPLE_SAMPLE_CAP: usize = 10_000;
/// Numeric knowledge-graph objects of one predicate grouped into one range.
pub const KG_NUMERIC_BATCH: usize = 100;

const TYPE_OF: &str = "typeof";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Tables,
    Kg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub id: SourceId,
    pub kind: SourceKind,
    /// A file, or a directory whose files are all ingested.
    pub path: PathBuf,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

fn default_min_frequency() -> u64 {
    DEFAULT_MIN_CONCEPT_FREQUENCY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusManifest {
    pub sources: Vec<SourceSpec>,
    #[serde(default = "default_min_frequency")]
    pub min_concept_frequency: u64,
    #[serde(default)]
    pub seed: u64,
    /// Synonym sets, one tab-separated set per line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synonyms: Option<PathBuf>,
    /// `parent<TAB>child` lines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hierarchy: Option<PathBuf>,
    /// `token v1 ... vD` lines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    /// Estimator defaults stored with the index; command-line flags override them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorConfig>,
}

impl CorpusManifest {
    pub fn new(sources: Vec<SourceSpec>) -> Self {
        CorpusManifest {
            sources,
            min_concept_frequency: DEFAULT_MIN_CONCEPT_FREQUENCY,
            seed: 0,
            synonyms: None,
            hierarchy: None,
            embeddings: None,
            estimator: None,
        }
    }

    /// Reads a manifest; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest: CorpusManifest = serde_json::from_str(&text)
            .map_err(|e| IngestError::InvalidManifest(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        manifest.resolve_paths(base);
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in &mut self.sources {
            fix(&mut s.path);
        }
        for p in [&mut self.synonyms, &mut self.hierarchy, &mut self.embeddings]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.sources.is_empty() {
            return Err(IngestError::InvalidManifest("at least one source is required".into()));
        }
        let mut seen = HashSet::new();
        for s in &self.sources {
            if !seen.insert(s.id.clone()) {
                return Err(IngestError::InvalidManifest(format!("duplicate source id {}", s.id)));
            }
            if !(s.weight.is_finite() && s.weight > 0.0) {
                return Err(IngestError::InvalidManifest(format!(
                    "source {} weight must be positive, got {}",
                    s.id, s.weight
                )));
            }
        }
        Ok(())
    }

    pub fn kind_of(&self, source: &SourceId) -> Option<SourceKind> {
        self.sources.iter().find(|s| &s.id == source).map(|s| s.kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IndexRecord {
    EntityMention {
        source: SourceId,
        entity: String,
        concept: Concept,
    },
    NumericColumnRange {
        source: SourceId,
        concept: Concept,
        min: f64,
        max: f64,
    },
    PatternColumn {
        source: SourceId,
        concept: Concept,
        values: Vec<String>,
    },
    /// One corpus column pair; feeds pair and concept frequencies.
    ColumnPair {
        source: SourceId,
        concept_a: Concept,
        concept_b: Concept,
    },
    TupleMention {
        source: SourceId,
        concept_a: Concept,
        concept_b: Concept,
        value_a: String,
        value_b: String,
    },
}

impl IndexRecord {
    pub fn source(&self) -> &SourceId {
        match self {
            IndexRecord::EntityMention { source, .. }
            | IndexRecord::NumericColumnRange { source, .. }
            | IndexRecord::PatternColumn { source, .. }
            | IndexRecord::ColumnPair { source, .. }
            | IndexRecord::TupleMention { source, .. } => source,
        }
    }
}

/// Records from one reference table.
pub fn ingest_table(raw: &RawTable, source: &SourceId, seed: u64) -> Vec<IndexRecord> {
    let mut records = Vec::new();
    // (column index, concept, kind) for every usable column
    let mut usable = Vec::new();
    for (idx, (header, values)) in raw.headers.iter().zip(&raw.columns).enumerate() {
        let Some(concept) = Concept::new(header) else {
            continue;
        };
        let Ok(kind) = classify_column(values) else {
            continue;
        };
        match kind {
            ColumnKind::Categorical => {
                for v in values {
                    let entity = normalize_entity(v);
                    if !entity.is_empty() {
                        records.push(IndexRecord::EntityMention {
                            source: source.clone(),
                            entity,
                            concept: concept.clone(),
                        });
                    }
                }
            }
            ColumnKind::Numeric => {
                let (min, max) = values
                    .iter()
                    .filter_map(|v| parse_number(v))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                        (lo.min(x), hi.max(x))
                    });
                records.push(IndexRecord::NumericColumnRange {
                    source: source.clone(),
                    concept: concept.clone(),
                    min,
                    max,
                });
            }
            ColumnKind::Mixed => {
                let cells: Vec<String> = values
                    .iter()
                    .map(|v| normalize_entity(v))
                    .filter(|v| !v.is_empty())
                    .collect();
                let mut rng = util::rng(seed, "pattern-sample", idx as u64);
                let picked = util::sample_indices(cells.len(), PATTERN_SAMPLE_VALUES, &mut rng);
                records.push(IndexRecord::PatternColumn {
                    source: source.clone(),
                    concept: concept.clone(),
                    values: picked.into_iter().map(|i| cells[i].clone()).collect(),
                });
            }
        }
        usable.push((idx, concept, kind));
    }

    for (a_pos, (i, ca, ka)) in usable.iter().enumerate() {
        for (j, cb, kb) in &usable[a_pos + 1..] {
            if *ka != ColumnKind::Categorical && *kb != ColumnKind::Categorical {
                continue;
            }
            records.push(IndexRecord::ColumnPair {
                source: source.clone(),
                concept_a: ca.clone(),
                concept_b: cb.clone(),
            });
            let rows: Vec<(String, String)> = raw.columns[*i]
                .iter()
                .zip(&raw.columns[*j])
                .map(|(a, b)| (normalize_entity(a), normalize_entity(b)))
                .filter(|(a, b)| !a.is_empty() && !b.is_empty())
                .collect();
            let mut rng = util::rng(seed, "tuple-sample", (*i as u64) << 32 | *j as u64);
            for r in util::sample_indices(rows.len(), TUPLE_SAMPLE_CAP, &mut rng) {
                let (value_a, value_b) = rows[r].clone();
                records.push(IndexRecord::TupleMention {
                    source: source.clone(),
                    concept_a: ca.clone(),
                    concept_b: cb.clone(),
                    value_a,
                    value_b,
                });
            }
        }
    }
    records
}

/// Reads and ingests one table file. Sampling is seeded by the corpus seed
/// and the file content, so output depends only on bytes and manifest.
pub fn ingest_table_file(path: &Path, source: &SourceId, seed: u64) -> Result<Vec<IndexRecord>, IngestError> {
    let bytes = fs::read(path).map_err(|e| IngestError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let text = String::from_utf8(bytes).map_err(|e| IngestError::MalformedFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let raw = parse_delimited(&text, path)?;
    let file_seed = util::derive_seed(seed, &util::checksum(text.as_bytes()), 0);
    Ok(ingest_table(&raw, source, file_seed))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KgIngest {
    pub records: Vec<IndexRecord>,
    pub malformed_lines: usize,
}

/// Ingests tab-separated `subject predicate object` triples.
pub fn ingest_kg(text: &str, source: &SourceId) -> KgIngest {
    let mut out = KgIngest::default();
    let mut numeric: BTreeMap<Concept, Vec<f64>> = BTreeMap::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            out.malformed_lines += 1;
            continue;
        }
        let subject = normalize_entity(fields[0]);
        let predicate = normalize_entity(fields[1]);
        let object = normalize_entity(fields[2]);
        if subject.is_empty() || predicate.is_empty() || object.is_empty() {
            out.malformed_lines += 1;
            continue;
        }
        if predicate == TYPE_OF {
            out.records.push(IndexRecord::EntityMention {
                source: source.clone(),
                entity: subject,
                concept: Concept::from_normalized(object),
            });
            continue;
        }
        let concept = Concept::from_normalized(predicate);
        if let Some(x) = parse_number(&object) {
            let batch = numeric.entry(concept.clone()).or_default();
            batch.push(x);
            if batch.len() == KG_NUMERIC_BATCH {
                out.records.push(range_record(source, &concept, batch));
                batch.clear();
            }
        }
        out.records.push(IndexRecord::EntityMention {
            source: source.clone(),
            entity: object,
            concept,
        });
    }
    for (concept, batch) in numeric {
        if !batch.is_empty() {
            out.records.push(range_record(source, &concept, &batch));
        }
    }
    out
}

fn range_record(source: &SourceId, concept: &Concept, values: &[f64]) -> IndexRecord {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    IndexRecord::NumericColumnRange {
        source: source.clone(),
        concept: concept.clone(),
        min,
        max,
    }
}

pub fn ingest_kg_file(path: &Path, source: &SourceId) -> Result<KgIngest, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(ingest_kg(&text, source))
}

/// Lists the files of a source path in a stable order.
pub fn source_files(path: &Path) -> Result<Vec<PathBuf>, IngestError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        return Err(IngestError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "source path does not exist"),
        });
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(|e| IngestError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        if entry.file_type().is_file() {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SourceReport {
    pub id: String,
    pub files: usize,
    pub skipped_files: Vec<String>,
    pub malformed_lines: usize,
    pub records: usize,
}

/// All records of one source, plus what was skipped on the way.
#[derive(Debug, Clone)]
pub struct IngestedSource {
    pub spec: SourceSpec,
    pub records: Vec<IndexRecord>,
    pub report: SourceReport,
}

/// Ingests every file of a source. Unparseable files are skipped with a warning.
pub fn ingest_source(spec: &SourceSpec, seed: u64) -> Result<IngestedSource, IngestError> {
    use rayon::prelude::*;

    let files = source_files(&spec.path)?;
    let results: Vec<(PathBuf, Result<KgIngest, IngestError>)> = files
        .par_iter()
        .map(|f| {
            let r = match spec.kind {
                SourceKind::Tables => ingest_table_file(f, &spec.id, seed).map(|records| KgIngest {
                    records,
                    malformed_lines: 0,
                }),
                SourceKind::Kg => ingest_kg_file(f, &spec.id),
            };
            (f.clone(), r)
        })
        .collect();

    let mut report = SourceReport {
        id: spec.id.to_string(),
        files: files.len(),
        ..SourceReport::default()
    };
    let mut records = Vec::new();
    for (path, r) in results {
        match r {
            Ok(k) => {
                report.malformed_lines += k.malformed_lines;
                records.extend(k.records);
            }
            Err(e @ (IngestError::MalformedFile { .. } | IngestError::Io { .. })) => {
                warn!("skipping {}: {e}", path.display());
                report.skipped_files.push(path.display().to_string());
            }
            Err(e) => return Err(e),
        }
    }
    report.records = records.len();
    Ok(IngestedSource {
        spec: spec.clone(),
        records,
        report,
    })
}

/// Knowledge-graph concepts are always admitted; table concepts need at
/// least `min_concept_frequency` mentions (a cell for categorical columns,
/// a column for numeric and mixed ones).
pub fn build_concept_universe(
    sources: &[IngestedSource],
    min_concept_frequency: u64,
) -> Result<BTreeSet<Concept>, IngestError> {
    let mut universe = BTreeSet::new();
    let mut table_mentions: HashMap<&Concept, u64> = HashMap::new();
    for s in sources {
        for r in &s.records {
            let concept = match r {
                IndexRecord::EntityMention { concept, .. }
                | IndexRecord::NumericColumnRange { concept, .. }
                | IndexRecord::PatternColumn { concept, .. } => concept,
                IndexRecord::ColumnPair { .. } | IndexRecord::TupleMention { .. } => continue,
            };
            match s.spec.kind {
                SourceKind::Kg => {
                    universe.insert(concept.clone());
                }
                SourceKind::Tables => *table_mentions.entry(concept).or_default() += 1,
            }
        }
    }
    universe.extend(
        table_mentions
            .into_iter()
            .filter(|&(_, n)| n >= min_concept_frequency)
            .map(|(c, _)| c.clone()),
    );
    if universe.is_empty() {
        return Err(IngestError::EmptyUniverse);
    }
    Ok(universe)
}

/// Drops records whose concepts fall outside the universe.
pub fn retain_universe(records: &mut Vec<IndexRecord>, universe: &BTreeSet<Concept>) {
    records.retain(|r| match r {
        IndexRecord::EntityMention { concept, .. }
        | IndexRecord::NumericColumnRange { concept, .. }
        | IndexRecord::PatternColumn { concept, .. } => universe.contains(concept),
        IndexRecord::ColumnPair {
            concept_a, concept_b, ..
        }
        | IndexRecord::TupleMention {
            concept_a, concept_b, ..
        } => universe.contains(concept_a) && universe.contains(concept_b),
    });
}
