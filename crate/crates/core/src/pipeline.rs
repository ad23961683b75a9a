//! Index build from a corpus manifest, and loading a built index directory.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use crate::belief::{ConceptRelations, RelationsBuilder};
use crate::cooccur::CooccurrenceIndex;
use crate::entity_index::EntityConceptIndex;
use crate::error::{BeliefError, Error, IndexError};
use crate::estimator::{EstimatorConfig, Indexes};
use crate::ingest::{self, CorpusManifest, IndexRecord, SourceKind, SourceReport};
use crate::model::{Concept, SourceId};
use crate::numeric_index::NumericIntervalIndex;
use crate::pattern::PatternTree;
use crate::persist;
use crate::util;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IndexSource {
    pub id: SourceId,
    pub kind: SourceKind,
    pub weight: f64,
}

/// Contents of `index.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IndexMeta {
    pub format_version: u32,
    pub seed: u64,
    pub min_concept_frequency: u64,
    pub sources: Vec<IndexSource>,
    pub universe_size: usize,
    pub universe_sha256: String,
    pub estimator: EstimatorConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RecordCounts {
    pub entity_mentions: usize,
    pub numeric_ranges: usize,
    pub pattern_columns: usize,
    pub column_pairs: usize,
    pub tuple_mentions: usize,
}

impl RecordCounts {
    fn of(records: &[IndexRecord]) -> Self {
        let mut c = RecordCounts::default();
        for r in records {
            match r {
                IndexRecord::EntityMention { .. } => c.entity_mentions += 1,
                IndexRecord::NumericColumnRange { .. } => c.numeric_ranges += 1,
                IndexRecord::PatternColumn { .. } => c.pattern_columns += 1,
                IndexRecord::ColumnPair { .. } => c.column_pairs += 1,
                IndexRecord::TupleMention { .. } => c.tuple_mentions += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BuildSummary {
    pub sources: Vec<SourceReport>,
    pub universe_size: usize,
    /// Records kept after filtering to the universe.
    pub records: RecordCounts,
    pub entities: usize,
    pub numeric_concepts: usize,
    pub pattern_leaves: usize,
    pub concept_pairs: usize,
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| {
        crate::error::IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

/// Builds concept relations from the manifest's optional resource files.
pub fn load_relations(manifest: &CorpusManifest) -> Result<ConceptRelations, Error> {
    let mut b = RelationsBuilder::new();
    if let Some(p) = &manifest.synonyms {
        b = b.synonyms_text(&read_text(p)?);
    }
    if let Some(p) = &manifest.hierarchy {
        b = b.hierarchy_text(&read_text(p)?)?;
    }
    if let Some(p) = &manifest.embeddings {
        b = b.embeddings_text(&read_text(p)?)?;
    }
    b.build().map_err(|e: BeliefError| e.into())
}

/// Estimator settings stored with the index: the manifest's section (or the
/// defaults), its seed, and each source's weight unless set there already.
pub fn stored_config(manifest: &CorpusManifest) -> EstimatorConfig {
    let mut config = manifest.estimator.clone().unwrap_or_default();
    config.seed = manifest.seed;
    for s in &manifest.sources {
        config.source_weights.entry(s.id.clone()).or_insert(s.weight);
    }
    config
}

/// Ingests the corpus and writes every index under `out`.
pub fn build_index(manifest: &CorpusManifest, out: &Path) -> Result<BuildSummary, Error> {
    manifest.validate()?;
    let config = stored_config(manifest);
    config.validate()?;
    let relations = load_relations(manifest)?;

    let mut ingested = Vec::with_capacity(manifest.sources.len());
    for spec in &manifest.sources {
        let s = ingest::ingest_source(spec, manifest.seed)?;
        info!("source {}: {} files, {} records", spec.id, s.report.files, s.records.len());
        ingested.push(s);
    }
    let universe = ingest::build_concept_universe(&ingested, manifest.min_concept_frequency)?;
    let reports: Vec<SourceReport> = ingested.iter().map(|s| s.report.clone()).collect();
    let mut records: Vec<IndexRecord> = ingested.into_iter().flat_map(|s| s.records).collect();
    ingest::retain_universe(&mut records, &universe);

    let source_ids: Vec<SourceId> = manifest.sources.iter().map(|s| s.id.clone()).collect();
    let indexes = Indexes {
        entity: EntityConceptIndex::build(source_ids, &records),
        numeric: NumericIntervalIndex::build(&records),
        pattern: PatternTree::build(&records, manifest.seed)?,
        cooccur: CooccurrenceIndex::build(&records),
        relations,
    };

    let universe_text = universe_text(&universe);
    persist_indexes(&indexes, out)?;
    persist::write_file(&out.join("universe.txt"), universe_text.as_bytes())?;
    let meta = IndexMeta {
        format_version: FORMAT_VERSION,
        seed: manifest.seed,
        min_concept_frequency: manifest.min_concept_frequency,
        sources: manifest
            .sources
            .iter()
            .map(|s| IndexSource {
                id: s.id.clone(),
                kind: s.kind,
                weight: s.weight,
            })
            .collect(),
        universe_size: universe.len(),
        universe_sha256: util::checksum(universe_text.as_bytes()),
        estimator: config,
    };
    persist::write_json(&out.join("index.json"), &meta)?;

    let summary = BuildSummary {
        sources: reports,
        universe_size: universe.len(),
        records: RecordCounts::of(&records),
        entities: indexes.entity.sources().map(|s| indexes.entity.entity_count(s)).sum(),
        numeric_concepts: indexes.numeric.concepts().count(),
        pattern_leaves: indexes.pattern.leaves().len(),
        concept_pairs: indexes.cooccur.pairs().count(),
    };
    Ok(summary)
}

fn universe_text(universe: &BTreeSet<Concept>) -> String {
    let mut text = String::new();
    for c in universe {
        writeln!(text, "{c}").expect("write to string");
    }
    text
}

/// Writes the four indexes and the relation files into their subdirectories.
pub fn persist_indexes(indexes: &Indexes, out: &Path) -> Result<(), IndexError> {
    indexes.entity.persist(&out.join("entity"))?;
    indexes.numeric.persist(&out.join("numeric"))?;
    indexes.pattern.persist(&out.join("pattern"))?;
    indexes.cooccur.persist(&out.join("cooccur"))?;
    indexes.relations.persist(&out.join("belief"))
}

pub fn load_indexes(dir: &Path) -> Result<(Indexes, IndexMeta), IndexError> {
    let meta_path = dir.join("index.json");
    let meta: IndexMeta = persist::read_json(&meta_path)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(IndexError::corrupt(
            &meta_path,
            format!("unsupported format version {}", meta.format_version),
        ));
    }
    let universe_path = dir.join("universe.txt");
    persist::read_verified(&universe_path, &meta.universe_sha256)?;
    let indexes = Indexes {
        entity: EntityConceptIndex::load(&dir.join("entity"))?,
        numeric: NumericIntervalIndex::load(&dir.join("numeric"))?,
        pattern: PatternTree::load(&dir.join("pattern"))?,
        cooccur: CooccurrenceIndex::load(&dir.join("cooccur"))?,
        relations: ConceptRelations::load(&dir.join("belief"))?,
    };
    for s in &meta.sources {
        indexes.entity.lookup("", &s.id)?;
    }
    Ok((indexes, meta))
}
