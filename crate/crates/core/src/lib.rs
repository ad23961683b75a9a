//! Column concept annotation from reference tables and knowledge-graph
//! triples.

pub mod belief;
pub mod cooccur;
pub mod entity_index;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod numeric_index;
pub mod output;
pub mod pattern;
mod persist;
pub mod pipeline;
pub mod table;
pub mod util;

pub use belief::{ConceptRelations, RelationsBuilder, SharedBelief};
pub use cooccur::{CooccurrenceIndex, TupleValue};
pub use entity_index::{ConceptCount, EntityConceptIndex};
pub use error::Error;
pub use estimator::{annotate, AnnotationResult, ColumnAnnotation, ColumnCandidates, EstimatorConfig, Indexes};
pub use ingest::{CorpusManifest, IndexRecord, SourceKind, SourceSpec};
pub use model::{ColumnKind, Column, Concept, ConceptDistribution, SourceId, Table};
pub use numeric_index::NumericIntervalIndex;
pub use pattern::{PatternTree, SymbolSignature};
pub use output::OutputFormat;
pub use pipeline::{build_index, load_indexes, BuildSummary, IndexMeta};
