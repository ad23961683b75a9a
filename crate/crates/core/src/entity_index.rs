//! Inverted index: normalized entity → per-source list of (concept, count).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::IndexError;
use crate::ingest::IndexRecord;
use crate::model::{normalize_entity, Concept, SourceId};
use crate::persist;
use crate::util;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptCount {
    pub concept: Concept,
    pub count: u64,
}

type Lists = HashMap<Box<str>, Vec<ConceptCount>>;

/// Each source is its own keyspace; lists are never merged across sources.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntityConceptIndex {
    sources: BTreeMap<SourceId, Lists>,
}

#[derive(Debug, Default)]
pub struct EntityIndexBuilder {
    sources: BTreeMap<SourceId, HashMap<String, HashMap<Concept, u64>>>,
}

impl EntityIndexBuilder {
    /// Registers `sources` up front so that a source without mentions still
    /// answers lookups with empty lists.
    pub fn new(sources: impl IntoIterator<Item = SourceId>) -> Self {
        EntityIndexBuilder {
            sources: sources.into_iter().map(|s| (s, HashMap::new())).collect(),
        }
    }

    pub fn add(&mut self, source: &SourceId, entity: &str, concept: &Concept) {
        let per_source = self.sources.entry(source.clone()).or_default();
        let counts = match per_source.get_mut(entity) {
            Some(c) => c,
            None => per_source.entry(entity.to_string()).or_default(),
        };
        *counts.entry(concept.clone()).or_default() += 1;
    }

    pub fn add_records<'a>(&mut self, records: impl IntoIterator<Item = &'a IndexRecord>) {
        for r in records {
            if let IndexRecord::EntityMention {
                source,
                entity,
                concept,
            } = r
            {
                self.add(source, entity, concept);
            }
        }
    }

    pub fn build(self) -> EntityConceptIndex {
        let sources = self
            .sources
            .into_iter()
            .map(|(id, entities)| {
                let lists = entities
                    .into_iter()
                    .map(|(entity, counts)| {
                        let mut list: Vec<ConceptCount> = counts
                            .into_iter()
                            .map(|(concept, count)| ConceptCount { concept, count })
                            .collect();
                        sort_list(&mut list);
                        (entity.into_boxed_str(), list)
                    })
                    .collect();
                (id, lists)
            })
            .collect();
        EntityConceptIndex { sources }
    }
}

fn sort_list(list: &mut [ConceptCount]) {
    list.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.concept.cmp(&b.concept)));
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    sources: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    id: SourceId,
    lines: u64,
    sha256: String,
}

impl EntityConceptIndex {
    pub fn build<'a>(
        sources: impl IntoIterator<Item = SourceId>,
        records: impl IntoIterator<Item = &'a IndexRecord>,
    ) -> Self {
        let mut b = EntityIndexBuilder::new(sources);
        b.add_records(records);
        b.build()
    }

    /// Exact-match lookup of an already normalized key.
    pub fn lookup(&self, entity: &str, source: &SourceId) -> Result<&[ConceptCount], IndexError> {
        let lists = self
            .sources
            .get(source)
            .ok_or_else(|| IndexError::UnknownSource(source.clone()))?;
        Ok(lists.get(entity).map_or(&[][..], Vec::as_slice))
    }

    /// Normalizes `raw` first.
    pub fn lookup_raw(&self, raw: &str, source: &SourceId) -> Result<&[ConceptCount], IndexError> {
        self.lookup(&normalize_entity(raw), source)
    }

    pub fn sources(&self) -> impl Iterator<Item = &SourceId> {
        self.sources.keys()
    }

    pub fn entity_count(&self, source: &SourceId) -> usize {
        self.sources.get(source).map_or(0, HashMap::len)
    }

    pub fn is_empty(&self) -> bool {
        self.sources.values().all(HashMap::is_empty)
    }

    /// Writes `<dir>/<source>.tsv` files sorted by (entity, concept) plus a manifest.
    pub fn persist(&self, dir: &Path) -> Result<(), IndexError> {
        let mut manifest = Manifest { sources: vec![] };
        for (id, lists) in &self.sources {
            let mut rows: Vec<(&str, &str, u64)> = lists
                .iter()
                .flat_map(|(e, list)| list.iter().map(move |cc| (&**e, cc.concept.label(), cc.count)))
                .collect();
            rows.sort_unstable();
            let mut text = String::new();
            for (e, c, n) in &rows {
                writeln!(text, "{e}\t{c}\t{n}").expect("write to string");
            }
            persist::write_file(&dir.join(format!("{id}.tsv")), text.as_bytes())?;
            manifest.sources.push(ManifestEntry {
                id: id.clone(),
                lines: rows.len() as u64,
                sha256: util::checksum(text.as_bytes()),
            });
        }
        persist::write_json(&dir.join("manifest.json"), &manifest)
    }

    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let manifest: Manifest = persist::read_json(&dir.join("manifest.json"))?;
        let mut interned: HashMap<String, Concept> = HashMap::new();
        let mut sources = BTreeMap::new();
        for entry in manifest.sources {
            let path = dir.join(format!("{}.tsv", entry.id));
            let text = persist::utf8(&path, persist::read_verified(&path, &entry.sha256)?)?;
            let mut lists: Lists = HashMap::new();
            let mut lines = 0u64;
            for (no, line) in text.lines().enumerate() {
                let bad = |why: &str| IndexError::corrupt(&path, format!("line {}: {why}", no + 1));
                let mut parts = line.split('\t');
                let (Some(e), Some(c), Some(n), None) =
                    (parts.next(), parts.next(), parts.next(), parts.next())
                else {
                    return Err(bad("expected 3 tab-separated fields"));
                };
                let count: u64 = n.parse().map_err(|_| bad("count is not an integer"))?;
                if count == 0 || e.is_empty() || c.is_empty() || normalize_entity(c) != c {
                    return Err(bad("invalid entry"));
                }
                let concept = match interned.get(c) {
                    Some(k) => k.clone(),
                    None => {
                        let k = Concept::from_normalized(c.to_string());
                        interned.insert(c.to_string(), k.clone());
                        k
                    }
                };
                let list = match lists.get_mut(e) {
                    Some(l) => l,
                    None => lists.entry(e.into()).or_default(),
                };
                if list.iter().any(|cc| cc.concept == concept) {
                    return Err(bad("duplicate concept for entity"));
                }
                list.push(ConceptCount { concept, count });
                lines += 1;
            }
            if lines != entry.lines {
                return Err(IndexError::corrupt(
                    &path,
                    format!("expected {} lines, found {lines}", entry.lines),
                ));
            }
            for list in lists.values_mut() {
                sort_list(list);
            }
            sources.insert(entry.id, lists);
        }
        Ok(EntityConceptIndex { sources })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(id: &str) -> SourceId {
        SourceId::new(id).unwrap()
    }

    fn c(label: &str) -> Concept {
        Concept::new(label).unwrap()
    }

    fn mention(source: &str, entity: &str, concept: &str) -> IndexRecord {
        IndexRecord::EntityMention {
            source: s(source),
            entity: entity.into(),
            concept: c(concept),
        }
    }

    fn chattanooga() -> EntityConceptIndex {
        let mut records = vec![];
        for _ in 0..9 {
            records.push(mention("s1", "chattanooga", "city"));
        }
        records.push(mention("s1", "chattanooga", "football team"));
        records.push(mention("s2", "chattanooga", "city"));
        records.push(mention("s1", "mount everest", "mountain"));
        EntityConceptIndex::build([s("s1"), s("s2"), s("s3")], &records)
    }

    fn pairs(list: &[ConceptCount]) -> Vec<(&str, u64)> {
        list.iter().map(|cc| (cc.concept.label(), cc.count)).collect()
    }

    #[test]
    fn aggregation_and_lookup() {
        let idx = chattanooga();
        assert_eq!(
            pairs(idx.lookup("chattanooga", &s("s1")).unwrap()),
            vec![("city", 9), ("football team", 1)]
        );
        // sources are independent keyspaces
        assert_eq!(pairs(idx.lookup("chattanooga", &s("s2")).unwrap()), vec![("city", 1)]);
        assert!(idx.lookup("zzz", &s("s1")).unwrap().is_empty());
        assert!(idx.lookup("chattanooga", &s("s3")).unwrap().is_empty());
        assert!(matches!(
            idx.lookup("chattanooga", &s("nope")),
            Err(IndexError::UnknownSource(_))
        ));
        assert_eq!(
            idx.lookup_raw("MOUNT  EVEREST", &s("s1")).unwrap(),
            idx.lookup("mount everest", &s("s1")).unwrap()
        );
    }

    #[test]
    fn persist_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let idx = chattanooga();
        idx.persist(dir.path()).unwrap();
        let loaded = EntityConceptIndex::load(dir.path()).unwrap();
        assert_eq!(loaded, idx);
        for src in ["s1", "s2", "s3"] {
            for e in ["chattanooga", "mount everest", "zzz"] {
                assert_eq!(loaded.lookup(e, &s(src)).unwrap(), idx.lookup(e, &s(src)).unwrap());
            }
        }

        let empty_dir = tempfile::tempdir().unwrap();
        EntityConceptIndex::default().persist(empty_dir.path()).unwrap();
        assert!(EntityConceptIndex::load(empty_dir.path()).unwrap().is_empty());
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        chattanooga().persist(dir.path()).unwrap();
        let path = dir.path().join("s1.tsv");
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            EntityConceptIndex::load(dir.path()),
            Err(IndexError::CorruptIndex { .. })
        ));
        std::fs::remove_file(dir.path().join("manifest.json")).unwrap();
        assert!(matches!(
            EntityConceptIndex::load(dir.path()),
            Err(IndexError::CorruptIndex { .. })
        ));
    }

    proptest! {
        #[test]
        fn counts_sum_to_mentions_and_order_is_irrelevant(
            raw in prop::collection::vec((0u8..3, 0u8..6, 0u8..4), 0..60),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut records: Vec<IndexRecord> = raw
                .iter()
                .map(|(src, e, con)| mention(&format!("s{src}"), &format!("e{e}"), &format!("c{con}")))
                .collect();
            let sources = || (0..3).map(|i| s(&format!("s{i}")));
            let a = EntityConceptIndex::build(sources(), &records);
            records.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = EntityConceptIndex::build(sources(), &records);
            prop_assert_eq!(&a, &b);
            for src in 0..3 {
                for e in 0..6 {
                    let id = s(&format!("s{src}"));
                    let key = format!("e{e}");
                    let expected = raw.iter().filter(|r| r.0 == src && r.1 == e).count() as u64;
                    let total: u64 = a.lookup(&key, &id).unwrap().iter().map(|cc| cc.count).sum();
                    prop_assert_eq!(total, expected);
                }
            }
        }
    }
}
