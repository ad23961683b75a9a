//! Count redistribution across synonymous, hierarchical and embedding-similar
//! concepts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::RwLock;

use crate::error::{BeliefError, IndexError};
use crate::model::{normalize_entity, Concept};
use crate::persist;
use crate::util;

/// Default minimum similarity for an embedding transfer.
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.4;

const MANIFEST: &str = "manifest.json";

#[derive(Debug, Default)]
pub struct ConceptRelations {
    groups: Vec<BTreeSet<Concept>>,
    group_of: HashMap<Concept, usize>,
    children: BTreeMap<Concept, BTreeSet<Concept>>,
    vectors: HashMap<String, Vec<f64>>,
    dimension: usize,
    cache: RwLock<HashMap<(Concept, Concept), f64>>,
}

impl Clone for ConceptRelations {
    fn clone(&self) -> Self {
        ConceptRelations {
            groups: self.groups.clone(),
            group_of: self.group_of.clone(),
            children: self.children.clone(),
            vectors: self.vectors.clone(),
            dimension: self.dimension,
            cache: RwLock::new(HashMap::new()),
        }
    }
}

impl PartialEq for ConceptRelations {
    fn eq(&self, o: &Self) -> bool {
        self.groups == o.groups && self.children == o.children && self.vectors == o.vectors
    }
}

#[derive(Debug, Default)]
pub struct RelationsBuilder {
    synonym_lines: Vec<Vec<Concept>>,
    edges: BTreeSet<(Concept, Concept)>,
    vectors: BTreeMap<String, Vec<f64>>,
    dimension: Option<usize>,
}

fn labels(line: &str) -> Vec<Concept> {
    line.split('\t').filter_map(Concept::new).collect()
}

impl RelationsBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Overlapping sets are merged into one.
    pub fn synonyms(mut self, set: impl IntoIterator<Item = Concept>) -> Self {
        self.synonym_lines.push(set.into_iter().collect());
        self
    }

    pub fn edge(mut self, parent: Concept, child: Concept) -> Self {
        self.edges.insert((parent, child));
        self
    }

    pub fn embedding(mut self, token: &str, vector: Vec<f64>) -> Result<Self, BeliefError> {
        let found = vector.len();
        match self.dimension {
            Some(d) if d != found => {
                return Err(BeliefError::DimensionMismatch {
                    line: self.vectors.len() + 1,
                    expected: d,
                    found,
                })
            }
            _ => self.dimension = Some(found),
        }
        self.vectors.insert(normalize_entity(token), vector);
        Ok(self)
    }

    /// One set per line, tab-separated labels.
    pub fn synonyms_text(mut self, text: &str) -> Self {
        for line in text.lines() {
            let set = labels(line);
            if !set.is_empty() {
                self.synonym_lines.push(set);
            }
        }
        self
    }

    /// Lines of `parent<TAB>child`.
    pub fn hierarchy_text(mut self, text: &str) -> Result<Self, BeliefError> {
        for (no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts = labels(line);
            let [p, c] = parts.as_slice() else {
                return Err(BeliefError::Malformed {
                    what: "hierarchy",
                    line: no + 1,
                    reason: "expected parent<TAB>child".into(),
                });
            };
            self.edges.insert((p.clone(), c.clone()));
        }
        Ok(self)
    }

    /// Lines of `token v1 ... vD`, with one D for the whole file.
    pub fn embeddings_text(mut self, text: &str) -> Result<Self, BeliefError> {
        for (no, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else {
                continue;
            };
            let vector: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
            let vector = match vector {
                Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => v,
                _ => {
                    return Err(BeliefError::Malformed {
                        what: "embeddings",
                        line: no + 1,
                        reason: "expected a token followed by finite numbers".into(),
                    })
                }
            };
            if let Some(d) = self.dimension {
                if d != vector.len() {
                    return Err(BeliefError::DimensionMismatch {
                        line: no + 1,
                        expected: d,
                        found: vector.len(),
                    });
                }
            }
            self.dimension = Some(vector.len());
            self.vectors.insert(normalize_entity(token), vector);
        }
        Ok(self)
    }

    pub fn build(self) -> Result<ConceptRelations, BeliefError> {
        // union-find over synonym members
        let mut index: BTreeMap<Concept, usize> = BTreeMap::new();
        for line in &self.synonym_lines {
            for c in line {
                let n = index.len();
                index.entry(c.clone()).or_insert(n);
            }
        }
        let mut parent: Vec<usize> = (0..index.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for line in &self.synonym_lines {
            let Some(first) = line.first() else { continue };
            let root = find(&mut parent, index[first]);
            for c in &line[1..] {
                let r = find(&mut parent, index[c]);
                parent[r] = root;
            }
        }
        let mut sets: BTreeMap<usize, BTreeSet<Concept>> = BTreeMap::new();
        for (c, &i) in &index {
            let r = find(&mut parent, i);
            sets.entry(r).or_default().insert(c.clone());
        }
        let mut groups: Vec<BTreeSet<Concept>> = sets.into_values().filter(|s| s.len() > 1).collect();
        groups.sort();
        let group_of = groups
            .iter()
            .enumerate()
            .flat_map(|(g, s)| s.iter().map(move |c| (c.clone(), g)))
            .collect();

        let mut children: BTreeMap<Concept, BTreeSet<Concept>> = BTreeMap::new();
        for (p, c) in &self.edges {
            children.entry(p.clone()).or_default().insert(c.clone());
        }
        check_acyclic(&children)?;

        Ok(ConceptRelations {
            groups,
            group_of,
            children,
            vectors: self.vectors.into_iter().collect(),
            dimension: self.dimension.unwrap_or(0),
            cache: RwLock::new(HashMap::new()),
        })
    }
}

fn check_acyclic(children: &BTreeMap<Concept, BTreeSet<Concept>>) -> Result<(), BeliefError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: HashMap<&Concept, Mark> = HashMap::new();
    for root in children.keys() {
        if marks.contains_key(root) {
            continue;
        }
        // iterative DFS: (node, remaining children)
        let mut stack: Vec<(&Concept, Vec<&Concept>)> = vec![(root, children[root].iter().collect())];
        marks.insert(root, Mark::Open);
        while let Some((node, rest)) = stack.last_mut() {
            let node = *node;
            match rest.pop() {
                Some(next) => match marks.get(next) {
                    Some(Mark::Open) => return Err(BeliefError::CyclicHierarchy(next.label().to_string())),
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(next, Mark::Open);
                        let kids = children.get(next).map(|s| s.iter().collect()).unwrap_or_default();
                        stack.push((next, kids));
                    }
                },
                None => {
                    marks.insert(node, Mark::Done);
                    stack.pop();
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharedBelief {
    pub entries: BTreeMap<Concept, f64>,
}

impl SharedBelief {
    pub fn get(&self, concept: &str) -> f64 {
        self.entries.get(concept).copied().unwrap_or(0.0)
    }

    /// Each adjusted count divided by `total` (the pre-sharing total), so
    /// the result may exceed one in sum.
    pub fn probabilities(&self, total: f64) -> BTreeMap<Concept, f64> {
        self.entries.iter().map(|(c, v)| (c.clone(), v / total)).collect()
    }
}

impl ConceptRelations {
    pub fn builder() -> RelationsBuilder {
        RelationsBuilder::new()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty() && self.children.is_empty() && self.vectors.is_empty()
    }

    pub fn are_synonyms(&self, a: &Concept, b: &Concept) -> bool {
        match (self.group_of.get(a), self.group_of.get(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    pub fn synonym_group(&self, c: &Concept) -> Option<&BTreeSet<Concept>> {
        self.group_of.get(c).map(|&g| &self.groups[g])
    }

    pub fn is_parent(&self, parent: &Concept, child: &Concept) -> bool {
        self.children.get(parent).is_some_and(|s| s.contains(child))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn label_vector(&self, c: &Concept) -> Option<Vec<f64>> {
        let mut sum = vec![0.0; self.dimension];
        let mut n = 0usize;
        for tok in c.label().split(' ') {
            if let Some(v) = self.vectors.get(tok) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        for s in &mut sum {
            *s /= n as f64;
        }
        Some(sum)
    }

    fn compute_similarity(&self, a: &Concept, b: &Concept) -> f64 {
        let (Some(va), Some(vb)) = (self.label_vector(a), self.label_vector(b)) else {
            return 0.0;
        };
        if a == b {
            return 1.0;
        }
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        let na = va.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }

    /// Cosine similarity of mean token vectors; 0 when either label has no
    /// known token. Memoized.
    pub fn concept_similarity(&self, a: &Concept, b: &Concept) -> f64 {
        if self.vectors.is_empty() {
            return 0.0;
        }
        let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        if let Some(&s) = self.cache.read().expect("similarity cache").get(&key) {
            return s;
        }
        let s = self.compute_similarity(&key.0, &key.1);
        self.cache.write().expect("similarity cache").insert(key, s);
        s
    }

    /// Redistributes counts. All transfers read the input counts, so the
    /// result is independent of iteration order.
    pub fn share(&self, beliefs: &BTreeMap<Concept, f64>, threshold: f64) -> SharedBelief {
        let mut out = beliefs.clone();
        if self.is_empty() || beliefs.len() < 2 {
            return SharedBelief { entries: out };
        }

        // synonyms: members take the group's summed count
        let mut group_sums: BTreeMap<usize, f64> = BTreeMap::new();
        for (c, &n) in beliefs {
            if let Some(&g) = self.group_of.get(c) {
                *group_sums.entry(g).or_default() += n;
            }
        }
        for (c, v) in out.iter_mut() {
            if let Some(g) = self.group_of.get(c) {
                *v = group_sums[g];
            }
        }

        // hierarchy: present, non-synonym children of each present parent
        let mut hier_pairs: BTreeSet<(&Concept, &Concept)> = BTreeSet::new();
        for (p, &pn) in beliefs {
            let Some(kids) = self.children.get(p) else { continue };
            let present: Vec<(&Concept, f64)> = kids
                .iter()
                .filter(|k| !self.are_synonyms(p, k))
                .filter_map(|k| beliefs.get_key_value(k).map(|(k, &n)| (k, n)))
                .collect();
            let total: f64 = present.iter().map(|(_, n)| n).sum();
            for (k, kn) in present {
                if total > 0.0 {
                    *out.get_mut(k).expect("present child") += pn * kn / total;
                }
                *out.get_mut(p).expect("present parent") += kn / 2.0;
                hier_pairs.insert(if p <= k { (p, k) } else { (k, p) });
            }
        }

        // embeddings: remaining pairs above the threshold
        if !self.vectors.is_empty() {
            let present: Vec<(&Concept, f64)> = beliefs.iter().map(|(c, &n)| (c, n)).collect();
            for (i, &(a, an)) in present.iter().enumerate() {
                for &(b, bn) in &present[i + 1..] {
                    if self.are_synonyms(a, b)
                        || hier_pairs.contains(&(a, b))
                        || self.is_parent(a, b)
                        || self.is_parent(b, a)
                    {
                        continue;
                    }
                    let s = self.concept_similarity(a, b);
                    if s > 0.0 && s >= threshold {
                        *out.get_mut(a).expect("present") += s * bn;
                        *out.get_mut(b).expect("present") += s * an;
                    }
                }
            }
        }
        SharedBelief { entries: out }
    }
}

impl ConceptRelations {
    /// Writes `synonyms.tsv`, `hierarchy.tsv` and `embeddings.txt` in
    /// canonical order.
    pub fn persist(&self, dir: &Path) -> Result<(), IndexError> {
        let mut syn = String::new();
        for g in &self.groups {
            let line: Vec<&str> = g.iter().map(Concept::label).collect();
            writeln!(syn, "{}", line.join("\t")).expect("write to string");
        }
        persist::write_file(&dir.join("synonyms.tsv"), syn.as_bytes())?;
        let mut hier = String::new();
        for (p, kids) in &self.children {
            for k in kids {
                writeln!(hier, "{p}\t{k}").expect("write to string");
            }
        }
        persist::write_file(&dir.join("hierarchy.tsv"), hier.as_bytes())?;
        let mut emb = String::new();
        let tokens: BTreeMap<&String, &Vec<f64>> = self.vectors.iter().collect();
        for (t, v) in tokens {
            emb.push_str(t);
            for x in v {
                write!(emb, " {x}").expect("write to string");
            }
            emb.push('\n');
        }
        persist::write_file(&dir.join("embeddings.txt"), emb.as_bytes())?;
        let checksums: BTreeMap<&str, String> = [("synonyms.tsv", &syn), ("hierarchy.tsv", &hier), ("embeddings.txt", &emb)]
            .into_iter()
            .map(|(name, text)| (name, util::checksum(text.as_bytes())))
            .collect();
        persist::write_json(&dir.join(MANIFEST), &checksums)
    }

    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let checksums: BTreeMap<String, String> = persist::read_json(&dir.join(MANIFEST))?;
        let read = |name: &str| {
            let path = dir.join(name);
            let sha = checksums
                .get(name)
                .ok_or_else(|| IndexError::corrupt(dir.join(MANIFEST), format!("no checksum for {name}")))?;
            persist::read_verified(&path, sha).and_then(|b| persist::utf8(&path, b))
        };
        let (syn, hier, emb) = (read("synonyms.tsv")?, read("hierarchy.tsv")?, read("embeddings.txt")?);
        let corrupt = |e: BeliefError| IndexError::corrupt(dir, e.to_string());
        RelationsBuilder::new()
            .synonyms_text(&syn)
            .hierarchy_text(&hier)
            .and_then(|b| b.embeddings_text(&emb))
            .and_then(RelationsBuilder::build)
            .map_err(corrupt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(label: &str) -> Concept {
        Concept::new(label).unwrap()
    }

    fn counts(items: &[(&str, f64)]) -> BTreeMap<Concept, f64> {
        items.iter().map(|(l, n)| (c(l), *n)).collect()
    }

    #[test]
    fn synonym_merge() {
        let rel = RelationsBuilder::new().synonyms([c("human"), c("person")]).build().unwrap();
        let beliefs = counts(&[("human", 30.0), ("person", 30.0), ("object", 40.0)]);
        let shared = rel.share(&beliefs, 0.4);
        assert_eq!(shared.get("human"), 60.0);
        assert_eq!(shared.get("person"), 60.0);
        assert_eq!(shared.get("object"), 40.0);
        let p = shared.probabilities(100.0);
        assert_eq!((p[&c("human")], p[&c("person")], p[&c("object")]), (0.6, 0.6, 0.4));
    }

    #[test]
    fn hierarchy_transfer() {
        let rel = RelationsBuilder::new()
            .edge(c("person"), c("scientist"))
            .edge(c("person"), c("athlete"))
            .edge(c("person"), c("writer"))
            .build()
            .unwrap();
        let shared = rel.share(&counts(&[("person", 10.0), ("scientist", 4.0), ("athlete", 6.0)]), 0.4);
        assert_eq!(shared.get("scientist"), 8.0);
        assert_eq!(shared.get("athlete"), 12.0);
        assert_eq!(shared.get("person"), 15.0);
        assert!(!shared.entries.contains_key("writer"));
    }

    #[test]
    fn embedding_transfer() {
        let rel = RelationsBuilder::new()
            .embeddings_text("a 1 0 0 0\nb 1 1 1 1\n")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(rel.concept_similarity(&c("a"), &c("b")), 0.5);
        let shared = rel.share(&counts(&[("a", 10.0), ("b", 20.0)]), 0.4);
        assert_eq!((shared.get("a"), shared.get("b")), (20.0, 25.0));
        // below threshold: untouched
        let shared = rel.share(&counts(&[("a", 10.0), ("b", 20.0)]), 0.6);
        assert_eq!((shared.get("a"), shared.get("b")), (10.0, 20.0));
    }

    #[test]
    fn similarity_rules() {
        let rel = RelationsBuilder::new()
            .embeddings_text("new 1 0 0\nyork 0 1 0\ncity 0 0 1\n")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(rel.concept_similarity(&c("city"), &c("city")), 1.0);
        assert_eq!(rel.concept_similarity(&c("zzz"), &c("qqq")), 0.0);
        assert_eq!(rel.concept_similarity(&c("zzz"), &c("zzz")), 0.0);
        let ab = rel.concept_similarity(&c("new york"), &c("york city"));
        assert_eq!(ab, rel.concept_similarity(&c("york city"), &c("new york")));
        assert!((ab - 0.5).abs() < 1e-12);
        assert_eq!(ab, rel.compute_similarity(&c("new york"), &c("york city")));
    }

    #[test]
    fn tiers_are_exclusive() {
        let rel = RelationsBuilder::new()
            .synonyms([c("film"), c("movie")])
            .edge(c("work"), c("book"))
            .embeddings_text("film 1 0\nmovie 1 0\nwork 1 0\nbook 1 0\n")
            .unwrap()
            .build()
            .unwrap();
        let shared = rel.share(&counts(&[("film", 1.0), ("movie", 2.0)]), 0.4);
        assert_eq!((shared.get("film"), shared.get("movie")), (3.0, 3.0));
        let shared = rel.share(&counts(&[("work", 2.0), ("book", 4.0)]), 0.4);
        assert_eq!((shared.get("work"), shared.get("book")), (4.0, 6.0));
    }

    #[test]
    fn overlapping_synonym_lines_merge() {
        let rel = RelationsBuilder::new().synonyms_text("a\tb\nb\tc\nx\n").build().unwrap();
        assert!(rel.are_synonyms(&c("a"), &c("c")));
        assert_eq!(rel.synonym_group(&c("x")), None);
    }

    #[test]
    fn errors() {
        let cyclic = RelationsBuilder::new().edge(c("a"), c("b")).edge(c("b"), c("c")).edge(c("c"), c("a"));
        assert!(matches!(cyclic.build(), Err(BeliefError::CyclicHierarchy(_))));
        assert!(matches!(
            RelationsBuilder::new().edge(c("a"), c("a")).build(),
            Err(BeliefError::CyclicHierarchy(_))
        ));
        assert!(matches!(
            RelationsBuilder::new().embeddings_text("a 1 2\nb 1\n"),
            Err(BeliefError::DimensionMismatch { line: 2, .. })
        ));
        assert!(RelationsBuilder::new().hierarchy_text("a\n").is_err());
    }

    #[test]
    fn persist_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rel = RelationsBuilder::new()
            .synonyms([c("film"), c("movie")])
            .edge(c("person"), c("athlete"))
            .embeddings_text("a 0.1 -2.5e-3\nb 1 2\n")
            .unwrap()
            .build()
            .unwrap();
        rel.persist(dir.path()).unwrap();
        assert_eq!(ConceptRelations::load(dir.path()).unwrap(), rel);
        std::fs::write(dir.path().join("synonyms.tsv"), "film\tbook\n").unwrap();
        assert!(matches!(
            ConceptRelations::load(dir.path()),
            Err(IndexError::CorruptIndex { .. })
        ));
    }

    fn relation_strategy() -> impl Strategy<Value = ConceptRelations> {
        let groups = prop::collection::vec(prop::collection::btree_set(0u8..8, 2..4), 0..3);
        let edges = prop::collection::btree_set((0u8..8, 0u8..8).prop_filter("forward", |(a, b)| a < b), 0..5);
        let vecs = prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 8);
        (groups, edges, vecs).prop_map(|(groups, edges, vecs)| {
            let mut b = RelationsBuilder::new();
            for g in groups {
                b = b.synonyms(g.into_iter().map(|i| c(&format!("k{i}"))));
            }
            for (p, k) in edges {
                b = b.edge(c(&format!("k{p}")), c(&format!("k{k}")));
            }
            for (i, v) in vecs.into_iter().enumerate() {
                b = b.embedding(&format!("k{i}"), v).unwrap();
            }
            b.build().unwrap()
        })
    }

    proptest! {
        #[test]
        fn counts_never_decrease(
            rel in relation_strategy(),
            raw in prop::collection::btree_map(0u8..8, 1u32..50, 1..8),
            threshold in 0.0f64..1.0,
        ) {
            let beliefs: BTreeMap<Concept, f64> =
                raw.iter().map(|(k, n)| (c(&format!("k{k}")), *n as f64)).collect();
            let shared = rel.share(&beliefs, threshold);
            prop_assert_eq!(shared.entries.len(), beliefs.len());
            for (k, n) in &beliefs {
                prop_assert!(shared.entries[k] >= *n);
            }
        }

        #[test]
        fn repeated_merge_scales_by_present_group_size(
            groups in prop::collection::vec(prop::collection::btree_set(0u8..8, 2..4), 0..3),
            raw in prop::collection::btree_map(0u8..8, 1u32..50, 1..8),
        ) {
            let mut b = RelationsBuilder::new();
            for g in groups {
                b = b.synonyms(g.into_iter().map(|i| c(&format!("k{i}"))));
            }
            let rel = b.build().unwrap();
            let beliefs: BTreeMap<Concept, f64> =
                raw.iter().map(|(k, n)| (c(&format!("k{k}")), *n as f64)).collect();
            let once = rel.share(&beliefs, 0.4);
            let twice = rel.share(&once.entries, 0.4);
            for (k, v) in &once.entries {
                let present = rel
                    .synonym_group(k)
                    .map_or(1, |g| g.iter().filter(|m| beliefs.contains_key(*m)).count());
                prop_assert_eq!(twice.entries[k], v * present as f64);
                if present == 1 {
                    prop_assert_eq!(*v, beliefs[k]);
                }
            }
        }

        #[test]
        fn empty_relations_are_identity(raw in prop::collection::btree_map(0u8..8, 1u32..50, 0..8)) {
            let beliefs: BTreeMap<Concept, f64> =
                raw.iter().map(|(k, n)| (c(&format!("k{k}")), *n as f64)).collect();
            let rel = ConceptRelations::default();
            prop_assert_eq!(rel.share(&beliefs, 1.0 + 1e-9).entries, beliefs);
        }

        #[test]
        fn cache_agrees_with_fresh(rel in relation_strategy(), a in 0u8..8, b in 0u8..8) {
            let (ca, cb) = (c(&format!("k{a}")), c(&format!("k{b}")));
            let cached = rel.concept_similarity(&ca, &cb);
            let again = rel.concept_similarity(&cb, &ca);
            let (x, y) = if ca <= cb { (&ca, &cb) } else { (&cb, &ca) };
            prop_assert_eq!(cached, again);
            prop_assert_eq!(cached, rel.compute_similarity(x, y));
            prop_assert!((-1.0..=1.0).contains(&cached));
        }
    }
}
