//! Symbol-signature trie whose leaves hold per-concept regex clusters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use regex::{Regex, RegexSet};
use serde::{Deserialize, Serialize};

use super::generalize::generalize_pattern;
use super::signature::SymbolSignature;
use crate::error::IndexError;
use crate::ingest::IndexRecord;
use crate::model::{normalize_entity, sort_ranked, Concept};
use crate::persist;
use crate::util;

/// Most patterns kept at one leaf.
pub const LEAF_PATTERN_CAP: usize = 100;
/// Most column values evaluated when scoring a column.
pub const SCORE_SAMPLE_VALUES: usize = 100;
/// A signature cluster becomes a leaf when it holds at least this share of
/// the concept's columns (compared as `count * 10 >= total`).
pub const CLUSTER_SHARE_TENTHS: u64 = 1;

#[derive(Debug, Clone)]
pub struct PatternLeaf {
    pub concept: Concept,
    pub signature: SymbolSignature,
    pub patterns: Vec<String>,
    pub cluster_column_count: u64,
    set: RegexSet,
}

impl PatternLeaf {
    pub fn new(
        concept: Concept,
        signature: SymbolSignature,
        patterns: Vec<String>,
        cluster_column_count: u64,
    ) -> Result<Self, IndexError> {
        for p in &patterns {
            Regex::new(p).map_err(|e| IndexError::InvalidPattern {
                pattern: p.clone(),
                reason: e.to_string(),
            })?;
        }
        let set = RegexSet::new(&patterns).map_err(|e| IndexError::InvalidPattern {
            pattern: patterns.join("|"),
            reason: e.to_string(),
        })?;
        Ok(PatternLeaf {
            concept,
            signature,
            patterns,
            cluster_column_count,
            set,
        })
    }

    pub fn is_match(&self, value: &str) -> bool {
        self.set.is_match(value)
    }
}

impl PartialEq for PatternLeaf {
    fn eq(&self, o: &Self) -> bool {
        self.concept == o.concept
            && self.signature == o.signature
            && self.patterns == o.patterns
            && self.cluster_column_count == o.cluster_column_count
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Node {
    children: BTreeMap<char, usize>,
    leaves: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternTree {
    nodes: Vec<Node>,
    leaves: Vec<PatternLeaf>,
    mixed_counts: BTreeMap<Concept, u64>,
    mixed_total: u64,
}

impl Default for PatternTree {
    fn default() -> Self {
        PatternTree {
            nodes: vec![Node::default()],
            leaves: Vec::new(),
            mixed_counts: BTreeMap::new(),
            mixed_total: 0,
        }
    }
}

/// Most frequent signature among a column's values; ties go to the smaller one.
fn majority_signature(values: &[String]) -> SymbolSignature {
    let mut counts: BTreeMap<SymbolSignature, usize> = BTreeMap::new();
    for v in values.iter().filter(|v| !v.is_empty()) {
        *counts.entry(SymbolSignature::of(v)).or_default() += 1;
    }
    let mut best: Option<(SymbolSignature, usize)> = None;
    for (sig, n) in counts {
        if best.as_ref().is_none_or(|(_, b)| n > *b) {
            best = Some((sig, n));
        }
    }
    best.map(|(s, _)| s).unwrap_or_default()
}

fn cap_patterns(mut patterns: Vec<String>, seed: u64, concept: &Concept, sig: &SymbolSignature) -> Vec<String> {
    patterns.sort();
    patterns.dedup();
    if patterns.len() > LEAF_PATTERN_CAP {
        let tag = format!("leaf:{}:{}", concept.label(), String::from(sig.clone()));
        patterns.shuffle(&mut util::rng(seed, &tag, 0));
        patterns.truncate(LEAF_PATTERN_CAP);
        patterns.sort();
    }
    patterns
}

impl PatternTree {
    pub fn build<'a>(records: impl IntoIterator<Item = &'a IndexRecord>, seed: u64) -> Result<Self, IndexError> {
        // concept -> signature -> generalized patterns of member columns
        let mut clusters: BTreeMap<Concept, BTreeMap<SymbolSignature, Vec<String>>> = BTreeMap::new();
        let mut tree = PatternTree::default();
        for r in records {
            let IndexRecord::PatternColumn { concept, values, .. } = r else {
                continue;
            };
            *tree.mixed_counts.entry(concept.clone()).or_default() += 1;
            tree.mixed_total += 1;
            let Ok(pattern) = generalize_pattern(values) else {
                continue;
            };
            clusters
                .entry(concept.clone())
                .or_default()
                .entry(majority_signature(values))
                .or_default()
                .push(pattern);
        }
        for (concept, by_sig) in clusters {
            let columns = tree.mixed_counts[&concept];
            for (sig, patterns) in by_sig {
                let members = patterns.len() as u64;
                if members * 10 < columns * CLUSTER_SHARE_TENTHS {
                    continue;
                }
                let patterns = cap_patterns(patterns, seed, &concept, &sig);
                tree.insert(PatternLeaf::new(concept.clone(), sig, patterns, members)?);
            }
        }
        Ok(tree)
    }

    /// Adds a leaf from externally supplied patterns. The concept joins the
    /// prior with `mixed_columns` columns if it has none yet.
    pub fn add_leaf(
        &mut self,
        concept: Concept,
        signature: SymbolSignature,
        patterns: Vec<String>,
        mixed_columns: u64,
        seed: u64,
    ) -> Result<(), IndexError> {
        let patterns = cap_patterns(patterns, seed, &concept, &signature);
        if !self.mixed_counts.contains_key(&concept) {
            self.mixed_counts.insert(concept.clone(), mixed_columns);
            self.mixed_total += mixed_columns;
        }
        self.insert(PatternLeaf::new(concept, signature, patterns, mixed_columns)?);
        Ok(())
    }

    fn insert(&mut self, leaf: PatternLeaf) {
        let mut node = 0;
        for &c in leaf.signature.symbols() {
            node = match self.nodes[node].children.get(&c) {
                Some(&n) => n,
                None => {
                    self.nodes.push(Node::default());
                    let n = self.nodes.len() - 1;
                    self.nodes[node].children.insert(c, n);
                    n
                }
            };
        }
        self.leaves.push(leaf);
        let idx = self.leaves.len() - 1;
        self.nodes[node].leaves.push(idx);
    }

    /// Leaves whose signature is a subset of the value's signature.
    pub fn route(&self, value: &str) -> Vec<&PatternLeaf> {
        let sig = SymbolSignature::of(value);
        let mut out = Vec::new();
        self.collect(0, sig.symbols(), &mut out);
        out.sort_unstable();
        out.into_iter().map(|i| &self.leaves[i]).collect()
    }

    fn collect(&self, node: usize, rest: &[char], out: &mut Vec<usize>) {
        out.extend_from_slice(&self.nodes[node].leaves);
        for (i, c) in rest.iter().enumerate() {
            if let Some(&child) = self.nodes[node].children.get(c) {
                self.collect(child, &rest[i + 1..], out);
            }
        }
    }

    /// Unnormalized scores; concepts without a matching value are omitted.
    pub fn score_concepts<S: AsRef<str>>(
        &self,
        values: &[S],
        candidates: Option<&BTreeSet<Concept>>,
        seed: u64,
    ) -> Vec<(Concept, f64)> {
        let cells: Vec<String> = values
            .iter()
            .map(|v| normalize_entity(v.as_ref()))
            .filter(|v| !v.is_empty())
            .collect();
        if cells.is_empty() || self.mixed_total == 0 {
            return Vec::new();
        }
        let mut rng = util::rng(seed, "pattern-score", 0);
        let picked = util::sample_indices(cells.len(), SCORE_SAMPLE_VALUES, &mut rng);
        let mut matched: BTreeMap<Concept, usize> = BTreeMap::new();
        for &i in &picked {
            let v = &cells[i];
            let mut hit: BTreeSet<&Concept> = BTreeSet::new();
            for leaf in self.route(v) {
                if candidates.is_some_and(|c| !c.contains(&leaf.concept)) || hit.contains(&leaf.concept) {
                    continue;
                }
                if leaf.is_match(v) {
                    hit.insert(&leaf.concept);
                }
            }
            for c in hit {
                *matched.entry(c.clone()).or_default() += 1;
            }
        }
        let n = picked.len() as f64;
        let mut out: Vec<(Concept, f64)> = matched
            .into_iter()
            .map(|(c, m)| {
                let prior = self.mixed_column_count(&c) as f64 / self.mixed_total as f64;
                let s = m as f64 / n * prior;
                (c, s)
            })
            .filter(|(_, s)| *s > 0.0)
            .collect();
        sort_ranked(&mut out);
        out
    }

    pub fn leaves(&self) -> &[PatternLeaf] {
        &self.leaves
    }

    pub fn leaves_of(&self, concept: &Concept) -> impl Iterator<Item = &PatternLeaf> + '_ {
        let concept = concept.clone();
        self.leaves.iter().filter(move |l| l.concept == concept)
    }

    pub fn mixed_column_count(&self, concept: &Concept) -> u64 {
        self.mixed_counts.get(concept).copied().unwrap_or(0)
    }

    pub fn mixed_column_total(&self) -> u64 {
        self.mixed_total
    }

    /// Concepts owning at least one leaf.
    pub fn concepts(&self) -> BTreeSet<Concept> {
        self.leaves.iter().map(|l| l.concept.clone()).collect()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct TreeFile {
    mixed_column_total: u64,
    concepts: Vec<ConceptEntry>,
    nodes: Vec<NodeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ConceptEntry {
    concept: Concept,
    mixed_column_count: u64,
    file: Option<String>,
    sha256: Option<String>,
    leaves: Vec<LeafEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct LeafEntry {
    signature: SymbolSignature,
    cluster_column_count: u64,
    offset: usize,
    count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeEntry {
    path: SymbolSignature,
    leaves: usize,
}

impl PatternTree {
    /// Writes `tree.json` plus one `<concept-hash>.txt` regex file per concept.
    pub fn persist(&self, dir: &Path) -> Result<(), IndexError> {
        let mut concepts = Vec::new();
        for (concept, &count) in &self.mixed_counts {
            let mut text = String::new();
            let mut leaves = Vec::new();
            let mut offset = 0;
            let mut owned: Vec<&PatternLeaf> = self.leaves_of(concept).collect();
            owned.sort_by(|a, b| a.signature.cmp(&b.signature));
            for leaf in owned {
                for p in &leaf.patterns {
                    writeln!(text, "{p}").expect("write to string");
                }
                leaves.push(LeafEntry {
                    signature: leaf.signature.clone(),
                    cluster_column_count: leaf.cluster_column_count,
                    offset,
                    count: leaf.patterns.len(),
                });
                offset += leaf.patterns.len();
            }
            let (file, sha256) = if leaves.is_empty() {
                (None, None)
            } else {
                let name = format!("{}.txt", util::label_hash(concept.label()));
                persist::write_file(&dir.join(&name), text.as_bytes())?;
                (Some(name), Some(util::checksum(text.as_bytes())))
            };
            concepts.push(ConceptEntry {
                concept: concept.clone(),
                mixed_column_count: count,
                file,
                sha256,
                leaves,
            });
        }
        let mut nodes = Vec::new();
        self.node_entries(0, &mut Vec::new(), &mut nodes);
        let file = TreeFile {
            mixed_column_total: self.mixed_total,
            concepts,
            nodes,
        };
        persist::write_json(&dir.join("tree.json"), &file)
    }

    fn node_entries(&self, node: usize, path: &mut Vec<char>, out: &mut Vec<NodeEntry>) {
        out.push(NodeEntry {
            path: SymbolSignature::from(path.iter().collect::<String>()),
            leaves: self.nodes[node].leaves.len(),
        });
        for (&c, &child) in &self.nodes[node].children {
            path.push(c);
            self.node_entries(child, path, out);
            path.pop();
        }
    }

    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let path = dir.join("tree.json");
        let file: TreeFile = persist::read_json(&path)?;
        let mut tree = PatternTree::default();
        for entry in file.concepts {
            tree.mixed_counts.insert(entry.concept.clone(), entry.mixed_column_count);
            if entry.leaves.is_empty() {
                continue;
            }
            let (Some(name), Some(sha)) = (&entry.file, &entry.sha256) else {
                return Err(IndexError::corrupt(&path, format!("no pattern file for {}", entry.concept)));
            };
            let pfile = dir.join(name);
            let text = persist::utf8(&pfile, persist::read_verified(&pfile, sha)?)?;
            let lines: Vec<&str> = text.lines().collect();
            for leaf in entry.leaves {
                let end = leaf.offset + leaf.count;
                if end > lines.len() || leaf.count == 0 {
                    return Err(IndexError::corrupt(&pfile, "leaf range out of bounds"));
                }
                let patterns = lines[leaf.offset..end].iter().map(|s| s.to_string()).collect();
                tree.insert(PatternLeaf::new(
                    entry.concept.clone(),
                    leaf.signature,
                    patterns,
                    leaf.cluster_column_count,
                )?);
            }
        }
        tree.mixed_total = file.mixed_column_total;
        if tree.mixed_counts.values().sum::<u64>() != tree.mixed_total {
            return Err(IndexError::corrupt(&path, "mixed column counts do not sum to total"));
        }
        let mut nodes = Vec::new();
        tree.node_entries(0, &mut Vec::new(), &mut nodes);
        let stored: Vec<(&SymbolSignature, usize)> = file.nodes.iter().map(|n| (&n.path, n.leaves)).collect();
        let rebuilt: Vec<(&SymbolSignature, usize)> = nodes.iter().map(|n| (&n.path, n.leaves)).collect();
        if stored != rebuilt {
            return Err(IndexError::corrupt(&path, "node table disagrees with leaves"));
        }
        Ok(tree)
    }
}
