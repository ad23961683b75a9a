//! Concept-pair frequencies and the value pairs observed under each pair.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::IndexError;
use crate::ingest::IndexRecord;
use crate::model::{normalize_entity, parse_number, sort_ranked, Concept};
use crate::persist;
use crate::util;

/// Default number of targets returned by [`CooccurrenceIndex::top_cooccurring`].
pub const DEFAULT_SCOPE_K: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub enum TupleValue {
    Categorical(String),
    Numeric(f64),
}

impl TupleValue {
    fn is_numeric(&self) -> bool {
        matches!(self, TupleValue::Numeric(_))
    }

    fn matches(&self, stored: &str, epsilon: f64) -> bool {
        match self {
            TupleValue::Categorical(v) => v == stored,
            TupleValue::Numeric(v) => match parse_number(stored) {
                Some(s) => (v - s).abs() <= epsilon * s.abs(),
                None => false,
            },
        }
    }
}

fn canonical<'a>(a: &'a Concept, b: &'a Concept) -> (&'a Concept, &'a Concept, bool) {
    if a <= b {
        (a, b, false)
    } else {
        (b, a, true)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct TupleStore {
    entries: Vec<(String, String, u64)>,
    by_a: HashMap<String, Vec<usize>>,
    by_b: HashMap<String, Vec<usize>>,
}

impl TupleStore {
    fn from_counts(counts: BTreeMap<(String, String), u64>) -> Self {
        let mut store = TupleStore::default();
        for ((a, b), n) in counts {
            let i = store.entries.len();
            store.by_a.entry(a.clone()).or_default().push(i);
            store.by_b.entry(b.clone()).or_default().push(i);
            store.entries.push((a, b, n));
        }
        store
    }

    fn count(&self, a: &str, b: &str) -> u64 {
        self.by_a
            .get(a)
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
            .find(|e| e.1 == b)
            .map_or(0, |e| e.2)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CooccurrenceIndex {
    pair_freq: BTreeMap<(Concept, Concept), u64>,
    concept_freq: BTreeMap<Concept, u64>,
    neighbors: BTreeMap<Concept, BTreeMap<Concept, u64>>,
    tuples: BTreeMap<(Concept, Concept), TupleStore>,
}

impl CooccurrenceIndex {
    /// Column pairs come from `ColumnPair` records, tuples from `TupleMention`.
    pub fn build<'a>(records: impl IntoIterator<Item = &'a IndexRecord>) -> Self {
        let mut pairs: BTreeMap<(Concept, Concept), u64> = BTreeMap::new();
        let mut tuples: BTreeMap<(Concept, Concept), BTreeMap<(String, String), u64>> = BTreeMap::new();
        for r in records {
            match r {
                IndexRecord::ColumnPair {
                    concept_a, concept_b, ..
                } => {
                    let (a, b, _) = canonical(concept_a, concept_b);
                    *pairs.entry((a.clone(), b.clone())).or_default() += 1;
                }
                IndexRecord::TupleMention {
                    concept_a,
                    concept_b,
                    value_a,
                    value_b,
                    ..
                } => {
                    let (a, b, swapped) = canonical(concept_a, concept_b);
                    let (va, vb) = if swapped { (value_b, value_a) } else { (value_a, value_b) };
                    *tuples
                        .entry((a.clone(), b.clone()))
                        .or_default()
                        .entry((va.clone(), vb.clone()))
                        .or_default() += 1;
                }
                _ => {}
            }
        }
        Self::from_parts(
            pairs,
            tuples.into_iter().map(|(k, v)| (k, TupleStore::from_counts(v))).collect(),
        )
    }

    fn from_parts(
        pair_freq: BTreeMap<(Concept, Concept), u64>,
        tuples: BTreeMap<(Concept, Concept), TupleStore>,
    ) -> Self {
        let mut concept_freq: BTreeMap<Concept, u64> = BTreeMap::new();
        let mut neighbors: BTreeMap<Concept, BTreeMap<Concept, u64>> = BTreeMap::new();
        for ((a, b), &n) in &pair_freq {
            *concept_freq.entry(a.clone()).or_default() += n;
            *concept_freq.entry(b.clone()).or_default() += n;
            neighbors.entry(a.clone()).or_default().insert(b.clone(), n);
            neighbors.entry(b.clone()).or_default().insert(a.clone(), n);
        }
        CooccurrenceIndex {
            pair_freq,
            concept_freq,
            neighbors,
            tuples,
        }
    }

    pub fn pair_freq(&self, a: &Concept, b: &Concept) -> u64 {
        let (a, b, _) = canonical(a, b);
        self.pair_freq.get(&(a.clone(), b.clone())).copied().unwrap_or(0)
    }

    pub fn concept_freq(&self, c: &Concept) -> u64 {
        self.concept_freq.get(c).copied().unwrap_or(0)
    }

    /// Pr(target | given) from column-pair counts; 0 for an unseen `given`.
    pub fn pair_conditional(&self, target: &Concept, given: &Concept) -> f64 {
        let g = self.concept_freq(given);
        if g == 0 {
            return 0.0;
        }
        self.pair_freq(given, target) as f64 / g as f64
    }

    /// Targets ranked by the expectation of `pair_conditional` over `given`.
    /// Zero scores are dropped, ties go to the smaller label, and only targets
    /// accepted by `eligible` are considered.
    pub fn top_cooccurring(
        &self,
        given: &[(Concept, f64)],
        k: usize,
        eligible: impl Fn(&Concept) -> bool,
    ) -> Vec<(Concept, f64)> {
        let mut scores: BTreeMap<&Concept, f64> = BTreeMap::new();
        for (g, p) in given {
            let gf = self.concept_freq(g);
            if gf == 0 {
                continue;
            }
            for (t, &n) in self.neighbors.get(g).into_iter().flatten() {
                if eligible(t) {
                    *scores.entry(t).or_default() += p * n as f64 / gf as f64;
                }
            }
        }
        let mut ranked: Vec<(Concept, f64)> = scores
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(c, s)| (c.clone(), s))
            .collect();
        sort_ranked(&mut ranked);
        ranked.truncate(k);
        ranked
    }

    /// Exact count of a stored value pair (values already normalized).
    pub fn tuple_count(&self, a: &Concept, b: &Concept, value_a: &str, value_b: &str) -> u64 {
        let (ka, kb, swapped) = canonical(a, b);
        let (va, vb) = if swapped { (value_b, value_a) } else { (value_a, value_b) };
        self.tuples
            .get(&(ka.clone(), kb.clone()))
            .map_or(0, |s| s.count(va, vb))
    }

    /// Whether some stored tuple under (a, b) agrees with the given values.
    /// Categorical sides must be equal after normalization; numeric sides may
    /// differ by `epsilon` times the stored magnitude.
    pub fn tuple_matches(
        &self,
        a: &Concept,
        b: &Concept,
        value_a: &TupleValue,
        value_b: &TupleValue,
        epsilon: f64,
    ) -> Result<bool, IndexError> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(IndexError::InvalidEpsilon(epsilon));
        }
        if value_a.is_numeric() && value_b.is_numeric() {
            return Err(IndexError::BothNumeric);
        }
        let (ka, kb, swapped) = canonical(a, b);
        let (va, vb) = if swapped { (value_b, value_a) } else { (value_a, value_b) };
        let Some(store) = self.tuples.get(&(ka.clone(), kb.clone())) else {
            return Ok(false);
        };
        let norm = |v: &TupleValue| match v {
            TupleValue::Categorical(s) => TupleValue::Categorical(normalize_entity(s)),
            n => n.clone(),
        };
        let (va, vb) = (norm(va), norm(vb));
        let hit = match (&va, &vb) {
            (TupleValue::Categorical(key), _) => store
                .by_a
                .get(key)
                .into_iter()
                .flatten()
                .any(|&i| vb.matches(&store.entries[i].1, epsilon)),
            (_, TupleValue::Categorical(key)) => store
                .by_b
                .get(key)
                .into_iter()
                .flatten()
                .any(|&i| va.matches(&store.entries[i].0, epsilon)),
            _ => unreachable!("both numeric rejected above"),
        };
        Ok(hit)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Concept, &Concept, u64)> {
        self.pair_freq.iter().map(|((a, b), &n)| (a, b, n))
    }

    pub fn is_empty(&self) -> bool {
        self.pair_freq.is_empty() && self.tuples.is_empty()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    pairs: FileEntry,
    tuples: Vec<TupleEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileEntry {
    lines: u64,
    sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct TupleEntry {
    concept_a: Concept,
    concept_b: Concept,
    file: String,
    lines: u64,
    sha256: String,
}

fn parse_lines<'t>(
    text: &'t str,
    path: &Path,
    expected: u64,
) -> Result<Vec<(&'t str, &'t str, u64)>, IndexError> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let bad = |why: &str| IndexError::corrupt(path, format!("line {}: {why}", no + 1));
        let mut parts = line.split('\t');
        let (Some(a), Some(b), Some(n), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected 3 tab-separated fields"));
        };
        let n: u64 = n.parse().map_err(|_| bad("count is not an integer"))?;
        if n == 0 {
            return Err(bad("zero count"));
        }
        out.push((a, b, n));
    }
    if out.len() as u64 != expected {
        return Err(IndexError::corrupt(
            path,
            format!("expected {expected} lines, found {}", out.len()),
        ));
    }
    Ok(out)
}

fn concept_field(path: &Path, label: &str) -> Result<Concept, IndexError> {
    Concept::new(label)
        .filter(|c| c.label() == label)
        .ok_or_else(|| IndexError::corrupt(path, format!("invalid concept {label:?}")))
}

impl CooccurrenceIndex {
    /// Writes `pairs.tsv`, `tuples/<pair-hash>.tsv` and a checksum manifest.
    pub fn persist(&self, dir: &Path) -> Result<(), IndexError> {
        let mut text = String::new();
        for ((a, b), n) in &self.pair_freq {
            writeln!(text, "{a}\t{b}\t{n}").expect("write to string");
        }
        persist::write_file(&dir.join("pairs.tsv"), text.as_bytes())?;
        let pairs = FileEntry {
            lines: self.pair_freq.len() as u64,
            sha256: util::checksum(text.as_bytes()),
        };
        let mut tuples = Vec::new();
        for ((a, b), store) in &self.tuples {
            let mut text = String::new();
            for (va, vb, n) in &store.entries {
                writeln!(text, "{va}\t{vb}\t{n}").expect("write to string");
            }
            let file = format!("{}.tsv", util::label_hash(&format!("{a}\t{b}")));
            persist::write_file(&dir.join("tuples").join(&file), text.as_bytes())?;
            tuples.push(TupleEntry {
                concept_a: a.clone(),
                concept_b: b.clone(),
                file,
                lines: store.entries.len() as u64,
                sha256: util::checksum(text.as_bytes()),
            });
        }
        persist::write_json(&dir.join("manifest.json"), &Manifest { pairs, tuples })
    }

    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let manifest: Manifest = persist::read_json(&dir.join("manifest.json"))?;
        let path = dir.join("pairs.tsv");
        let text = persist::utf8(&path, persist::read_verified(&path, &manifest.pairs.sha256)?)?;
        let mut pair_freq = BTreeMap::new();
        for (a, b, n) in parse_lines(&text, &path, manifest.pairs.lines)? {
            let (a, b) = (concept_field(&path, a)?, concept_field(&path, b)?);
            if a > b || pair_freq.insert((a, b), n).is_some() {
                return Err(IndexError::corrupt(&path, "pair out of canonical order or repeated"));
            }
        }
        let mut tuples = BTreeMap::new();
        for entry in manifest.tuples {
            let path = dir.join("tuples").join(&entry.file);
            let text = persist::utf8(&path, persist::read_verified(&path, &entry.sha256)?)?;
            let counts: BTreeMap<(String, String), u64> = parse_lines(&text, &path, entry.lines)?
                .into_iter()
                .map(|(a, b, n)| ((a.to_string(), b.to_string()), n))
                .collect();
            if counts.len() as u64 != entry.lines || entry.concept_a > entry.concept_b {
                return Err(IndexError::corrupt(&path, "repeated tuple or non-canonical pair"));
            }
            tuples.insert((entry.concept_a, entry.concept_b), TupleStore::from_counts(counts));
        }
        Ok(Self::from_parts(pair_freq, tuples))
    }
}
