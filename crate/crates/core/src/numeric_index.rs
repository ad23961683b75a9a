//! Per-concept interval counting over historical `[min, max]` column ranges.
//!
//! Counting the stored intervals that intersect a query `[lo, hi]` only needs
//! the sorted starts and the sorted ends of the stored intervals:
//!
//! ```text
//! intersecting = total - #{end < lo} - #{start > hi}
//! ```
//!
//! The two excluded sets are disjoint (an interval cannot end before `lo` and
//! start after `hi >= lo`), so two binary searches answer the query exactly in
//! `O(log n)`. Intervals are closed: touching endpoints intersect.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::IndexError;
use crate::ingest::IndexRecord;
use crate::model::{sort_ranked, Concept};
use crate::persist;
use crate::util;

/// Sorted endpoint arrays of one concept's stored ranges.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntervalCounts {
    starts: Vec<f64>,
    ends: Vec<f64>,
}

impl IntervalCounts {
    pub fn from_ranges(ranges: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let (mut starts, mut ends): (Vec<f64>, Vec<f64>) = ranges.into_iter().unzip();
        starts.sort_by(f64::total_cmp);
        ends.sort_by(f64::total_cmp);
        IntervalCounts { starts, ends }
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn count_intersecting(&self, lo: f64, hi: f64) -> usize {
        let ends_before = self.ends.partition_point(|&e| e < lo);
        let starts_after = self.starts.len() - self.starts.partition_point(|&s| s <= hi);
        self.starts.len() - ends_before - starts_after
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NumericIntervalIndex {
    concepts: BTreeMap<Concept, IntervalCounts>,
    total: u64,
}

fn check_range(lo: f64, hi: f64) -> Result<(), IndexError> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        Err(IndexError::InvalidRange { min: lo, max: hi })
    } else {
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Directory {
    numeric_column_total: u64,
    concepts: Vec<DirectoryEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct DirectoryEntry {
    concept: Concept,
    file: String,
    intervals: u64,
    sha256: String,
}

impl NumericIntervalIndex {
    /// Builds from `NumericColumnRange` records; other records are ignored, as
    /// are ranges with `min > max` or non-finite endpoints.
    pub fn build<'a>(records: impl IntoIterator<Item = &'a IndexRecord>) -> Self {
        let mut ranges: BTreeMap<Concept, Vec<(f64, f64)>> = BTreeMap::new();
        for r in records {
            if let IndexRecord::NumericColumnRange {
                concept, min, max, ..
            } = r
            {
                if min.is_finite() && max.is_finite() && min <= max {
                    ranges.entry(concept.clone()).or_default().push((*min, *max));
                }
            }
        }
        Self::from_ranges(ranges)
    }

    pub fn from_ranges(ranges: BTreeMap<Concept, Vec<(f64, f64)>>) -> Self {
        let mut total = 0u64;
        let concepts = ranges
            .into_iter()
            .map(|(c, rs)| {
                total += rs.len() as u64;
                (c, IntervalCounts::from_ranges(rs))
            })
            .collect();
        NumericIntervalIndex { concepts, total }
    }

    pub fn count_intersecting(&self, concept: &Concept, lo: f64, hi: f64) -> Result<usize, IndexError> {
        check_range(lo, hi)?;
        Ok(self
            .concepts
            .get(concept)
            .map_or(0, |iv| iv.count_intersecting(lo, hi)))
    }

    pub fn total_intervals(&self, concept: &Concept) -> usize {
        self.concepts.get(concept).map_or(0, IntervalCounts::len)
    }

    /// Number of stored ranges for `concept`; one per numeric column.
    pub fn column_count(&self, concept: &Concept) -> u64 {
        self.total_intervals(concept) as u64
    }

    pub fn column_total(&self) -> u64 {
        self.total
    }

    pub fn contains(&self, concept: &Concept) -> bool {
        self.concepts.contains_key(concept)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// `Pr(r|c) × Pr(c)` with `Pr(r|c)` the intersecting share of `c`'s ranges
    /// and `Pr(c)` the share of all numeric ranges that belong to `c`.
    pub fn score(&self, concept: &Concept, lo: f64, hi: f64) -> Result<f64, IndexError> {
        check_range(lo, hi)?;
        let Some(iv) = self.concepts.get(concept) else {
            return Ok(0.0);
        };
        if iv.is_empty() || self.total == 0 {
            return Ok(0.0);
        }
        let likelihood = iv.count_intersecting(lo, hi) as f64 / iv.len() as f64;
        let prior = iv.len() as f64 / self.total as f64;
        Ok(likelihood * prior)
    }

    /// Scores `candidates` (or every stored concept), sorted descending.
    /// Candidates unknown to the index appear with score 0.
    pub fn score_concepts(
        &self,
        lo: f64,
        hi: f64,
        candidates: Option<&BTreeSet<Concept>>,
    ) -> Result<Vec<(Concept, f64)>, IndexError> {
        check_range(lo, hi)?;
        let mut out: Vec<(Concept, f64)> = match candidates {
            Some(set) => set
                .iter()
                .map(|c| Ok((c.clone(), self.score(c, lo, hi)?)))
                .collect::<Result<_, IndexError>>()?,
            None => self
                .concepts
                .keys()
                .map(|c| Ok((c.clone(), self.score(c, lo, hi)?)))
                .collect::<Result<_, IndexError>>()?,
        };
        sort_ranked(&mut out);
        Ok(out)
    }

    /// Writes `<dir>/<concept-hash>.bin` per concept and `<dir>/concepts.json`.
    ///
    /// Each `.bin` holds the sorted starts then the sorted ends, each array
    /// prefixed by its length as little-endian `u64`, values little-endian `f64`.
    pub fn persist(&self, dir: &Path) -> Result<(), IndexError> {
        let mut directory = Directory {
            numeric_column_total: self.total,
            concepts: vec![],
        };
        for (concept, iv) in &self.concepts {
            let mut bytes = Vec::with_capacity(16 + 16 * iv.len());
            for arr in [&iv.starts, &iv.ends] {
                bytes.extend_from_slice(&(arr.len() as u64).to_le_bytes());
                for x in arr {
                    bytes.extend_from_slice(&x.to_le_bytes());
                }
            }
            let file = format!("{}.bin", util::label_hash(concept.label()));
            persist::write_file(&dir.join(&file), &bytes)?;
            directory.concepts.push(DirectoryEntry {
                concept: concept.clone(),
                file,
                intervals: iv.len() as u64,
                sha256: util::checksum(&bytes),
            });
        }
        persist::write_json(&dir.join("concepts.json"), &directory)
    }

    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let directory: Directory = persist::read_json(&dir.join("concepts.json"))?;
        let mut concepts = BTreeMap::new();
        let mut total = 0u64;
        for entry in directory.concepts {
            let path = dir.join(&entry.file);
            let bytes = persist::read_verified(&path, &entry.sha256)?;
            let mut cursor = &bytes[..];
            let mut read_array = || -> Result<Vec<f64>, IndexError> {
                let len = take_u64(&mut cursor).ok_or_else(|| IndexError::corrupt(&path, "truncated length"))?;
                let len = usize::try_from(len).map_err(|_| IndexError::corrupt(&path, "bad length"))?;
                if cursor.len() < len.saturating_mul(8) {
                    return Err(IndexError::corrupt(&path, "truncated array"));
                }
                let (head, tail) = cursor.split_at(len * 8);
                cursor = tail;
                Ok(head
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect())
            };
            let starts = read_array()?;
            let ends = read_array()?;
            let sorted = |a: &[f64]| a.windows(2).all(|w| w[0] <= w[1]) && a.iter().all(|x| x.is_finite());
            if !cursor.is_empty()
                || starts.len() != ends.len()
                || starts.len() as u64 != entry.intervals
                || !sorted(&starts)
                || !sorted(&ends)
            {
                return Err(IndexError::corrupt(&path, "inconsistent interval arrays"));
            }
            total += entry.intervals;
            concepts.insert(entry.concept, IntervalCounts { starts, ends });
        }
        if total != directory.numeric_column_total {
            return Err(IndexError::corrupt(dir.join("concepts.json"), "column total mismatch"));
        }
        Ok(NumericIntervalIndex { concepts, total })
    }
}

fn take_u64(cursor: &mut &[u8]) -> Option<u64> {
    if cursor.len() < 8 {
        return None;
    }
    let (head, tail) = cursor.split_at(8);
    *cursor = tail;
    Some(u64::from_le_bytes(head.try_into().ok()?))
}
