//! Synthetic fixtures for the benchmarks.

use std::collections::BTreeMap;

use c2_core::estimator::Indexes;
use c2_core::numeric_index::IntervalCounts;
use c2_core::{Column, Concept, CooccurrenceIndex, EntityConceptIndex, IndexRecord, NumericIntervalIndex, SourceId, Table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CONCEPTS: usize = 200;

fn concept(i: usize) -> Concept {
    Concept::new(&format!("concept {i}")).unwrap()
}

pub fn entity_name(i: usize) -> String {
    format!("entity {i}")
}

/// `n` random closed intervals inside [0, 1e6].
pub fn intervals(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a: f64 = rng.gen_range(0.0..1e6);
            let w: f64 = rng.gen_range(0.0..1e4);
            (a, a + w)
        })
        .collect()
}

pub fn interval_counts(n: usize, seed: u64) -> IntervalCounts {
    IntervalCounts::from_ranges(intervals(n, seed))
}

/// `entities` entities in one source, each mentioned under a few of
/// `CONCEPTS` concepts, plus numeric ranges and column pairs.
pub fn indexes(entities: usize, seed: u64) -> Indexes {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source = SourceId::new("web").unwrap();
    let mut records = Vec::with_capacity(entities * 3);
    for e in 0..entities {
        let home = e % CONCEPTS;
        for k in 0..3 {
            let c = if k == 0 { home } else { rng.gen_range(0..CONCEPTS) };
            for _ in 0..rng.gen_range(1..5) {
                records.push(IndexRecord::EntityMention {
                    source: source.clone(),
                    entity: entity_name(e),
                    concept: concept(c),
                });
            }
        }
    }
    let mut ranges: BTreeMap<Concept, Vec<(f64, f64)>> = BTreeMap::new();
    for (i, iv) in intervals(CONCEPTS * 20, seed).into_iter().enumerate() {
        ranges.entry(concept(i % CONCEPTS)).or_default().push(iv);
    }
    for _ in 0..CONCEPTS * 20 {
        records.push(IndexRecord::ColumnPair {
            source: source.clone(),
            concept_a: concept(rng.gen_range(0..CONCEPTS)),
            concept_b: concept(rng.gen_range(0..CONCEPTS)),
        });
    }
    Indexes {
        entity: EntityConceptIndex::build([source], &records),
        numeric: NumericIntervalIndex::from_ranges(ranges),
        cooccur: CooccurrenceIndex::build(&records),
        ..Indexes::default()
    }
}

/// A table of `columns` columns and `rows` rows; every second column is
/// numeric, the others list known entities.
pub fn table(entities: usize, columns: usize, rows: usize, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = (0..columns)
        .map(|c| {
            let values = (0..rows)
                .map(|_| {
                    if c % 2 == 1 {
                        format!("{:.1}", rng.gen_range(0.0..1e6))
                    } else {
                        entity_name(rng.gen_range(0..entities))
                    }
                })
                .collect();
            Column::new(Some(format!("col {c}")), values)
        })
        .collect();
    Table::new(cols).unwrap()
}
