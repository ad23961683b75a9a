use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{ColumnCandidates, EstimatorConfig, Indexes};
use crate::entity_index::ConceptCount;
use crate::error::{EstimateError, IndexError};
use crate::model::{normalize_entity, sort_ranked, ColumnKind, Concept, ConceptDistribution, DistributionContext, SourceId};
use crate::util;

/// Shared counts of one fetched list plus the denominator that turns them
/// into probabilities: the pre-sharing total plus one per smoothed concept.
struct CellCounts {
    counts: BTreeMap<Concept, f64>,
    denominator: f64,
    shared: bool,
}

fn cell_counts(
    indexes: &Indexes,
    list: &[ConceptCount],
    universe_len: usize,
    config: &EstimatorConfig,
) -> CellCounts {
    let pre: BTreeMap<Concept, f64> = list.iter().map(|cc| (cc.concept.clone(), cc.count as f64)).collect();
    let total: f64 = pre.values().sum();
    let (counts, shared) = if config.belief_sharing && !indexes.relations.is_empty() {
        let s = indexes.relations.share(&pre, config.similarity_threshold).entries;
        let changed = s != pre;
        (s, changed)
    } else {
        (pre, false)
    };
    let missing = if config.smoothing {
        universe_len.saturating_sub(counts.len())
    } else {
        0
    };
    CellCounts {
        counts,
        denominator: total + missing as f64,
        shared,
    }
}

/// Probability of each universe concept for one entity in one source.
/// Concepts absent from the fetched list get a count of one when smoothing is
/// on; after belief sharing the entries may sum above one.
pub fn cell_distribution(
    indexes: &Indexes,
    entity: &str,
    source: &SourceId,
    universe: &BTreeSet<Concept>,
    config: &EstimatorConfig,
) -> Result<ConceptDistribution, IndexError> {
    let list = indexes.entity.lookup(&normalize_entity(entity), source)?;
    let list: Vec<ConceptCount> = list.iter().filter(|cc| universe.contains(&cc.concept)).cloned().collect();
    let cell = cell_counts(indexes, &list, universe.len(), config);
    let context = if cell.shared {
        DistributionContext::PostBeliefSharing
    } else {
        DistributionContext::Cell
    };
    let mut dist = ConceptDistribution::new(context);
    if cell.denominator == 0.0 {
        return Ok(dist);
    }
    for c in universe {
        let n = match cell.counts.get(c) {
            Some(&n) => n,
            None if config.smoothing => 1.0,
            None => continue,
        };
        dist.entries.insert(c.clone(), n / cell.denominator);
    }
    Ok(dist)
}

/// Distinct normalized non-empty values, sorted, sampled down to `cap`.
pub(crate) fn sample_entities<S: AsRef<str>>(values: &[S], cap: usize, seed: u64, column: usize) -> Vec<String> {
    let distinct: BTreeSet<String> = values
        .iter()
        .map(|v| normalize_entity(v.as_ref()))
        .filter(|v| !v.is_empty())
        .collect();
    let distinct: Vec<String> = distinct.into_iter().collect();
    let mut rng = util::rng(seed, "entities", column as u64);
    util::sample_indices(distinct.len(), cap, &mut rng)
        .into_iter()
        .map(|i| distinct[i].clone())
        .collect()
}

/// Ranks concepts by Σ_d α_d Σ_j ln Pr_d(entity_j = c) over sampled entities.
pub fn categorical_column_candidates<S: AsRef<str>>(
    values: &[S],
    column_index: usize,
    indexes: &Indexes,
    config: &EstimatorConfig,
) -> Result<ColumnCandidates, EstimateError> {
    let entities = sample_entities(values, config.entity_sample_size, config.seed, column_index);
    let sources: Vec<&SourceId> = indexes.entity.sources().collect();

    // first pass: fetch every list and collect the universe
    let mut fetched: Vec<Vec<&[ConceptCount]>> = Vec::with_capacity(sources.len());
    let mut universe: BTreeSet<&Concept> = BTreeSet::new();
    for s in &sources {
        let mut lists = Vec::with_capacity(entities.len());
        for e in &entities {
            let list = indexes.entity.lookup(e, s).unwrap_or(&[]);
            universe.extend(list.iter().map(|cc| &cc.concept));
            lists.push(list);
        }
        fetched.push(lists);
    }
    if universe.is_empty() {
        return Err(EstimateError::NoEvidence);
    }
    let universe: Vec<Concept> = universe.into_iter().cloned().collect();
    let position: HashMap<&Concept, usize> = universe.iter().enumerate().map(|(i, c)| (c, i)).collect();

    // terms are summed in sorted order so that permuted products tie exactly
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); universe.len()];
    let mut weight_sum = 0.0;
    for (s, lists) in sources.iter().zip(&fetched) {
        let alpha = config.weight(s);
        weight_sum += alpha;
        for list in lists {
            let cell = cell_counts(indexes, list, universe.len(), config);
            if cell.denominator == 0.0 {
                // nothing fetched and no smoothing: every concept is impossible
                terms.iter_mut().for_each(|t| t.push(f64::NEG_INFINITY));
                continue;
            }
            let absent = if config.smoothing {
                (1.0 / cell.denominator).ln()
            } else {
                f64::NEG_INFINITY
            };
            let mut seen = vec![false; universe.len()];
            for (c, &n) in &cell.counts {
                let i = position[c];
                seen[i] = true;
                terms[i].push(alpha * (n / cell.denominator).ln());
            }
            for (i, t) in terms.iter_mut().enumerate() {
                if !seen[i] {
                    t.push(alpha * absent);
                }
            }
        }
    }

    let scores = terms.into_iter().map(|mut t| {
        t.sort_by(f64::total_cmp);
        t.into_iter().sum::<f64>()
    });
    let mut ranked: Vec<(Concept, f64)> = universe
        .into_iter()
        .zip(scores)
        .filter(|(_, s)| s.is_finite())
        .collect();
    if ranked.is_empty() {
        return Err(EstimateError::NoEvidence);
    }
    sort_ranked(&mut ranked);
    ranked.truncate(config.top_k);
    Ok(ColumnCandidates {
        column_index,
        kind: ColumnKind::Categorical,
        ranked,
        validation_scale: entities.len() as f64 * weight_sum,
    })
}
