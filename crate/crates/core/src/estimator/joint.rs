//! Table-level stages: tuple validation and joint re-ranking.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::{ColumnCandidates, EstimatorConfig, Indexes};
use crate::cooccur::{CooccurrenceIndex, TupleValue};
use crate::model::{normalize_entity, parse_number, sort_ranked, ColumnKind, Concept, Table};
use crate::util;

/// Most combinations scored exhaustively; larger beams use best-first search
/// with the same budget of expansions.
pub const JOINT_BUDGET: usize = 10_000;

fn tuple_value(kind: ColumnKind, raw: &str) -> Option<TupleValue> {
    match kind {
        ColumnKind::Numeric => parse_number(raw).map(TupleValue::Numeric),
        _ => {
            let v = normalize_entity(raw);
            (!v.is_empty()).then_some(TupleValue::Categorical(v))
        }
    }
}

/// Boosts candidates whose concept pairs match sampled rows in the tuple
/// store. A candidate with `n >= 1` matching occasions gains
/// `validation_scale * ln n`; one without matches keeps its score.
pub fn tuple_validate(candidates: &mut [ColumnCandidates], table: &Table, indexes: &Indexes, config: &EstimatorConfig) {
    if candidates.len() < 2 {
        return;
    }
    let mut rng = util::rng(config.seed, "tuple-rows", 0);
    let rows = util::sample_indices(table.row_count(), config.tuple_sample_rows, &mut rng);
    let columns = table.columns();
    let beam = config.beam_width;
    // (candidate list position, concept) -> occasions
    let mut occasions: HashMap<(usize, Concept), u64> = HashMap::new();
    for a in 0..candidates.len() {
        for b in a + 1..candidates.len() {
            let (ca, cb) = (&candidates[a], &candidates[b]);
            if ca.kind != ColumnKind::Categorical && cb.kind != ColumnKind::Categorical {
                continue;
            }
            let pairs: Vec<(TupleValue, TupleValue)> = rows
                .iter()
                .filter_map(|&r| {
                    let va = tuple_value(ca.kind, &columns[ca.column_index].values[r])?;
                    let vb = tuple_value(cb.kind, &columns[cb.column_index].values[r])?;
                    Some((va, vb))
                })
                .collect();
            for (x, _) in ca.ranked.iter().take(beam) {
                for (y, _) in cb.ranked.iter().take(beam) {
                    let n = pairs
                        .iter()
                        .filter(|(va, vb)| {
                            indexes
                                .cooccur
                                .tuple_matches(x, y, va, vb, config.epsilon)
                                .unwrap_or(false)
                        })
                        .count() as u64;
                    if n > 0 {
                        *occasions.entry((a, x.clone())).or_default() += n;
                        *occasions.entry((b, y.clone())).or_default() += n;
                    }
                }
            }
        }
    }
    for (pos, col) in candidates.iter_mut().enumerate() {
        let scale = col.validation_scale;
        for (c, s) in col.ranked.iter_mut() {
            if let Some(&n) = occasions.get(&(pos, c.clone())) {
                *s += scale * (n as f64).ln();
            }
        }
        sort_ranked(&mut col.ranked);
    }
}

fn pair_term(cooccur: &CooccurrenceIndex, earlier: &Concept, later: &Concept) -> f64 {
    let lift = cooccur.pair_freq(earlier, later) as f64 / cooccur.concept_freq(earlier).max(1) as f64;
    lift.ln_1p()
}

/// Joint assignment over the beams of `candidates` (one entry per annotated
/// column, in table order). Returns the chosen index into each beam and the
/// combination score.
pub fn joint_rerank(candidates: &[ColumnCandidates], indexes: &Indexes, config: &EstimatorConfig) -> (Vec<usize>, f64) {
    let beams: Vec<&[(Concept, f64)]> = candidates
        .iter()
        .map(|c| &c.ranked[..c.ranked.len().min(config.beam_width)])
        .collect();
    if beams.is_empty() || beams.iter().any(|b| b.is_empty()) {
        return (vec![0; beams.len()], 0.0);
    }
    let product = beams.iter().try_fold(1usize, |acc, b| acc.checked_mul(b.len()));
    match product {
        Some(p) if p <= JOINT_BUDGET => exhaustive(&beams, &indexes.cooccur),
        _ => best_first(&beams, &indexes.cooccur),
    }
}

fn combination_score(beams: &[&[(Concept, f64)]], pick: &[usize], cooccur: &CooccurrenceIndex) -> f64 {
    let mut s: f64 = beams.iter().zip(pick).map(|(b, &i)| b[i].1).sum();
    for i in 0..pick.len() {
        for j in i + 1..pick.len() {
            s += pair_term(cooccur, &beams[i][pick[i]].0, &beams[j][pick[j]].0);
        }
    }
    s
}

/// Higher score wins; ties go to the lexicographically smaller pick vector,
/// which is the per-column ranking order.
fn better(a: (f64, &[usize]), b: (f64, &[usize])) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.1 < b.1,
    }
}

fn exhaustive(beams: &[&[(Concept, f64)]], cooccur: &CooccurrenceIndex) -> (Vec<usize>, f64) {
    let mut pick = vec![0usize; beams.len()];
    let mut best = (pick.clone(), combination_score(beams, &pick, cooccur));
    loop {
        // odometer increment
        let mut k = beams.len();
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            pick[k] += 1;
            if pick[k] < beams[k].len() {
                break;
            }
            pick[k] = 0;
        }
        let s = combination_score(beams, &pick, cooccur);
        if better((s, &pick), (best.1, &best.0)) {
            best = (pick.clone(), s);
        }
    }
}

#[derive(Debug)]
struct State {
    bound: f64,
    partial: f64,
    pick: Vec<usize>,
}

impl PartialEq for State {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for State {}

impl PartialOrd for State {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for State {
    fn cmp(&self, o: &Self) -> Ordering {
        self.bound
            .total_cmp(&o.bound)
            .then_with(|| self.pick.len().cmp(&o.pick.len()))
            .then_with(|| o.pick.cmp(&self.pick))
    }
}

/// A*: each pair term is at most ln 2 because a lift never exceeds one, so
/// the bound below is admissible and the first complete state popped is
/// optimal. Falls back to greedy completion if the budget runs out.
fn best_first(beams: &[&[(Concept, f64)]], cooccur: &CooccurrenceIndex) -> (Vec<usize>, f64) {
    let m = beams.len();
    let best_rest: Vec<f64> = {
        let mut v = vec![0.0; m + 1];
        for i in (0..m).rev() {
            v[i] = v[i + 1] + beams[i][0].1;
        }
        v
    };
    let pair_cap = std::f64::consts::LN_2;
    let open_pairs = |assigned: usize| {
        let total = m * (m - 1) / 2;
        let done = assigned * assigned.saturating_sub(1) / 2;
        (total - done) as f64
    };
    let mut heap = BinaryHeap::new();
    heap.push(State {
        bound: best_rest[0] + open_pairs(0) * pair_cap,
        partial: 0.0,
        pick: Vec::new(),
    });
    let mut expansions = 0;
    let mut greedy_from: Option<State> = None;
    while let Some(state) = heap.pop() {
        let depth = state.pick.len();
        if depth == m {
            return (state.pick, state.partial);
        }
        expansions += 1;
        if expansions > JOINT_BUDGET {
            greedy_from = Some(state);
            break;
        }
        for (i, (c, s)) in beams[depth].iter().enumerate() {
            let mut partial = state.partial + s;
            for (j, &pj) in state.pick.iter().enumerate() {
                partial += pair_term(cooccur, &beams[j][pj].0, c);
            }
            let mut pick = state.pick.clone();
            pick.push(i);
            heap.push(State {
                bound: partial + best_rest[depth + 1] + open_pairs(depth + 1) * pair_cap,
                partial,
                pick,
            });
        }
    }
    let mut pick = greedy_from.map(|s| s.pick).unwrap_or_default();
    while pick.len() < m {
        let depth = pick.len();
        let mut best: Option<(usize, f64)> = None;
        for i in 0..beams[depth].len() {
            pick.push(i);
            let s = combination_score(&beams[..=depth], &pick, cooccur);
            pick.pop();
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        pick.push(best.expect("non-empty beam").0);
    }
    let s = combination_score(beams, &pick, cooccur);
    (pick, s)
}
