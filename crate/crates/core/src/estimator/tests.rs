use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use super::*;
use crate::belief::RelationsBuilder;
use crate::ingest::IndexRecord;
use crate::model::{Column, SourceId};

fn c(label: &str) -> Concept {
    Concept::new(label).unwrap()
}

fn src(id: &str) -> SourceId {
    SourceId::new(id).unwrap()
}

fn mentions(source: &str, entity: &str, counts: &[(&str, usize)]) -> Vec<IndexRecord> {
    let mut out = vec![];
    for (concept, n) in counts {
        for _ in 0..*n {
            out.push(IndexRecord::EntityMention {
                source: src(source),
                entity: entity.into(),
                concept: c(concept),
            });
        }
    }
    out
}

fn entity_indexes(sources: &[&str], records: &[IndexRecord]) -> Indexes {
    Indexes {
        entity: crate::entity_index::EntityConceptIndex::build(sources.iter().map(|s| src(s)), records),
        ..Indexes::default()
    }
}

fn set(labels: &[&str]) -> BTreeSet<Concept> {
    labels.iter().map(|l| c(l)).collect()
}

fn column(values: &[&str]) -> Vec<String> {
    values.iter().map(|v| v.to_string()).collect()
}

#[test]
fn cell_distributions() {
    let mut records = mentions("s", "chattanooga", &[("city", 9), ("team", 1)]);
    records.extend(mentions("s", "memphis", &[("city", 5)]));
    let idx = entity_indexes(&["s"], &records);
    let cfg = EstimatorConfig::default();
    let u = set(&["city", "team"]);
    let d = cell_distribution(&idx, "Chattanooga", &src("s"), &u, &cfg).unwrap();
    assert_eq!((d.get("city"), d.get("team")), (0.9, 0.1));
    assert!((d.total() - 1.0).abs() < 1e-9);
    let d = cell_distribution(&idx, "memphis", &src("s"), &u, &cfg).unwrap();
    assert_eq!((d.get("city"), d.get("team")), (5.0 / 6.0, 1.0 / 6.0));
    let d = cell_distribution(&idx, "nowhere", &src("s"), &set(&["city"]), &cfg).unwrap();
    assert_eq!(d.get("city"), 1.0);
    assert!(cell_distribution(&idx, "x", &src("other"), &u, &cfg).is_err());
}

#[test]
fn shared_cell_may_exceed_one() {
    let records = mentions("s", "ada", &[("human", 30), ("person", 30), ("object", 40)]);
    let mut idx = entity_indexes(&["s"], &records);
    idx.relations = RelationsBuilder::new().synonyms([c("human"), c("person")]).build().unwrap();
    let u = set(&["human", "person", "object"]);
    let d = cell_distribution(&idx, "ada", &src("s"), &u, &EstimatorConfig::default()).unwrap();
    assert_eq!((d.get("human"), d.get("person"), d.get("object")), (0.6, 0.6, 0.4));
    assert_eq!(d.context, crate::model::DistributionContext::PostBeliefSharing);
}

#[test]
fn two_entity_product() {
    let mut records = mentions("s", "e1", &[("c1", 9), ("c2", 1)]);
    records.extend(mentions("s", "e2", &[("c1", 4), ("c2", 1)]));
    let idx = entity_indexes(&["s"], &records);
    let cands = categorical_column_candidates(&column(&["e1", "e2"]), 0, &idx, &EstimatorConfig::default()).unwrap();
    assert_eq!(cands.ranked[0].0, c("c1"));
    assert!((cands.ranked[0].1 - 0.72f64.ln()).abs() < 1e-12);
    assert!((cands.ranked[1].1 - 0.02f64.ln()).abs() < 1e-12);
    assert!((cands.ranked[0].1 + 0.3285).abs() < 1e-4);
    assert!((cands.ranked[1].1 + 3.912).abs() < 1e-3);
}

#[test]
fn pervasive_concept_wins() {
    // each code's top concept differs, but "iata code" is always present
    let codes = ["jfk", "sin", "lhr", "cdg", "nrt"];
    let rivals = ["person", "company", "song", "film", "river"];
    let mut records = vec![];
    for (i, code) in codes.iter().enumerate() {
        records.extend(mentions("s", code, &[(rivals[i], 10), ("iata code", 6)]));
    }
    let idx = entity_indexes(&["s"], &records);
    for (i, code) in codes.iter().enumerate() {
        let top = idx.entity.lookup(code, &src("s")).unwrap()[0].concept.clone();
        assert_eq!(top, c(rivals[i]));
    }
    let cands = categorical_column_candidates(&column(&codes), 0, &idx, &EstimatorConfig::default()).unwrap();
    assert_eq!(cands.ranked[0].0, c("iata code"));
}

#[test]
fn no_evidence() {
    let idx = entity_indexes(&["s"], &mentions("s", "known", &[("x", 1)]));
    let r = categorical_column_candidates(&column(&["nope", "zip"]), 0, &idx, &EstimatorConfig::default());
    assert_eq!(r, Err(EstimateError::NoEvidence));
}

fn smoothing_fixture() -> (Indexes, Vec<String>) {
    let mut records = vec![];
    let mut values = vec![];
    for i in 0..9 {
        let e = format!("town {i}");
        records.extend(mentions("s", &e, &[("city", 8), ("band", 1)]));
        values.push(e);
    }
    values.push("never seen".into());
    (entity_indexes(&["s"], &records), values)
}

#[test]
fn smoothing_survival() {
    let (idx, values) = smoothing_fixture();
    let on = categorical_column_candidates(&values, 0, &idx, &EstimatorConfig::default()).unwrap();
    assert_eq!(on.ranked[0].0, c("city"));
    let mut off = EstimatorConfig::default();
    off.smoothing = false;
    let r = categorical_column_candidates(&values, 0, &idx, &off);
    assert_eq!(r, Err(EstimateError::NoEvidence));
    let d = cell_distribution(&idx, "never seen", &src("s"), &set(&["city"]), &off).unwrap();
    assert!(d.is_empty());
}

#[test]
fn weights_matter_but_scaling_does_not() {
    let mut records = mentions("a", "x", &[("p", 3), ("q", 1)]);
    records.extend(mentions("b", "x", &[("p", 1), ("q", 4)]));
    let idx = entity_indexes(&["a", "b"], &records);
    let values = column(&["x"]);
    let top = |wa: f64, wb: f64| {
        let mut cfg = EstimatorConfig::default();
        cfg.source_weights.insert(src("a"), wa);
        cfg.source_weights.insert(src("b"), wb);
        categorical_column_candidates(&values, 0, &idx, &cfg).unwrap().ranked[0].0.clone()
    };
    assert_eq!(top(1.0, 1.0), c("q"));
    assert_eq!(top(3.0, 1.0), c("p"));
    assert_eq!(top(30.0, 10.0), c("p"));
}

fn numeric_indexes() -> Indexes {
    let mut ranges: BTreeMap<Concept, Vec<(f64, f64)>> = BTreeMap::new();
    ranges.insert(c("age"), vec![(0.0, 100.0), (18.0, 65.0), (1.0, 90.0)]);
    ranges.insert(c("height"), vec![(8000.0, 8900.0), (4000.0, 8848.0), (100.0, 3000.0)]);
    Indexes {
        numeric: NumericIntervalIndex::from_ranges(ranges),
        ..Indexes::default()
    }
}

#[test]
fn numeric_candidates() {
    let idx = numeric_indexes();
    let cfg = EstimatorConfig::default();
    let scope = set(&["age", "height"]);
    let cands = numeric_column_candidates(&column(&["8,848", "8611", "8586"]), 0, &scope, &idx, &cfg).unwrap();
    assert_eq!(cands.ranked[0].0, c("height"));
    assert!((cands.ranked[0].1 - (2.0f64 / 3.0 * 0.5).ln()).abs() < 1e-12);
    let single = numeric_column_candidates(&column(&["50"]), 0, &scope, &idx, &cfg).unwrap();
    assert_eq!(single.ranked[0].0, c("age"));
    assert_eq!(
        numeric_column_candidates(&column(&["n/a"]), 0, &scope, &idx, &cfg),
        Err(EstimateError::NoParseableValues)
    );
    let only_age = numeric_column_candidates(&column(&["8848"]), 0, &set(&["age"]), &idx, &cfg);
    assert_eq!(only_age, Err(EstimateError::NoEvidence));
}

#[test]
fn scope_is_capped() {
    let mut records = vec![];
    let mut ranges: BTreeMap<Concept, Vec<(f64, f64)>> = BTreeMap::new();
    for i in 0..100 {
        let target = format!("measure {i:03}");
        for _ in 0..(i + 1) {
            records.push(IndexRecord::ColumnPair {
                source: src("s"),
                concept_a: c("station"),
                concept_b: c(&target),
            });
        }
        ranges.insert(c(&target), vec![(0.0, 1.0)]);
    }
    let idx = Indexes {
        cooccur: crate::cooccur::CooccurrenceIndex::build(&records),
        numeric: NumericIntervalIndex::from_ranges(ranges),
        ..Indexes::default()
    };
    let cat = ColumnCandidates {
        column_index: 0,
        kind: ColumnKind::Categorical,
        ranked: vec![(c("station"), -1.0)],
        validation_scale: 1.0,
    };
    let all = typed::numeric_concepts(&idx);
    let scope = search_scope(&[&cat], &idx, &EstimatorConfig::default(), &all);
    assert_eq!(scope.len(), 25);
    assert!(scope.contains(&c("measure 099")) && !scope.contains(&c("measure 074")));
    // no categorical column: every numeric concept
    assert_eq!(search_scope(&[], &idx, &EstimatorConfig::default(), &all).len(), 100);
}

#[test]
fn mixed_candidates() {
    let mut tree = crate::pattern::PatternTree::default();
    let sig = crate::pattern::SymbolSignature::of;
    tree.add_leaf(c("email"), sig("@."), vec![r"^[a-z]+@[a-z]+\.[a-z]+$".into()], 5, 0).unwrap();
    tree.add_leaf(c("instagram handle"), sig("@"), vec![r"^@[a-z.]+$".into()], 2, 0).unwrap();
    let idx = Indexes {
        pattern: tree,
        ..Indexes::default()
    };
    let cfg = EstimatorConfig::default();
    let all = set(&["email", "instagram handle"]);
    let emails = column(&["a@b.com", "dan@x.org", "q@r.net"]);
    let cands = mixed_column_candidates(&emails, 0, &all, &idx, &cfg).unwrap();
    assert_eq!(cands.ranked.len(), 1);
    assert_eq!(cands.ranked[0].0, c("email"));
    let handles = column(&["@dan.singer", "dan@x.org"]);
    assert_eq!(mixed_column_candidates(&handles, 0, &all, &idx, &cfg).unwrap().ranked.len(), 2);
    assert_eq!(
        mixed_column_candidates(&emails, 0, &set(&["phone"]), &idx, &cfg),
        Err(EstimateError::NoRoutedLeaves)
    );
}

fn table(cols: &[(&str, &[&str])]) -> Table {
    Table::new(
        cols.iter()
            .map(|(h, vs)| Column::new(Some(h.to_string()), column(vs)))
            .collect(),
    )
    .unwrap()
}

fn airports() -> (Indexes, Table) {
    let mut records = vec![];
    for (code, city) in [("jfk", "new york"), ("sin", "singapore"), ("lhr", "london")] {
        records.extend(mentions("s", code, &[("iata code", 3)]));
        records.extend(mentions("s", city, &[("city", 4), ("team", 1)]));
    }
    let mut ranges: BTreeMap<Concept, Vec<(f64, f64)>> = BTreeMap::new();
    ranges.insert(c("elevation"), vec![(0.0, 50.0), (2.0, 300.0)]);
    ranges.insert(c("population"), vec![(1e5, 1e7)]);
    for _ in 0..5 {
        records.push(IndexRecord::ColumnPair {
            source: src("s"),
            concept_a: c("iata code"),
            concept_b: c("elevation"),
        });
    }
    let mut idx = entity_indexes(&["s"], &records);
    idx.cooccur = crate::cooccur::CooccurrenceIndex::build(&records);
    idx.numeric = NumericIntervalIndex::from_ranges(ranges);
    let t = table(&[
        ("code", &["JFK", "SIN", "LHR"]),
        ("town", &["New York", "Singapore", "London"]),
        ("elev", &["4", "7", "25"]),
    ]);
    (idx, t)
}

#[test]
fn annotate_stages() {
    let (idx, t) = airports();
    let r = annotate(&t, &idx, &EstimatorConfig::default()).unwrap();
    assert_eq!(r.columns.len(), 3);
    assert_eq!(r.columns[0].joint_choice, Some(c("iata code")));
    assert_eq!(r.columns[1].joint_choice, Some(c("city")));
    // population is outside the scope even though it would score
    assert_eq!(r.columns[2].joint_choice, Some(c("elevation")));
    assert_eq!(r.columns[2].candidates.len(), 1);
    assert_eq!(r, annotate(&t, &idx, &EstimatorConfig::default()).unwrap());

    let mut narrow = EstimatorConfig::default();
    narrow.beam_width = 1;
    let r = annotate(&t, &idx, &narrow).unwrap();
    for col in &r.columns {
        assert_eq!(col.joint_choice.as_ref(), col.candidates.first().map(|s| &s.concept));
    }
}

#[test]
fn unannotated_columns_do_not_fail_table() {
    let (idx, _) = airports();
    let t = table(&[("a", &["zzz", "yyy"]), ("b", &["", ""]), ("c", &["5", "6"])]);
    let r = annotate(&t, &idx, &EstimatorConfig::default()).unwrap();
    assert!(r.columns[0].unannotated.is_some());
    assert_eq!(r.columns[1].kind, None);
    assert!(r.columns[1].unannotated.is_some());
    // no categorical evidence: all numeric concepts are searched
    assert_eq!(r.columns[2].joint_choice, Some(c("elevation")));
    assert!(Table::new(vec![]).is_err());
    let mut bad = EstimatorConfig::default();
    bad.epsilon = 2.0;
    assert!(annotate(&t, &idx, &bad).is_err());
}

/// Exact product of smoothed probabilities.
fn oracle(lists: &[Vec<(usize, u64)>], concepts: usize) -> Vec<BigRational> {
    let universe: BTreeSet<usize> = lists.iter().flatten().map(|(c, _)| *c).collect();
    (0..concepts)
        .map(|k| {
            if !universe.contains(&k) {
                return BigRational::from_integer(BigInt::from(0));
            }
            let mut p = BigRational::from_integer(BigInt::from(1));
            for list in lists {
                let total: u64 = list.iter().map(|(_, n)| n).sum();
                let missing = universe.iter().filter(|u| !list.iter().any(|(c, _)| c == *u)).count() as u64;
                let n = list.iter().find(|(c, _)| *c == k).map_or(1, |(_, n)| *n);
                p *= BigRational::new(BigInt::from(n), BigInt::from(total + missing));
            }
            p
        })
        .collect()
}

fn ln_rational(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    // exact enough: numerator and denominator are far below f64 overflow
    r.numer().to_f64().unwrap().ln() - r.denom().to_f64().unwrap().ln()
}

proptest! {
    #[test]
    fn matches_exact_oracle(
        lists in prop::collection::vec(prop::collection::btree_map(0usize..5, 1u64..20, 0..5), 1..=5)
    ) {
        let lists: Vec<Vec<(usize, u64)>> = lists.into_iter().map(|m| m.into_iter().collect()).collect();
        prop_assume!(lists.iter().any(|l| !l.is_empty()));
        let mut records = vec![];
        let mut values = vec![];
        for (j, list) in lists.iter().enumerate() {
            let e = format!("e{j}");
            for (k, n) in list {
                records.extend(mentions("s", &e, &[(&format!("c{k}"), *n as usize)]));
            }
            values.push(e);
        }
        let idx = entity_indexes(&["s"], &records);
        let got = categorical_column_candidates(&values, 0, &idx, &EstimatorConfig::default()).unwrap();
        let exact = oracle(&lists, 5);
        let mut expected: Vec<(String, &BigRational)> = exact
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > BigRational::from_integer(BigInt::from(0)))
            .map(|(k, p)| (format!("c{k}"), p))
            .collect();
        expected.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(&b.0)));
        prop_assert_eq!(got.ranked.len(), expected.len());
        for ((gc, gs), (ec, ep)) in got.ranked.iter().zip(&expected) {
            prop_assert_eq!(gc.label(), ec.as_str());
            prop_assert!((gs - ln_rational(ep)).abs() < 1e-9);
        }
    }

    #[test]
    fn common_weight_scaling_keeps_ranking(
        lists in prop::collection::vec(prop::collection::btree_map(0usize..4, 1u64..9, 1..4), 1..4),
        w in 0.1f64..10.0,
    ) {
        let mut records = vec![];
        let mut values = vec![];
        for (j, list) in lists.iter().enumerate() {
            for (k, n) in list {
                records.extend(mentions(if j % 2 == 0 { "a" } else { "b" }, &format!("e{j}"), &[(&format!("c{k}"), *n as usize)]));
            }
            values.push(format!("e{j}"));
        }
        let idx = entity_indexes(&["a", "b"], &records);
        let mut base = EstimatorConfig::default();
        base.source_weights.insert(src("a"), 1.0);
        base.source_weights.insert(src("b"), 2.0);
        let mut scaled = base.clone();
        for v in scaled.source_weights.values_mut() {
            *v *= w;
        }
        let r1 = categorical_column_candidates(&values, 0, &idx, &base).unwrap();
        let r2 = categorical_column_candidates(&values, 0, &idx, &scaled).unwrap();
        // exact ties may resolve either way under rounding; compare strict orders
        for (i, (a, sa)) in r1.ranked.iter().enumerate() {
            for (b, sb) in &r1.ranked[i + 1..] {
                if sa - sb > 1e-9 * sa.abs().max(1.0) {
                    let pa = r2.ranked.iter().position(|x| &x.0 == a).unwrap();
                    let pb = r2.ranked.iter().position(|x| &x.0 == b).unwrap();
                    prop_assert!(pa < pb);
                }
            }
        }
    }

    #[test]
    fn zero_match_scores_unchanged(prior in prop::collection::vec(-20.0f64..0.0, 2..4)) {
        let (idx, t) = airports();
        let ranked: Vec<(Concept, f64)> = prior.iter().enumerate().map(|(i, s)| (c(&format!("k{i}")), *s)).collect();
        let mut cands = vec![
            ColumnCandidates { column_index: 0, kind: ColumnKind::Categorical, ranked: ranked.clone(), validation_scale: 3.0 },
            ColumnCandidates { column_index: 2, kind: ColumnKind::Numeric, ranked: ranked.clone(), validation_scale: 1.0 },
        ];
        tuple_validate(&mut cands, &t, &idx, &EstimatorConfig::default());
        let mut sorted = ranked.clone();
        crate::model::sort_ranked(&mut sorted);
        prop_assert_eq!(&cands[0].ranked, &sorted);
        prop_assert_eq!(&cands[1].ranked, &sorted);
    }
}
