mod common;

use std::collections::{BTreeMap, BTreeSet};

use cophe::{
    augment, confusion_counts, document_confusion, evaluate, flat_confusion, parse_code, ConfusionCounts, EvalOptions,
    EvalReport, Hierarchy, LabelSet, Level, LevelCounts, NodeId, Propagation, Regime,
};
use proptest::prelude::*;
use proptest::sample::subsequence;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{oracle_tally, random_leaves, synthetic_universe};

fn code_text() -> impl Strategy<Value = String> {
    let category = prop_oneof!["[0-9]{3}", "[0-9]{2}", "V[0-9]{2}", "E[0-9]{3}",];
    (category, "[0-9]{0,2}").prop_map(|(c, e)| if e.is_empty() { c } else { format!("{c}.{e}") })
}

// A pool with shared families so that ancestors collide across leaves.
const POOL: &[&str] = &[
    "364.11", "364.12", "364.21", "364.24", "364.3", "364.41", "364.9", "364", "365.10", "365.1", "370.0", "401.0",
    "401.1", "401.9", "425.0", "425.3", "428.0", "428.1", "250.00", "250.01", "305.1", "V58.61", "V58.6", "V07.2",
    "E849.7", "E849.0", "36.15", "36.1", "00.14", "019.1", "042", "043.9",
];

fn doc_strategy(id: &'static str) -> impl Strategy<Value = LabelSet> {
    subsequence(POOL, 0..=12).prop_map(move |codes| LabelSet::parse(id, &codes).unwrap())
}

fn report(corpus: &[(LabelSet, LabelSet)], max_level: Level) -> EvalReport {
    evaluate(corpus, &Hierarchy::icd9(max_level), &EvalOptions::default()).unwrap()
}

fn all_counts(r: &EvalReport) -> Vec<(Regime, Option<Level>, ConfusionCounts)> {
    let mut out = Vec::new();
    for rr in &r.regimes {
        out.push((rr.regime, None, rr.overall.counts));
        for l in &rr.levels {
            out.push((rr.regime, Some(l.level), l.scores.counts));
        }
    }
    out
}

proptest! {
    #[test]
    fn parse_render_round_trip(text in code_text()) {
        let code = parse_code(&text).unwrap();
        prop_assert_eq!(code.to_string(), text.clone());
        prop_assert_eq!(parse_code(&format!("  {text}\t")).unwrap(), code.clone());
        let expected = match code.etiology().len() { 0 => Level::E0, 1 => Level::E1, _ => Level::E2 };
        prop_assert_eq!(code.native_level(), expected);
    }

    #[test]
    fn ancestors_are_functional_and_nested(text in code_text()) {
        let h = Hierarchy::icd9(Level::Chapter);
        let code = parse_code(&text).unwrap();
        let mut seen = BTreeSet::new();
        for level in Level::ALL {
            let node = h.ancestor_at(&code, level).unwrap();
            prop_assert_eq!(node.is_some(), level >= code.native_level());
            if let Some(n) = node {
                // a node id never shows up on two levels
                prop_assert!(seen.insert(n.to_string()), "{} repeated", n);
            }
        }
        if let (Some(e1), Some(e0)) = (h.ancestor_at(&code, Level::E1).unwrap(), h.ancestor_at(&code, Level::E0).unwrap()) {
            let prefix = format!("{e0}.");
            prop_assert!(e1.as_str().starts_with(&prefix));
        }
        // deterministic
        prop_assert_eq!(h.ancestor_at(&code, Level::Chapter).unwrap(), h.ancestor_at(&code, Level::Chapter).unwrap());
    }

    #[test]
    fn binary_is_count_clamped(doc in doc_strategy("d"), max in prop_oneof![Just(Level::E1), Just(Level::E0), Just(Level::Chapter)]) {
        let h = Hierarchy::icd9(max);
        let count = augment(&doc, &h, Propagation::Count).unwrap();
        let binary = augment(&doc, &h, Propagation::Binary).unwrap();
        prop_assert_eq!(count.binarize(), binary.clone());
        for level in h.levels() {
            let a: Vec<&NodeId> = count.level(level).unwrap().keys().collect();
            let b: Vec<&NodeId> = binary.level(level).unwrap().keys().collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn count_dominates_binary_per_node(pred in doc_strategy("d"), gold in doc_strategy("d")) {
        let h = Hierarchy::icd9(Level::Chapter);
        let c = document_confusion(
            &augment(&pred, &h, Propagation::Count).unwrap(),
            &augment(&gold, &h, Propagation::Count).unwrap(),
        ).unwrap();
        let b = document_confusion(
            &augment(&pred, &h, Propagation::Binary).unwrap(),
            &augment(&gold, &h, Propagation::Binary).unwrap(),
        ).unwrap();
        for (level, nodes) in &b {
            for (node, bc) in nodes {
                let cc = c[level][node];
                prop_assert!(cc.tp >= bc.tp && cc.fp >= bc.fp && cc.fn_ >= bc.fn_);
            }
            prop_assert_eq!(nodes.len(), c[level].len());
        }
    }

    #[test]
    fn binary_counts_reduce_to_standard_cells(
        pred in prop::collection::btree_set(0u8..30, 0..20),
        gold in prop::collection::btree_set(0u8..30, 0..20),
    ) {
        let to_counts = |set: &BTreeSet<u8>, propagation| {
            let nodes: BTreeMap<NodeId, u64> = set.iter().map(|n| (NodeId::new(format!("n{n}")), 1)).collect();
            LevelCounts::from_nodes(propagation, [(Level::E0, nodes)].into()).unwrap()
        };
        let cophe = document_confusion(&to_counts(&pred, Propagation::Count), &to_counts(&gold, Propagation::Count)).unwrap();
        let set = document_confusion(&to_counts(&pred, Propagation::Binary), &to_counts(&gold, Propagation::Binary)).unwrap();
        prop_assert_eq!(&cophe, &set);
        for (node, cell) in &cophe[&Level::E0] {
            let n: u8 = node.as_str()[1..].parse().unwrap();
            let (p, g) = (pred.contains(&n), gold.contains(&n));
            let standard = ConfusionCounts::new((p && g) as u64, (p && !g) as u64, (!p && g) as u64);
            prop_assert_eq!(*cell, standard);
        }
    }

    #[test]
    fn permutation_invariance(docs in prop::collection::vec((doc_strategy("x"), doc_strategy("x")), 1..6), seed in any::<u64>()) {
        let corpus: Vec<(LabelSet, LabelSet)> = docs.into_iter().enumerate().map(|(i, (p, g))| {
            let id = format!("doc{i}");
            (LabelSet::new(id.clone(), p.codes().iter().cloned()).unwrap(),
             LabelSet::new(id, g.codes().iter().cloned()).unwrap())
        }).collect();
        let mut shuffled = corpus.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        // label order inside a document
        let shuffled: Vec<_> = shuffled.into_iter().map(|(p, g)| {
            let mut pc: Vec<_> = p.codes().iter().cloned().collect();
            pc.reverse();
            (LabelSet::new(p.doc_id(), pc).unwrap(), g)
        }).collect();
        prop_assert_eq!(report(&corpus, Level::Chapter), report(&shuffled, Level::Chapter));
    }

    #[test]
    fn concatenation_sums_counts(
        a in prop::collection::vec((doc_strategy("x"), doc_strategy("x")), 0..4),
        b in prop::collection::vec((doc_strategy("x"), doc_strategy("x")), 0..4),
    ) {
        let rename = |docs: Vec<(LabelSet, LabelSet)>, prefix: &str| -> Vec<(LabelSet, LabelSet)> {
            docs.into_iter().enumerate().map(|(i, (p, g))| {
                let id = format!("{prefix}{i}");
                (LabelSet::new(id.clone(), p.codes().iter().cloned()).unwrap(),
                 LabelSet::new(id, g.codes().iter().cloned()).unwrap())
            }).collect()
        };
        let a = rename(a, "a");
        let b = rename(b, "b");
        let both: Vec<_> = a.iter().chain(&b).cloned().collect();
        let (ra, rb, rab) = (report(&a, Level::Chapter), report(&b, Level::Chapter), report(&both, Level::Chapter));
        for ((x, y), z) in all_counts(&ra).into_iter().zip(all_counts(&rb)).zip(all_counts(&rab)) {
            prop_assert_eq!(x.2 + y.2, z.2);
        }
    }

    #[test]
    fn e2_only_corpus_recovers_flat_counts(
        pred in subsequence(&["001.11", "010.21", "140.31", "250.41", "364.51", "401.61", "428.71", "V58.61", "E849.71", "36.15"][..], 0..=10),
        gold in subsequence(&["001.11", "010.21", "140.31", "250.41", "364.51", "401.61", "428.71", "V58.61", "E849.71", "36.15"][..], 0..=10),
    ) {
        let corpus = vec![(LabelSet::parse("d", &pred).unwrap(), LabelSet::parse("d", &gold).unwrap())];
        let r = report(&corpus, Level::Chapter);
        let e2 = r.regime(Regime::Cophe).unwrap().level(Level::E2).unwrap().scores.counts;
        prop_assert_eq!(e2, flat_confusion(&corpus[0].0, &corpus[0].1));
        prop_assert_eq!(e2, r.regime(Regime::Flat).unwrap().overall.counts);
    }

    #[test]
    fn augment_matches_tree_walk(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = synthetic_universe(&mut rng);
        let leaves = random_leaves(&u, &mut rng, 50);
        let doc = u.label_set("d", &leaves);
        for max in [Level::E1, Level::E0, Level::Chapter] {
            let h = Hierarchy::new(u.table.clone(), max, false).unwrap();
            for (propagation, binary) in [(Propagation::Count, false), (Propagation::Binary, true)] {
                let got = augment(&doc, &h, propagation).unwrap();
                let want = oracle_tally(&u, &leaves, max, binary);
                for level in h.levels() {
                    let got_level: BTreeMap<String, u64> =
                        got.level(level).unwrap().iter().map(|(n, c)| (n.to_string(), *c)).collect();
                    prop_assert_eq!(&got_level, &want[&level]);
                }
            }
        }
    }
}

#[test]
fn exhaustive_binary_cells() {
    for (x, y, want) in [
        (0, 0, ConfusionCounts::new(0, 0, 0)),
        (1, 0, ConfusionCounts::new(0, 1, 0)),
        (0, 1, ConfusionCounts::new(0, 0, 1)),
        (1, 1, ConfusionCounts::new(1, 0, 0)),
    ] {
        assert_eq!(confusion_counts(x, y), want);
    }
}
