//! Synthetic code universes with an explicit parent-pointer tree, and
//! brute-force reference computations that walk that tree instead of using
//! the library's string-based ancestry.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cophe::{ChapterEntry, ChapterTable, CodeId, ConfusionCounts, LabelSet, Level, UNKNOWN_CHAPTER};
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub id: String,
    pub level: Level,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Universe {
    pub table: ChapterTable,
    pub nodes: Vec<TreeNode>,
    /// Indices of nodes usable as document labels (levels e2, e1, e0).
    pub labels: Vec<usize>,
}

impl Universe {
    pub fn code(&self, node: usize) -> CodeId {
        CodeId::parse(&self.nodes[node].id).unwrap()
    }

    pub fn label_set(&self, doc_id: &str, leaves: &[usize]) -> LabelSet {
        LabelSet::new(doc_id, leaves.iter().map(|&i| self.code(i))).unwrap()
    }
}

// Candidate blocks: (family prefix, width, start, end). Disjoint within a family.
const BLOCKS: &[(&str, usize, u16, u16)] = &[
    ("", 3, 1, 9),
    ("", 3, 10, 18),
    ("", 3, 140, 149),
    ("", 3, 360, 379),
    ("", 3, 401, 405),
    ("", 3, 420, 429),
    ("V", 2, 1, 9),
    ("V", 2, 50, 59),
    ("E", 3, 800, 807),
    ("E", 3, 846, 849),
    ("", 2, 1, 5),
    ("", 2, 35, 39),
];

fn category(prefix: &str, width: usize, n: u16) -> String {
    format!("{prefix}{n:0width$}")
}

/// A random universe: a subset of blocks, a few categories per block (plus
/// some categories no block covers), and random e1/e2 children.
pub fn synthetic_universe<R: Rng>(rng: &mut R) -> Universe {
    let mut chosen: Vec<_> = BLOCKS.iter().filter(|_| rng.gen_bool(0.7)).collect();
    if chosen.is_empty() {
        chosen.push(&BLOCKS[3]);
    }
    let entries = chosen
        .iter()
        .map(|&&(p, w, s, e)| ChapterEntry {
            range_start: category(p, w, s),
            range_end: category(p, w, e),
            chapter_id: format!("B{}-{}", category(p, w, s), category(p, w, e)),
            description: String::new(),
        })
        .collect::<Vec<_>>();
    let table = ChapterTable::from_entries(entries.clone()).unwrap();

    let mut nodes = vec![TreeNode {
        id: UNKNOWN_CHAPTER.to_owned(),
        level: Level::Chapter,
        parent: None,
    }];
    let mut labels = Vec::new();
    let mut used = BTreeSet::new();

    let mut add_category =
        |nodes: &mut Vec<TreeNode>, labels: &mut Vec<usize>, cat: String, chapter: usize, rng: &mut R| {
            if !used.insert(cat.clone()) {
                return;
            }
            let cat_idx = nodes.len();
            nodes.push(TreeNode {
                id: cat.clone(),
                level: Level::E0,
                parent: Some(chapter),
            });
            labels.push(cat_idx);
            let mut e1_digits: Vec<u8> = (0..10).collect();
            e1_digits.shuffle(rng);
            for d1 in e1_digits.into_iter().take(rng.gen_range(0..=4)) {
                let e1_idx = nodes.len();
                nodes.push(TreeNode {
                    id: format!("{cat}.{d1}"),
                    level: Level::E1,
                    parent: Some(cat_idx),
                });
                labels.push(e1_idx);
                let mut e2_digits: Vec<u8> = (0..10).collect();
                e2_digits.shuffle(rng);
                for d2 in e2_digits.into_iter().take(rng.gen_range(0..=3)) {
                    labels.push(nodes.len());
                    nodes.push(TreeNode {
                        id: format!("{cat}.{d1}{d2}"),
                        level: Level::E2,
                        parent: Some(e1_idx),
                    });
                }
            }
        };

    for (&&(p, w, s, e), entry) in chosen.iter().zip(&entries) {
        let chapter = nodes.len();
        nodes.push(TreeNode {
            id: entry.chapter_id.clone(),
            level: Level::Chapter,
            parent: None,
        });
        for _ in 0..rng.gen_range(1..=3) {
            let n = rng.gen_range(s..=e);
            add_category(&mut nodes, &mut labels, category(p, w, n), chapter, rng);
        }
    }
    // uncovered diagnosis categories: 900-999 is never a block above
    for _ in 0..rng.gen_range(0..=2) {
        let n = rng.gen_range(900..=999);
        add_category(&mut nodes, &mut labels, category("", 3, n), 0, rng);
    }

    Universe { table, nodes, labels }
}

/// Up to `max` distinct labels drawn from the universe.
pub fn random_leaves<R: Rng>(u: &Universe, rng: &mut R, max: usize) -> Vec<usize> {
    let k = rng.gen_range(0..=max.min(u.labels.len()));
    u.labels.choose_multiple(rng, k).copied().collect()
}

pub type Tally = BTreeMap<Level, BTreeMap<String, u64>>;

/// Walk every leaf's parent chain and tally nodes at levels up to `max_level`.
pub fn oracle_tally(u: &Universe, leaves: &[usize], max_level: Level, binary: bool) -> Tally {
    let mut tally: Tally = Level::up_to(max_level).map(|l| (l, BTreeMap::new())).collect();
    for &leaf in leaves {
        let mut cursor = Some(leaf);
        while let Some(i) = cursor {
            let node = &u.nodes[i];
            if node.level <= max_level {
                let slot = tally.get_mut(&node.level).unwrap().entry(node.id.clone()).or_insert(0);
                *slot = if binary { 1 } else { *slot + 1 };
            }
            cursor = node.parent;
        }
    }
    tally
}

/// Reference per-level confusion counts from two tallies.
pub fn oracle_level_confusion(pred: &Tally, gold: &Tally) -> BTreeMap<Level, ConfusionCounts> {
    let mut out = BTreeMap::new();
    for (level, p) in pred {
        let g = &gold[level];
        let mut c = ConfusionCounts::default();
        let nodes: BTreeSet<&String> = p.keys().chain(g.keys()).collect();
        for n in nodes {
            let x = *p.get(n).unwrap_or(&0);
            let y = *g.get(n).unwrap_or(&0);
            // counted one descendant at a time
            for k in 0..x.max(y) {
                match (k < x, k < y) {
                    (true, true) => c.tp += 1,
                    (true, false) => c.fp += 1,
                    (false, true) => c.fn_ += 1,
                    (false, false) => unreachable!(),
                }
            }
        }
        out.insert(*level, c);
    }
    out
}
