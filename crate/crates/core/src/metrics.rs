//! Confusion counts and micro-averaged precision, recall and F1 for three
//! evaluation regimes:
//!
//! * **flat**: leaf codes only, no hierarchy.
//! * **set-based**: binary augmentation; each ancestor is present or absent.
//! * **CoPHE**: count-preserving augmentation; ancestors carry the number of
//!   descendant leaves, and per-node counts are compared with
//!   `tp = min(x, y)`, `fp = max(x - y, 0)`, `fn = max(y - x, 0)`.
//!
//! Everything is summed as integers and divided once, at report time.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{augment, LabelSet, LevelCounts, Propagation};
use crate::ontology::{Hierarchy, Level, NodeId, OntologyError, UNKNOWN_CHAPTER};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("cannot compare {pred:?} predictions with {gold:?} gold counts")]
    ModeMismatch { pred: Propagation, gold: Propagation },

    #[error("document ids do not match: {detail}")]
    DocIdMismatch { detail: String },

    #[error("document {doc_id} appears more than once in the {side} corpus")]
    DuplicateDocId { doc_id: String, side: &'static str },

    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub const fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, fn_ }
    }

    pub fn is_zero(&self) -> bool {
        self.tp == 0 && self.fp == 0 && self.fn_ == 0
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, rhs: Self) -> Self {
        ConfusionCounts::new(self.tp + rhs.tp, self.fp + rhs.fp, self.fn_ + rhs.fn_)
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), Add::add)
    }
}

impl fmt::Display for ConfusionCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tp={} fp={} fn={}", self.tp, self.fp, self.fn_)
    }
}

/// Compare `predicted` and `gold` descendant counts of one node.
///
/// With 0/1 inputs this is the ordinary binary confusion cell.
pub fn confusion_counts(predicted: u64, gold: u64) -> ConfusionCounts {
    ConfusionCounts {
        tp: predicted.min(gold),
        fp: predicted.saturating_sub(gold),
        fn_: gold.saturating_sub(predicted),
    }
}

/// Per-level, per-node confusion counts of one document.
pub type NodeConfusion = BTreeMap<Level, BTreeMap<NodeId, ConfusionCounts>>;

/// Node-by-node comparison of two augmented documents. Absent nodes count 0.
pub fn document_confusion(pred: &LevelCounts, gold: &LevelCounts) -> Result<NodeConfusion, EvalError> {
    if pred.propagation() != gold.propagation() {
        return Err(EvalError::ModeMismatch {
            pred: pred.propagation(),
            gold: gold.propagation(),
        });
    }
    let levels: BTreeSet<Level> = pred.levels().chain(gold.levels()).collect();
    let empty = BTreeMap::new();
    let mut out = NodeConfusion::new();
    for level in levels {
        let p = pred.level(level).unwrap_or(&empty);
        let g = gold.level(level).unwrap_or(&empty);
        let nodes: BTreeSet<&NodeId> = p.keys().chain(g.keys()).collect();
        let cells = nodes
            .into_iter()
            .map(|node| {
                let x = p.get(node).copied().unwrap_or(0);
                let y = g.get(node).copied().unwrap_or(0);
                (node.clone(), confusion_counts(x, y))
            })
            .collect();
        out.insert(level, cells);
    }
    Ok(out)
}

/// Standard confusion counts over the raw leaf codes.
pub fn flat_confusion(pred: &LabelSet, gold: &LabelSet) -> ConfusionCounts {
    let tp = pred.codes().intersection(gold.codes()).count() as u64;
    ConfusionCounts {
        tp,
        fp: pred.len() as u64 - tp,
        fn_: gold.len() as u64 - tp,
    }
}

/// A ratio reported both at full precision and as a rounded percentage.
///
/// A zero denominator gives `value = 0.0`, `percent = 0.0`, `defined = false`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    /// Percentage rounded to one decimal, half to even, computed exactly from the integers.
    pub percent: f64,
    pub defined: bool,
}

impl Ratio {
    pub fn from_counts(numerator: u64, denominator: u64) -> Ratio {
        if denominator == 0 {
            return Ratio {
                value: 0.0,
                percent: 0.0,
                defined: false,
            };
        }
        Ratio {
            value: numerator as f64 / denominator as f64,
            percent: percent_tenths(numerator, denominator) as f64 / 10.0,
            defined: true,
        }
    }
}

/// `numerator / denominator` in tenths of a percent, rounded half to even.
pub fn percent_tenths(numerator: u64, denominator: u64) -> u64 {
    assert!(denominator > 0);
    let scaled = numerator as u128 * 1000;
    let den = denominator as u128;
    let (q, r) = (scaled / den, scaled % den);
    let rounded = match (2 * r).cmp(&den) {
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal if q % 2 == 1 => q + 1,
        _ => q,
    };
    rounded as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: Ratio,
}

/// Micro-averaged precision, recall and F1 from summed counts.
///
/// F1 is `2tp / (2tp + fp + fn)`, the harmonic mean of precision and recall
/// whenever both are defined and non-zero, and 0 whenever `tp` is 0 but some
/// error was made. It is undefined only for all-zero counts.
pub fn micro_prf(counts: ConfusionCounts) -> Prf {
    let ConfusionCounts { tp, fp, fn_ } = counts;
    Prf {
        precision: Ratio::from_counts(tp, tp + fp),
        recall: Ratio::from_counts(tp, tp + fn_),
        f1: Ratio::from_counts(2 * tp, 2 * tp + fp + fn_),
    }
}

/// Evaluation regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Flat,
    SetBased,
    Cophe,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Flat, Regime::SetBased, Regime::Cophe];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Flat => "flat",
            Regime::SetBased => "set_based",
            Regime::Cophe => "cophe",
        }
    }

    /// Augmentation used by the hierarchical regimes.
    pub fn propagation(self) -> Option<Propagation> {
        match self {
            Regime::Flat => None,
            Regime::SetBased => Some(Propagation::Binary),
            Regime::Cophe => Some(Propagation::Count),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat" => Ok(Regime::Flat),
            "set" | "set_based" | "set-based" => Ok(Regime::SetBased),
            "cophe" => Ok(Regime::Cophe),
            other => Err(format!("unknown regime {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOptions {
    pub regimes: BTreeSet<Regime>,
    /// Keep per-node (per-code for flat) breakdowns in the report.
    pub per_node: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            regimes: Regime::ALL.into_iter().collect(),
            per_node: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub prf: Prf,
}

impl From<ConfusionCounts> for Scores {
    fn from(counts: ConfusionCounts) -> Self {
        Scores {
            counts,
            prf: micro_prf(counts),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: Level,
    #[serde(flatten)]
    pub scores: Scores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<BTreeMap<NodeId, Scores>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub overall: Scores,
    /// `E2..=max_level` for hierarchical regimes, empty for flat.
    pub levels: Vec<LevelReport>,
    /// Per-leaf-code counts of the flat regime.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codes: Option<BTreeMap<NodeId, Scores>>,
}

impl RegimeReport {
    pub fn level(&self, level: Level) -> Option<&LevelReport> {
        self.levels.iter().find(|l| l.level == level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub documents: u64,
    pub max_level: Level,
    pub regimes: Vec<RegimeReport>,
    /// Categories that fell outside the chapter table and were mapped to
    /// the unknown chapter.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unmapped_categories: Vec<String>,
}

impl EvalReport {
    pub fn regime(&self, regime: Regime) -> Option<&RegimeReport> {
        self.regimes.iter().find(|r| r.regime == regime)
    }
}

/// Pair predicted and gold documents by id. Output follows the gold order.
pub fn align(pred: Vec<LabelSet>, gold: Vec<LabelSet>) -> Result<Vec<(LabelSet, LabelSet)>, EvalError> {
    let mut by_id: BTreeMap<String, LabelSet> = BTreeMap::new();
    for p in pred {
        let id = p.doc_id().to_owned();
        if by_id.insert(id.clone(), p).is_some() {
            return Err(EvalError::DuplicateDocId {
                doc_id: id,
                side: "predicted",
            });
        }
    }
    let mut seen = HashSet::new();
    let mut missing_pred = Vec::new();
    let mut pairs = Vec::with_capacity(gold.len());
    for g in gold {
        if !seen.insert(g.doc_id().to_owned()) {
            return Err(EvalError::DuplicateDocId {
                doc_id: g.doc_id().to_owned(),
                side: "gold",
            });
        }
        match by_id.remove(g.doc_id()) {
            Some(p) => pairs.push((p, g)),
            None => missing_pred.push(g.doc_id().to_owned()),
        }
    }
    if !missing_pred.is_empty() || !by_id.is_empty() {
        let mut parts = Vec::new();
        if !missing_pred.is_empty() {
            parts.push(format!("no prediction for {}", preview(&missing_pred)));
        }
        if !by_id.is_empty() {
            let extra: Vec<String> = by_id.into_keys().collect();
            parts.push(format!("no gold labels for {}", preview(&extra)));
        }
        return Err(EvalError::DocIdMismatch {
            detail: parts.join("; "),
        });
    }
    Ok(pairs)
}

fn preview(ids: &[String]) -> String {
    const SHOWN: usize = 5;
    let head = ids.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        format!("{head} and {} more", ids.len() - SHOWN)
    } else {
        head
    }
}

#[derive(Default)]
struct LevelAccumulator {
    counts: ConfusionCounts,
    nodes: BTreeMap<NodeId, ConfusionCounts>,
}

struct RegimeAccumulator {
    overall: ConfusionCounts,
    levels: BTreeMap<Level, LevelAccumulator>,
    codes: BTreeMap<NodeId, ConfusionCounts>,
}

/// Evaluate a corpus of `(predicted, gold)` document pairs.
///
/// Per regime, counts are summed over documents and nodes within each level,
/// then over levels `E2..=max_level` for the overall figures.
pub fn evaluate(
    corpus: &[(LabelSet, LabelSet)],
    hierarchy: &Hierarchy,
    options: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let mut ids = HashSet::with_capacity(corpus.len());
    for (pred, gold) in corpus {
        if pred.doc_id() != gold.doc_id() {
            return Err(EvalError::DocIdMismatch {
                detail: format!("predicted {} paired with gold {}", pred.doc_id(), gold.doc_id()),
            });
        }
        if !ids.insert(gold.doc_id()) {
            return Err(EvalError::DuplicateDocId {
                doc_id: gold.doc_id().to_owned(),
                side: "paired",
            });
        }
    }

    let mut acc: BTreeMap<Regime, RegimeAccumulator> = options
        .regimes
        .iter()
        .map(|r| {
            let levels = match r {
                Regime::Flat => BTreeMap::new(),
                _ => hierarchy.levels().map(|l| (l, LevelAccumulator::default())).collect(),
            };
            (
                *r,
                RegimeAccumulator {
                    overall: ConfusionCounts::default(),
                    levels,
                    codes: BTreeMap::new(),
                },
            )
        })
        .collect();

    for (pred, gold) in corpus {
        for (regime, a) in acc.iter_mut() {
            match regime.propagation() {
                None => {
                    let counts = flat_confusion(pred, gold);
                    a.overall += counts;
                    if options.per_node {
                        for code in pred.codes().union(gold.codes()) {
                            let cell = confusion_counts(
                                pred.codes().contains(code) as u64,
                                gold.codes().contains(code) as u64,
                            );
                            *a.codes.entry(code.node()).or_default() += cell;
                        }
                    }
                }
                Some(propagation) => {
                    let x = augment(pred, hierarchy, propagation)?;
                    let y = augment(gold, hierarchy, propagation)?;
                    for (level, cells) in document_confusion(&x, &y)? {
                        let level_acc = a.levels.entry(level).or_default();
                        for (node, cell) in cells {
                            level_acc.counts += cell;
                            if options.per_node {
                                *level_acc.nodes.entry(node).or_default() += cell;
                            }
                        }
                    }
                }
            }
        }
    }

    let regimes = acc
        .into_iter()
        .map(|(regime, a)| {
            let levels: Vec<LevelReport> = a
                .levels
                .into_iter()
                .map(|(level, l)| LevelReport {
                    level,
                    scores: l.counts.into(),
                    nodes: options.per_node.then(|| scored(l.nodes)),
                })
                .collect();
            let overall = match regime {
                Regime::Flat => a.overall,
                _ => levels.iter().map(|l| l.scores.counts).sum(),
            };
            RegimeReport {
                regime,
                overall: overall.into(),
                levels,
                codes: (regime == Regime::Flat && options.per_node).then(|| scored(a.codes)),
            }
        })
        .collect();

    Ok(EvalReport {
        documents: corpus.len() as u64,
        max_level: hierarchy.max_level(),
        regimes,
        unmapped_categories: unmapped_categories(corpus, hierarchy),
    })
}

fn scored(nodes: BTreeMap<NodeId, ConfusionCounts>) -> BTreeMap<NodeId, Scores> {
    nodes.into_iter().map(|(n, c)| (n, c.into())).collect()
}

fn unmapped_categories(corpus: &[(LabelSet, LabelSet)], hierarchy: &Hierarchy) -> Vec<String> {
    if hierarchy.max_level() < Level::Chapter {
        return Vec::new();
    }
    let categories: BTreeSet<&str> = corpus
        .iter()
        .flat_map(|(p, g)| p.codes().iter().chain(g.codes()))
        .map(|c| c.category())
        .filter(|c| hierarchy.chapter_of(c).ok() == Some(UNKNOWN_CHAPTER))
        .collect();
    categories.into_iter().map(str::to_owned).collect()
}
