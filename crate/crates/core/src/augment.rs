//! Propagation of a document's leaf labels to every level of the hierarchy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{CodeId, Hierarchy, Level, NodeId, OntologyError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LabelError {
    #[error("document {doc_id}: duplicate code {code}")]
    DuplicateLabel { doc_id: String, code: String },

    #[error("{level} node {node}: count {count} not allowed in {propagation:?} mode")]
    InvalidCount {
        level: Level,
        node: NodeId,
        count: u64,
        propagation: Propagation,
    },
}

/// How a leaf's truth value reaches its ancestors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagation {
    /// Ancestors hold the number of descendant leaves present.
    Count,
    /// Ancestors hold the OR of their descendants (set-based).
    Binary,
}

/// The leaf codes assigned to (or predicted for) one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    doc_id: String,
    codes: BTreeSet<CodeId>,
}

impl LabelSet {
    /// Builds a label set, rejecting repeated codes.
    pub fn new(doc_id: impl Into<String>, codes: impl IntoIterator<Item = CodeId>) -> Result<LabelSet, LabelError> {
        let doc_id = doc_id.into();
        let mut set = BTreeSet::new();
        for code in codes {
            if set.contains(&code) {
                return Err(LabelError::DuplicateLabel {
                    doc_id,
                    code: code.to_string(),
                });
            }
            set.insert(code);
        }
        Ok(LabelSet { doc_id, codes: set })
    }

    /// Builds a label set, dropping repeated codes. Returns the codes that
    /// were dropped, once per extra occurrence.
    pub fn dedup(doc_id: impl Into<String>, codes: impl IntoIterator<Item = CodeId>) -> (LabelSet, Vec<CodeId>) {
        let mut set = BTreeSet::new();
        let mut dropped = Vec::new();
        for code in codes {
            if set.contains(&code) {
                dropped.push(code);
            } else {
                set.insert(code);
            }
        }
        (
            LabelSet {
                doc_id: doc_id.into(),
                codes: set,
            },
            dropped,
        )
    }

    /// Parses and collects codes. Convenience for tests and in-memory callers.
    pub fn parse<S: AsRef<str>>(doc_id: impl Into<String>, codes: &[S]) -> Result<LabelSet, crate::Error> {
        let parsed = codes
            .iter()
            .map(|c| CodeId::parse(c.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LabelSet::new(doc_id, parsed)?)
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn codes(&self) -> &BTreeSet<CodeId> {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

/// Per-level node counts for one document.
///
/// Every level from `E2` to the hierarchy's maximum is present, possibly
/// empty. Stored counts are at least 1; absent nodes count 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounts {
    propagation: Propagation,
    per_level: BTreeMap<Level, BTreeMap<NodeId, u64>>,
}

impl LevelCounts {
    pub fn empty(propagation: Propagation, max_level: Level) -> LevelCounts {
        LevelCounts {
            propagation,
            per_level: Level::up_to(max_level).map(|l| (l, BTreeMap::new())).collect(),
        }
    }

    /// Wrap precomputed node counts. Counts must be at least 1, and exactly 1
    /// in binary mode.
    pub fn from_nodes(
        propagation: Propagation,
        per_level: BTreeMap<Level, BTreeMap<NodeId, u64>>,
    ) -> Result<LevelCounts, LabelError> {
        for (level, nodes) in &per_level {
            for (node, &count) in nodes {
                let ok = match propagation {
                    Propagation::Count => count >= 1,
                    Propagation::Binary => count == 1,
                };
                if !ok {
                    return Err(LabelError::InvalidCount {
                        level: *level,
                        node: node.clone(),
                        count,
                        propagation,
                    });
                }
            }
        }
        Ok(LevelCounts { propagation, per_level })
    }

    pub fn propagation(&self) -> Propagation {
        self.propagation
    }

    pub fn levels(&self) -> impl Iterator<Item = Level> + '_ {
        self.per_level.keys().copied()
    }

    /// Node counts at `level`; `None` if the level was not augmented.
    pub fn level(&self, level: Level) -> Option<&BTreeMap<NodeId, u64>> {
        self.per_level.get(&level)
    }

    pub fn get(&self, level: Level, node: &str) -> u64 {
        self.per_level
            .get(&level)
            .and_then(|nodes| nodes.get(node))
            .copied()
            .unwrap_or(0)
    }

    /// Sum of counts at `level`.
    pub fn total(&self, level: Level) -> u64 {
        self.per_level.get(&level).map_or(0, |nodes| nodes.values().sum())
    }

    /// Clamp every count to 1.
    pub fn binarize(&self) -> LevelCounts {
        LevelCounts {
            propagation: Propagation::Binary,
            per_level: self
                .per_level
                .iter()
                .map(|(l, nodes)| (*l, nodes.keys().map(|n| (n.clone(), 1)).collect()))
                .collect(),
        }
    }

    fn add(&mut self, level: Level, node: NodeId) {
        let nodes = self.per_level.entry(level).or_default();
        match self.propagation {
            Propagation::Count => *nodes.entry(node).or_insert(0) += 1,
            Propagation::Binary => {
                nodes.insert(node, 1);
            }
        }
    }
}

/// Spread a document's leaves over the levels `E2..=max_level`.
///
/// A leaf counts at its own node on its native level and at its ancestor on
/// every level above, up to the hierarchy's maximum. It never counts below its
/// native level.
pub fn augment(
    labels: &LabelSet,
    hierarchy: &Hierarchy,
    propagation: Propagation,
) -> Result<LevelCounts, OntologyError> {
    let mut counts = LevelCounts::empty(propagation, hierarchy.max_level());
    for code in labels.codes() {
        for level in hierarchy.levels() {
            if let Some(node) = hierarchy.ancestor_at(code, level)? {
                counts.add(level, node);
            }
        }
    }
    Ok(counts)
}
